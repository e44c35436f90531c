use nalgebra::{Matrix6, Vector6};

use super::spectrum::{dip_model, lorentz, OdmrSpec, Spectrum};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzFit {
    pub f_minus: f64,
    pub f_plus: f64,
    /// `[minus, plus]` FWHM.
    pub linewidths: [f64; 2],
    pub contrasts: [f64; 2],
    /// Euclidean norm of the final residual vector.
    pub residual: f64,
    pub iterations: usize,
    /// Residual norm after the initial guess and after every accepted step.
    pub residual_history: Vec<f64>,
}

/// Moving average of `d` over `|f_j - f_i| <= half` (prefix sums, two
/// pointers).
fn boxcar(freqs: &[f64], d: &[f64], half: f64) -> Vec<f64> {
    let n = d.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + d[i];
    }
    let (mut lo, mut hi) = (0, 0);
    (0..n)
        .map(|i| {
            while freqs[lo] < freqs[i] - half {
                lo += 1;
            }
            while hi + 1 < n && freqs[hi + 1] <= freqs[i] + half {
                hi += 1;
            }
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect()
}

fn interp(freqs: &[f64], v: &[f64], f: f64) -> f64 {
    if f <= freqs[0] {
        return v[0];
    }
    let n = freqs.len();
    if f >= freqs[n - 1] {
        return v[n - 1];
    }
    let j = freqs.partition_point(|&x| x <= f);
    let t = (f - freqs[j - 1]) / (freqs[j] - freqs[j - 1]);
    v[j - 1] + t * (v[j] - v[j - 1])
}

fn robust_noise(values: &[f64]) -> f64 {
    let mut diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if diffs.is_empty() {
        return 0.0;
    }
    let mid = diffs.len() / 2;
    let (_, m, _) = diffs.select_nth_unstable_by(mid, f64::total_cmp);
    1.4826 * *m / std::f64::consts::SQRT_2
}

/// Matched filter over hyperfine sub-dip pairs; returns initial
/// `[f-, f+, w-, w+, c-, c+]`.
fn initial_guess(spec: &Spectrum, odmr: &OdmrSpec) -> Result<[f64; 6]> {
    let (freqs, values) = (&spec.freqs, &spec.values);
    let depth: Vec<f64> = values.iter().map(|v| 1.0 - v).collect();
    let w0 = odmr.linewidth;
    let h = 0.5 * odmr.hyperfine_splitting;
    let smooth = boxcar(freqs, &depth, 0.25 * w0);
    let score: Vec<f64> = freqs
        .iter()
        .map(|&f| interp(freqs, &smooth, f - h) + interp(freqs, &smooth, f + h))
        .collect();
    let local_max = |i: usize| {
        (i == 0 || score[i] >= score[i - 1]) && (i + 1 == score.len() || score[i] >= score[i + 1])
    };
    let best = (0..score.len())
        .max_by(|&a, &b| score[a].total_cmp(&score[b]))
        .unwrap();
    // 0.927 is the mean of a unit Lorentzian over its central half-width.
    let c0 = score[best] / (2.0 * 0.927);
    let noise = robust_noise(values);
    if !(c0 > 3.0 * noise && c0 > 1e-9) {
        return Err(Error::Fit {
            iterations: 0,
            residual: depth.iter().map(|d| d * d).sum::<f64>().sqrt(),
        });
    }
    let second = (0..score.len())
        .filter(|&i| (freqs[i] - freqs[best]).abs() > w0 && local_max(i) && score[i] >= 0.6 * score[best])
        .max_by(|&a, &b| score[a].total_cmp(&score[b]));
    Ok(match second {
        Some(j) => {
            let (a, b) = (freqs[best].min(freqs[j]), freqs[best].max(freqs[j]));
            let ca = score[if freqs[best] < freqs[j] { best } else { j }] / (2.0 * 0.927);
            let cb = score[if freqs[best] < freqs[j] { j } else { best }] / (2.0 * 0.927);
            [a, b, w0, w0, ca, cb]
        }
        // coincident resonances: split the depth between the pair
        None => [freqs[best], freqs[best], w0, w0, 0.5 * c0, 0.5 * c0],
    })
}

fn cost(spec: &Spectrum, p: &[f64; 6], hf: f64) -> f64 {
    if p[2] <= 0.0 || p[3] <= 0.0 || p[4] <= 0.0 || p[5] <= 0.0 {
        return f64::INFINITY;
    }
    spec.freqs
        .iter()
        .zip(&spec.values)
        .map(|(&f, &y)| {
            let r = y - dip_model(f, [p[0], p[1]], [p[2], p[3]], [p[4], p[5]], hf);
            r * r
        })
        .sum()
}

/// Normal equations `J^T J` and `J^T r` of the dip model.
fn normal_equations(spec: &Spectrum, p: &[f64; 6], hf: f64) -> (Matrix6<f64>, Vector6<f64>) {
    let h = 0.5 * hf;
    let mut jtj = Matrix6::zeros();
    let mut jtr = Vector6::zeros();
    for (&f, &y) in spec.freqs.iter().zip(&spec.values) {
        let r = y - dip_model(f, [p[0], p[1]], [p[2], p[3]], [p[4], p[5]], hf);
        let mut g = Vector6::zeros();
        for s in 0..2 {
            let (c, w, a) = (p[s], p[2 + s], p[4 + s]);
            let (mut dc, mut dw, mut da) = (0.0, 0.0, 0.0);
            for off in [-h, h] {
                let u = 2.0 * (f - c - off) / w;
                let q = 1.0 + u * u;
                dc += 4.0 * u / (w * q * q);
                dw += 2.0 * u * u / (w * q * q);
                da += lorentz(f, c + off, w);
            }
            g[s] = -a * dc;
            g[2 + s] = -a * dw;
            g[4 + s] = -da;
        }
        jtj += g * g.transpose();
        jtr += g * r;
    }
    (jtj, jtr)
}

/// Damped least squares fit of the two-resonance hyperfine-pair model.
/// `odmr` supplies the hyperfine splitting and the nominal linewidth used to
/// seed the search.
pub fn fit_lorentzian(spec: &Spectrum, odmr: &OdmrSpec) -> Result<LorentzFit> {
    if spec.freqs.len() != spec.values.len() || spec.freqs.len() < 8 {
        return Err(Error::Shape(format!(
            "spectrum needs matching frequency/value arrays of at least 8 samples, got {}/{}",
            spec.freqs.len(),
            spec.values.len()
        )));
    }
    let hf = odmr.hyperfine_splitting;
    let mut p = initial_guess(spec, odmr)?;
    let mut c = cost(spec, &p, hf);
    let mut history = vec![c.sqrt()];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(spec, &p, hf);
        let mut stepped = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..6 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 4.0;
                continue;
            };
            let mut trial = p;
            for k in 0..6 {
                trial[k] += delta[k];
            }
            let tc = cost(spec, &trial, hf);
            if tc < c {
                let pn: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dn = delta.norm();
                p = trial;
                c = tc;
                history.push(c.sqrt());
                lambda = (lambda / 3.0).max(1e-12);
                stepped = true;
                if dn <= STEP_TOLERANCE * (pn + STEP_TOLERANCE) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        // no descent direction left: at the minimum to machine precision
        if !stepped || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Fit {
            iterations,
            residual: c.sqrt(),
        });
    }
    let (lo, hi) = if p[0] <= p[1] { (0, 1) } else { (1, 0) };
    Ok(LorentzFit {
        f_minus: p[lo],
        f_plus: p[hi],
        linewidths: [p[2 + lo], p[2 + hi]],
        contrasts: [p[4 + lo], p[4 + hi]],
        residual: c.sqrt(),
        iterations,
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odmr::{extract_field, synthesize_odmr};

    #[test]
    fn noiseless_round_trip() {
        let spec = OdmrSpec::default();
        for bz in [80.0, 150.0, 333.0, -210.0] {
            let s = synthesize_odmr([0.0, 0.0, bz], &spec, 0.0, 0).unwrap();
            let fit = fit_lorentzian(&s, &spec).unwrap();
            let (fm, fp) = spec.resonances(bz);
            assert!((fit.f_minus - fm).abs() < 1e-3 * spec.linewidth, "{bz}: {fit:?}");
            assert!((fit.f_plus - fp).abs() < 1e-3 * spec.linewidth, "{bz}: {fit:?}");
            let (b, shift) = extract_field(fit.f_minus, fit.f_plus, &spec).unwrap();
            assert!((b - bz.abs()).abs() < 1e-3 * bz.abs());
            assert!(shift.abs() < 1e-6);
        }
    }

    #[test]
    fn residuals_never_increase() {
        let spec = OdmrSpec::default();
        let s = synthesize_odmr([0.0, 0.0, 200.0], &spec, spec.noise_for_snr(20.0), 3).unwrap();
        let fit = fit_lorentzian(&s, &spec).unwrap();
        assert!(fit.residual_history.len() >= 2);
        assert!(fit.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn coincident_resonances() {
        let spec = OdmrSpec::default();
        let s = synthesize_odmr([0.0; 3], &spec, 0.0, 0).unwrap();
        let fit = fit_lorentzian(&s, &spec).unwrap();
        assert!((fit.f_minus - 2870.0).abs() < 0.05 && (fit.f_plus - 2870.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn flat_spectrum_is_a_fit_error() {
        let spec = OdmrSpec::default();
        let flat = Spectrum {
            freqs: spec.freq_grid.clone(),
            values: vec![1.0; spec.freq_grid.len()],
        };
        assert!(matches!(fit_lorentzian(&flat, &spec), Err(Error::Fit { .. })));
    }
}

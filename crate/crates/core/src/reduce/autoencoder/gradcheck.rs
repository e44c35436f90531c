use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Autoencoder, Trace};
use super::net::Op;
use crate::error::{Error, Result};
use crate::fieldsynth::FieldImage;

/// Gradients smaller than this are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Parameter index with the largest error.
    pub worst_index: usize,
    pub checked: usize,
    /// Parameters skipped because a perturbation crossed a rectifier kink or
    /// changed a pooling winner.
    pub excluded: usize,
    /// Number of parameter blocks (weights and biases per layer) sampled.
    pub blocks_covered: usize,
}

/// Which piece of the piecewise-linear network a forward pass landed on.
fn signature(model: &Autoencoder<f64>, trace: &Trace<f64>) -> (Vec<bool>, Vec<u32>) {
    let mut mask = Vec::new();
    let mut args = Vec::new();
    for (i, op) in model.ops().iter().enumerate() {
        match op {
            Op::Relu { .. } => mask.extend(trace.acts[i].iter().map(|&v| v > 0.0)),
            Op::Pool { .. } => args.extend_from_slice(&trace.argmax[i]),
            _ => {}
        }
    }
    (mask, args)
}

/// Compares backpropagated gradients of the reconstruction loss on `image`
/// against central differences for about `samples` parameters drawn from
/// every weight and bias block.
pub fn gradient_check(
    model: &Autoencoder<f64>,
    image: &FieldImage<f64>,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheck> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let x = model.flatten(image)?;
    let (_, analytic) = model.loss_and_grad(&x);
    let base_sig = signature(model, &model.forward(x.clone()));

    let blocks: Vec<(usize, usize)> = model
        .ops()
        .iter()
        .filter_map(|op| op.param_blocks())
        .flat_map(|(w, nw, b, nb)| [(w, nw), (b, nb)])
        .collect();
    // even share per block, leftovers handed to blocks with room to spare
    let per_block = samples.div_ceil(blocks.len().max(1)).max(1);
    let mut quota: Vec<usize> = blocks.iter().map(|&(_, n)| per_block.min(n)).collect();
    let mut left = samples.saturating_sub(quota.iter().sum());
    for (q, &(_, n)) in quota.iter_mut().zip(&blocks) {
        let extra = left.min(n - *q);
        *q += extra;
        left -= extra;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = Vec::new();
    for (&(off, n), &k) in blocks.iter().zip(&quota) {
        indices.extend(sample(&mut rng, n, k).into_iter().map(|i| off + i));
    }

    let mut probe = model.clone();
    let mut worst = (0.0f64, 0usize);
    let (mut checked, mut excluded) = (0, 0);
    for &idx in &indices {
        let orig = probe.params()[idx];
        probe.params_mut()[idx] = orig + epsilon;
        let tp = probe.forward(x.clone());
        let lp = probe.sample_loss(&x, tp.acts.last().unwrap()).0;
        let sp = signature(&probe, &tp);
        probe.params_mut()[idx] = orig - epsilon;
        let tm = probe.forward(x.clone());
        let lm = probe.sample_loss(&x, tm.acts.last().unwrap()).0;
        let sm = signature(&probe, &tm);
        probe.params_mut()[idx] = orig;
        if sp != base_sig || sm != base_sig {
            excluded += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * epsilon);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        checked += 1;
        if rel > worst.0 {
            worst = (rel, idx);
        }
    }
    Ok(GradCheck {
        max_relative_error: worst.0,
        worst_index: worst.1,
        checked,
        excluded,
        blocks_covered: blocks.iter().filter(|b| b.1 > 0).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::autoencoder::Architecture;
    use rand::Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> FieldImage<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FieldImage::from_vec(h, w, (0..h * w * 3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    // a fresh model has a zero output layer, which hides every other gradient
    fn jittered(mut m: Autoencoder<f64>) -> Autoencoder<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in m.params_mut() {
            *p += rng.gen_range(-0.05..0.05);
        }
        m
    }

    #[test]
    fn linear_model_is_exact() {
        let m = jittered(Autoencoder::<f64>::new(Architecture::linear(4), 4, 5, 3).unwrap());
        let g = gradient_check(&m, &random_image(4, 5, 1), 1e-3, 200, 0).unwrap();
        assert_eq!(g.excluded, 0);
        assert!(g.checked >= 200);
        assert!(g.max_relative_error < 1e-8, "{g:?}");
    }

    #[test]
    fn small_conv_model() {
        let m = jittered(Autoencoder::<f64>::new(Architecture::default(), 12, 12, 5).unwrap());
        let g = gradient_check(&m, &random_image(12, 12, 2), 1e-5, 240, 1).unwrap();
        assert!(g.checked > 150, "{g:?}");
        assert!(g.max_relative_error < 1e-4, "{g:?}");
        assert_eq!(g.blocks_covered, 16);
    }
}

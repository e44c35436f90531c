use crate::error::{Error, Result};
use crate::logicsim::{PrimitiveKind, SwitchingProfile};

/// DC current drawn per unit toggle rate, microamps, plus an optional static
/// per-cell leakage (zero for the FPGA model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentWeights {
    pub register: f64,
    pub lut: f64,
    pub leakage: f64,
}

impl Default for CurrentWeights {
    fn default() -> Self {
        Self {
            register: 2.0,
            lut: 1.0,
            leakage: 0.0,
        }
    }
}

impl CurrentWeights {
    pub fn weight(&self, kind: PrimitiveKind) -> f64 {
        match kind {
            PrimitiveKind::Register => self.register,
            PrimitiveKind::Lut => self.lut,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, w) in [("register", self.register), ("lut", self.lut)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("{name} weight must be positive, got {w}")));
            }
        }
        if !(self.leakage >= 0.0 && self.leakage.is_finite()) {
            return Err(Error::Config(format!(
                "leakage must be non-negative, got {}",
                self.leakage
            )));
        }
        Ok(())
    }
}

/// Per-primitive DC-average current, microamps, indexed by primitive id.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCurrentMap {
    pub currents: Vec<f64>,
    pub weights: CurrentWeights,
}

impl CellCurrentMap {
    pub fn total(&self) -> f64 {
        self.currents.iter().sum()
    }
}

/// `current = weight(kind) * toggles / window + leakage`.
pub fn activity_to_currents(
    profile: &SwitchingProfile,
    weights: &CurrentWeights,
) -> Result<CellCurrentMap> {
    weights.validate()?;
    let currents = profile
        .primitives
        .iter()
        .zip(&profile.toggle_counts)
        .map(|(p, &t)| {
            weights.weight(p.kind) * t as f64 / profile.window_cycles as f64 + weights.leakage
        })
        .collect();
    Ok(CellCurrentMap {
        currents,
        weights: *weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logicsim::{Primitive, PrimitiveRole};

    fn profile(counts: Vec<u64>, window: u64) -> SwitchingProfile {
        SwitchingProfile {
            primitives: (0..counts.len())
                .map(|i| Primitive {
                    kind: if i % 2 == 0 {
                        PrimitiveKind::Register
                    } else {
                        PrimitiveKind::Lut
                    },
                    role: PrimitiveRole::BaseBit(i),
                })
                .collect(),
            toggle_counts: counts,
            window_cycles: window,
        }
    }

    #[test]
    fn linear_map() {
        let w = CurrentWeights::default();
        let m = activity_to_currents(&profile(vec![50, 0, 0], 100), &w).unwrap();
        assert_eq!(m.currents, vec![1.0, 0.0, 0.0]);
        let a = activity_to_currents(&profile(vec![3, 5, 7, 9], 64), &w).unwrap();
        let b = activity_to_currents(&profile(vec![6, 10, 14, 18], 64), &w).unwrap();
        for (x, y) in a.currents.iter().zip(&b.currents) {
            assert!((2.0 * x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_activity_zero_current() {
        let m = activity_to_currents(&profile(vec![0; 5], 10), &CurrentWeights::default()).unwrap();
        assert!(m.currents.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn rejects_bad_weights() {
        let w = CurrentWeights {
            lut: 0.0,
            ..Default::default()
        };
        assert!(activity_to_currents(&profile(vec![1], 2), &w).is_err());
    }
}

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::Autoencoder;
use crate::error::{Error, Result};
use crate::fieldsynth::FieldImage;
use crate::scalar::Real;

/// Parameter update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    /// Heavy-ball momentum: `v = m v - lr g; p += v`.
    Momentum,
    /// Adam with `beta1 = momentum`, `beta2 = 0.999`, `eps = 1e-8`.
    Adam,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::Momentum => "momentum",
            Optimizer::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "momentum" | "sgd" => Some(Optimizer::Momentum),
            "adam" => Some(Optimizer::Adam),
            _ => None,
        }
    }
}

const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best loss before the rate is halved and the
    /// best parameters restored. 0 halves and undoes on any increase.
    pub patience: usize,
    /// Epochs between clustering checks of the latent space; 0 disables.
    pub check_interval: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            learning_rate: 3e-4,
            momentum: 0.9,
            batch_size: 8,
            max_epochs: 2000,
            patience: 10,
            check_interval: 50,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Budget used with the simplified architecture on large workloads.
    pub fn large_workload() -> Self {
        Self {
            max_epochs: 1000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The latent clustering check found this many clusters.
    Clustered { clusters: usize },
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub stop: StopReason,
    /// Training loss before the first epoch, then after each epoch.
    pub loss_history: Vec<f64>,
    pub val_loss_history: Vec<f64>,
    pub lr_history: Vec<f64>,
    /// Lowest training loss seen; the returned model holds it unless
    /// training stopped on a clustering check.
    pub best_loss: f64,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,train_loss,val_loss,learning_rate")?;
        for (e, &l) in self.loss_history.iter().enumerate() {
            let v = self.val_loss_history.get(e).copied().unwrap_or(f64::NAN);
            let lr = self.lr_history.get(e).copied().unwrap_or(f64::NAN);
            writeln!(out, "{e},{l:.9e},{v:.9e},{lr:.6e}")?;
        }
        Ok(())
    }
}

fn mean_loss<T: Real>(model: &Autoencoder<T>, data: &[Vec<T>]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let losses: Vec<f64> = data.par_iter().map(|x| model.flat_loss(x)).collect();
    losses.iter().sum::<f64>() / data.len() as f64
}

/// Encodes images in order.
pub fn encode_all<T: Real, U: Real>(model: &Autoencoder<T>, images: &[FieldImage<U>]) -> Result<Vec<Vec<f64>>> {
    images.par_iter().map(|img| model.encode(img)).collect()
}

/// Mini-batch gradient descent (Adam or heavy-ball momentum) on the mean
/// squared reconstruction error.
///
/// After each epoch the full training loss is evaluated. With `patience`
/// 0, any rise undoes the epoch (parameters and optimizer state) and halves
/// the learning rate, so the recorded history never increases. Otherwise the
/// rate is halved and the best parameters restored once `patience` epochs
/// pass without a new best; training ends on the best parameters seen.
/// Every `check_interval` epochs the training and validation images are
/// encoded and handed to `clusters`, which returns a cluster count; two or
/// more stops training.
///
/// A non-finite loss restores the last good parameters and returns a
/// training error.
pub fn train<T, F>(
    model: &mut Autoencoder<T>,
    train_set: &[FieldImage<T>],
    val_set: &[FieldImage<T>],
    cfg: &TrainConfig,
    mut clusters: F,
) -> Result<TrainReport>
where
    T: Real,
    F: FnMut(&[Vec<f64>]) -> Result<usize>,
{
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Shape("training set is empty".into()));
    }
    let train: Vec<Vec<T>> = train_set.iter().map(|i| model.flatten(i)).collect::<Result<_>>()?;
    let val: Vec<Vec<T>> = val_set.iter().map(|i| model.flatten(i)).collect::<Result<_>>()?;
    let n_params = model.params().len();
    let mut state = OptState {
        velocity: vec![T::zero(); n_params],
        second: match cfg.optimizer {
            Optimizer::Adam => vec![T::zero(); n_params],
            Optimizer::Momentum => Vec::new(),
        },
        step: 0,
    };
    let mut lr = cfg.learning_rate;
    let mut loss = mean_loss(model, &train);
    if !loss.is_finite() {
        return Err(Error::Training {
            epoch: 0,
            message: "initial loss is not finite".into(),
        });
    }
    let mut report = TrainReport {
        epochs: 0,
        stop: StopReason::MaxEpochs,
        loss_history: vec![loss],
        val_loss_history: vec![mean_loss(model, &val)],
        lr_history: vec![lr],
        best_loss: loss,
    };
    let mut best = (loss, model.params().to_vec(), state.clone());
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);

        for batch in order.chunks(cfg.batch_size) {
            let grads: Vec<Vec<T>> = batch.par_iter().map(|&i| model.loss_and_grad(&train[i]).1).collect();
            // summed in batch order so the result is independent of scheduling
            let inv = T::lit(1.0 / batch.len() as f64);
            let mut g = vec![T::zero(); n_params];
            for gr in &grads {
                for (a, &b) in g.iter_mut().zip(gr) {
                    *a += b;
                }
            }
            g.iter_mut().for_each(|v| *v = *v * inv);
            state.apply(model.params_mut(), &g, lr, cfg);
        }

        let new_loss = mean_loss(model, &train);
        if !new_loss.is_finite() {
            model.params_mut().copy_from_slice(&best.1);
            return Err(Error::Training {
                epoch,
                message: format!("loss became {new_loss}; best parameters restored"),
            });
        }
        if new_loss < best.0 {
            best = (new_loss, model.params().to_vec(), state.clone());
            stale = 0;
            loss = new_loss;
        } else if cfg.patience == 0 {
            model.params_mut().copy_from_slice(&best.1);
            state.restore(&best.2, cfg.optimizer);
            lr *= 0.5;
        } else {
            loss = new_loss;
            stale += 1;
            if stale >= cfg.patience {
                model.params_mut().copy_from_slice(&best.1);
                state.restore(&best.2, cfg.optimizer);
                lr *= 0.5;
                stale = 0;
            }
        }
        model.epochs_trained += 1;
        report.epochs = epoch;
        report.loss_history.push(loss);
        report.val_loss_history.push(mean_loss(model, &val));
        report.lr_history.push(lr);

        if cfg.check_interval > 0 && epoch % cfg.check_interval == 0 {
            let mut latents = encode_all(model, train_set)?;
            latents.extend(encode_all(model, val_set)?);
            let k = clusters(&latents)?;
            log::debug!("epoch {epoch}: loss {loss:.4e}, {k} latent clusters");
            if k >= 2 {
                report.stop = StopReason::Clustered { clusters: k };
                report.best_loss = best.0;
                return Ok(report);
            }
        }
    }
    model.params_mut().copy_from_slice(&best.1);
    report.best_loss = best.0;
    Ok(report)
}

#[derive(Clone)]
struct OptState<T> {
    velocity: Vec<T>,
    second: Vec<T>,
    step: i32,
}

impl<T: Real> OptState<T> {
    fn apply(&mut self, params: &mut [T], g: &[T], lr: f64, cfg: &TrainConfig) {
        let mom = T::lit(cfg.momentum);
        match cfg.optimizer {
            Optimizer::Momentum => {
                let lr_t = T::lit(lr);
                for k in 0..params.len() {
                    self.velocity[k] = mom * self.velocity[k] - lr_t * g[k];
                    params[k] += self.velocity[k];
                }
            }
            Optimizer::Adam => {
                self.step += 1;
                let b2 = T::lit(ADAM_BETA2);
                let step_size =
                    T::lit(lr * (1.0 - ADAM_BETA2.powi(self.step)).sqrt() / (1.0 - cfg.momentum.powi(self.step)));
                let eps = T::lit(ADAM_EPS);
                for k in 0..params.len() {
                    self.velocity[k] = mom * self.velocity[k] + (T::one() - mom) * g[k];
                    self.second[k] = b2 * self.second[k] + (T::one() - b2) * g[k] * g[k];
                    params[k] -= step_size * self.velocity[k] / (self.second[k].sqrt() + eps);
                }
            }
        }
    }

    fn restore(&mut self, saved: &Self, optimizer: Optimizer) {
        match optimizer {
            // The stored velocity was built at the old rate.
            Optimizer::Momentum => self.velocity.fill(T::zero()),
            Optimizer::Adam => *self = saved.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::autoencoder::Architecture;

    fn blobs(n: usize, h: usize, w: usize) -> Vec<FieldImage<f32>> {
        (0..n)
            .map(|i| {
                let mut img = FieldImage::<f32>::zeros(h, w);
                for r in 0..h {
                    for c in 0..w {
                        let v = ((r * 3 + c * 5 + i * 7) % 13) as f32 / 13.0 - 0.5;
                        let bump = if i % 2 == 0 && r < h / 2 { 1.0 } else { 0.0 };
                        img.set(r, c, 0, v * 0.1 + bump);
                        img.set(r, c, 2, -bump);
                    }
                }
                img
            })
            .collect()
    }

    #[test]
    fn loss_never_increases_and_drops() {
        let data = blobs(12, 8, 8);
        let mut m = Autoencoder::<f32>::new(Architecture::default(), 8, 8, 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            max_epochs: 30,
            patience: 0,
            check_interval: 0,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let r = train(&mut m, &data[..10], &data[10..], &cfg, |_| Ok(1)).unwrap();
        assert_eq!(r.epochs, 30);
        assert_eq!(r.stop, StopReason::MaxEpochs);
        assert!(r.loss_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.loss_history.last().unwrap() < &r.loss_history[0]);
        assert_eq!(m.epochs_trained, 30);
    }

    #[test]
    fn plateau_schedule_ends_on_best() {
        let data = blobs(12, 8, 8);
        let mut m = Autoencoder::<f32>::new(Architecture::default(), 8, 8, 3).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            max_epochs: 40,
            patience: 3,
            check_interval: 0,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let train_set = &data[..10];
        let r = train(&mut m, train_set, &[], &cfg, |_| Ok(1)).unwrap();
        let lowest = r.loss_history.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_loss, lowest);
        assert!(r.best_loss < r.loss_history[0]);
        let flat: Vec<Vec<f32>> = train_set.iter().map(|i| m.flatten(i).unwrap()).collect();
        assert!((mean_loss(&m, &flat) - r.best_loss).abs() < 1e-9 * r.best_loss.max(1.0));
        assert!(r.lr_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn deterministic() {
        let data = blobs(10, 8, 8);
        let cfg = TrainConfig {
            learning_rate: 0.02,
            max_epochs: 5,
            check_interval: 0,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = Autoencoder::<f32>::new(Architecture::default(), 8, 8, 4).unwrap();
            let r = train(&mut m, &data, &[], &cfg, |_| Ok(1)).unwrap();
            (m.param_checksum(), r.loss_history)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stop_hook_fires() {
        let data = blobs(8, 8, 8);
        let mut m = Autoencoder::<f32>::new(Architecture::default(), 8, 8, 1).unwrap();
        let cfg = TrainConfig {
            max_epochs: 100,
            check_interval: 3,
            ..TrainConfig::default()
        };
        let mut calls = 0;
        let r = train(&mut m, &data[..6], &data[6..], &cfg, |pts| {
            assert_eq!(pts.len(), 8);
            calls += 1;
            Ok(if calls == 2 { 2 } else { 1 })
        })
        .unwrap();
        assert_eq!(r.stop, StopReason::Clustered { clusters: 2 });
        assert_eq!(r.epochs, 6);
    }

    #[test]
    fn divergence_restores_last_good_state() {
        let data = blobs(6, 8, 8);
        let mut m = Autoencoder::<f32>::new(Architecture::default(), 8, 8, 1).unwrap();
        let before = m.param_checksum();
        let cfg = TrainConfig {
            learning_rate: 1e30,
            max_epochs: 3,
            check_interval: 0,
            ..TrainConfig::default()
        };
        let err = train(&mut m, &data, &[], &cfg, |_| Ok(1)).unwrap_err();
        assert!(matches!(err, Error::Training { .. }), "{err:?}");
        assert_eq!(m.param_checksum(), before);
    }

    #[test]
    fn csv_layout() {
        let r = TrainReport {
            epochs: 1,
            stop: StopReason::MaxEpochs,
            loss_history: vec![2.0, 1.0],
            val_loss_history: vec![3.0, 2.5],
            lr_history: vec![1e-3, 1e-3],
            best_loss: 1.0,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("epoch,train_loss,val_loss,learning_rate\n0,2.000000000e0,"));
        assert_eq!(s.lines().count(), 3);
    }
}

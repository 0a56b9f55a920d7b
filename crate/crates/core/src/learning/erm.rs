use serde::{Deserialize, Serialize};

use super::{features, Dataset, Mlp, MlpCache, ResidualEstimator, Standardizer};
use crate::clf::ClfContext;
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Hidden width of both networks.
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput("hidden width and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(Error::InvalidInput("learning rate and epsilon must be positive".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::InvalidInput("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// A sample reduced to what the loss needs: features, input, the model-based
/// estimate `V̂̇₀(η, u)` and the measured `V̇`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmRow {
    pub features: Vec<f64>,
    pub u: Vector,
    pub base: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Empirical risk of the freshly initialized estimator.
    pub initial_loss: f64,
    /// Empirical risk after the last epoch.
    pub final_loss: f64,
    /// Mean mini-batch loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn prepare_rows(dataset: &Dataset, base: &ClfContext) -> Result<Vec<ErmRow>> {
    dataset
        .samples()
        .iter()
        .map(|s| {
            let d = base.vdot_affine(&s.q, &s.qd, s.t)?;
            Ok(ErmRow {
                features: features(&s.q, &s.qd, &s.eta, &base.clf),
                u: s.u.clone(),
                base: d.eval(&s.u),
                target: s.vdot,
            })
        })
        .collect()
}

/// `(1/N) Σ (Ŵ̇ᵢ − V̇ᵢ)²`.
pub fn empirical_risk(estimator: &ResidualEstimator, rows: &[ErmRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: f64 = rows
        .iter()
        .map(|r| {
            let (a, b) = estimator.residuals(&r.features);
            let err = r.base + a.dot(&r.u) + b - r.target;
            err * err
        })
        .sum();
    total / rows.len() as f64
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(cfg: &TrainingConfig, len: usize) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let step = self.lr * c2.sqrt() / c1;
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= step * *m / (v.sqrt() + self.eps * c2.sqrt());
        }
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    let r = (sum / n.max(1) as f64).sqrt();
    if r > 1e-12 {
        r
    } else {
        1.0
    }
}

/// Fits fresh `â`, `b̂` networks to `D` by mini-batch Adam on the squared loss
/// of `Ŵ̇ = V̂̇₀ + âᵀu + b̂` against the measured `V̇`.
///
/// Features are standardized and the residual target and inputs rescaled to
/// unit RMS before training; the returned estimator carries those scales.
pub fn fit_erm(
    dataset: &Dataset,
    base: &ClfContext,
    cfg: &TrainingConfig,
    rng: &mut RngStream,
) -> Result<(ResidualEstimator, TrainingReport)> {
    let rows = prepare_rows(dataset, base)?;
    fit_rows(&rows, base.model.inputs(), cfg, rng)
}

/// [`fit_erm`] on rows that are already prepared.
pub fn fit_rows(
    rows: &[ErmRow],
    inputs: usize,
    cfg: &TrainingConfig,
    rng: &mut RngStream,
) -> Result<(ResidualEstimator, TrainingReport)> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot fit an estimator to an empty dataset".into()));
    }
    let n_features = rows[0].features.len();
    let scaler = Standardizer::fit(rows.iter().map(|r| r.features.as_slice()), n_features);
    let input_scale = rms(rows.iter().flat_map(|r| r.u.iter().copied()));
    let residual_scale = rms(rows.iter().map(|r| r.target - r.base));

    let xs: Vec<Vec<f64>> = rows.iter().map(|r| scaler.apply(&r.features)).collect();
    let us: Vec<Vec<f64>> = rows.iter().map(|r| r.u.iter().map(|v| v / input_scale).collect()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.target - r.base) / residual_scale).collect();

    let mut init_rng = rng.split("init");
    let mut estimator = ResidualEstimator {
        a_net: Mlp::he_init(n_features, cfg.hidden, inputs, &mut init_rng),
        b_net: Mlp::he_init(n_features, cfg.hidden, 1, &mut init_rng),
        features: scaler,
        input_scale,
        residual_scale,
    };
    let initial_loss = empirical_risk(&estimator, rows);

    let a_len = estimator.a_net.params().len();
    let b_len = estimator.b_net.params().len();
    let mut params: Vec<f64> = estimator.a_net.params().iter().chain(estimator.b_net.params()).copied().collect();
    let mut grads = vec![0.0; a_len + b_len];
    let mut adam = Adam::new(cfg, a_len + b_len);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut shuffle_rng = rng.split("batches");
    let mut cache_a = MlpCache::default();
    let mut cache_b = MlpCache::default();
    let mut upstream_a = vec![0.0; inputs];
    let scale2 = residual_scale * residual_scale;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut last_loss = initial_loss;

    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill(0.0);
            let inv = 1.0 / batch.len() as f64;
            let (ga, gb) = grads.split_at_mut(a_len);
            for &i in batch {
                estimator.a_net.forward_cached(&xs[i], &mut cache_a);
                estimator.b_net.forward_cached(&xs[i], &mut cache_b);
                let pred: f64 =
                    cache_a.out.iter().zip(&us[i]).map(|(a, u)| a * u).sum::<f64>() + cache_b.out[0];
                let err = pred - ys[i];
                epoch_sum += err * err;
                let g = 2.0 * err * inv;
                for (ua, &u) in upstream_a.iter_mut().zip(&us[i]) {
                    *ua = g * u;
                }
                estimator.a_net.accumulate_gradients(&xs[i], &mut cache_a, &upstream_a, ga);
                estimator.b_net.accumulate_gradients(&xs[i], &mut cache_b, &[g], gb);
            }
            adam.step(&mut params, &grads);
            estimator.a_net.params_mut().copy_from_slice(&params[..a_len]);
            estimator.b_net.params_mut().copy_from_slice(&params[a_len..]);
        }
        let loss = epoch_sum / rows.len() as f64 * scale2;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, last_loss });
        }
        last_loss = loss;
        epoch_losses.push(loss);
    }

    let final_loss = empirical_risk(&estimator, rows);
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: cfg.epochs, last_loss });
    }
    Ok((estimator, TrainingReport { initial_loss, final_loss, epoch_losses }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    /// Rows generated by known smooth residuals with zero noise.
    fn synthetic_rows(n: usize, rng: &mut RngStream) -> Vec<ErmRow> {
        (0..n)
            .map(|_| {
                let f: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let u = rng.uniform(-2.0, 2.0);
                let a = 0.5 * f[0] - 0.3 * f[1];
                let b = 0.2 * f[2] + 0.1 * f[0].max(0.0);
                let base = 0.7 * f[1];
                ErmRow { features: f, u: dvector![u], base, target: base + a * u + b }
            })
            .collect()
    }

    #[test]
    fn risk_matches_independent_sum() {
        let mut rng = RngStream::new(4);
        let rows = synthetic_rows(50, &mut rng);
        let est = ResidualEstimator {
            a_net: Mlp::he_init(3, 5, 1, &mut rng),
            b_net: Mlp::he_init(3, 5, 1, &mut rng),
            features: Standardizer::identity(3),
            input_scale: 1.0,
            residual_scale: 1.0,
        };
        let mut manual = 0.0;
        for r in &rows {
            let a = est.a_net.forward(&r.features)[0];
            let b = est.b_net.forward(&r.features)[0];
            manual += (r.base + a * r.u[0] + b - r.target).powi(2);
        }
        manual /= rows.len() as f64;
        assert!((empirical_risk(&est, &rows) - manual).abs() <= 1e-12);
    }

    #[test]
    fn recovers_synthetic_residuals() {
        let mut rng = RngStream::new(9);
        let rows = synthetic_rows(1000, &mut rng);
        let cfg = TrainingConfig { hidden: 32, epochs: 300, learning_rate: 3e-3, ..Default::default() };
        let (_, report) = fit_rows(&rows, 1, &cfg, &mut RngStream::new(1)).unwrap();
        assert!(report.final_loss <= 1e-4, "{}", report.final_loss);
        assert!(report.final_loss <= report.initial_loss);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = RngStream::new(9);
        let rows = synthetic_rows(200, &mut rng);
        let cfg = TrainingConfig { hidden: 8, epochs: 5, ..Default::default() };
        let (a, _) = fit_rows(&rows, 1, &cfg, &mut RngStream::new(3)).unwrap();
        let (b, _) = fit_rows(&rows, 1, &cfg, &mut RngStream::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let cfg = TrainingConfig::default();
        assert!(fit_rows(&[], 1, &cfg, &mut RngStream::new(0)).is_err());
        assert!(TrainingConfig { batch_size: 0, ..cfg }.validate().is_err());
    }
}

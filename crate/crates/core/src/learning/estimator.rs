use std::sync::Arc;

use super::Mlp;
use crate::clf::{Clf, ClfContext, VdotAffine};
use crate::controllers::DerivativeEstimate;
use crate::error::Result;
use crate::numerics::Vector;

/// Model inputs: all states followed by the Lyapunov gradient, `(q, q̇, ∂V/∂η)`.
pub fn features(q: &Vector, qd: &Vector, eta: &Vector, clf: &Clf) -> Vec<f64> {
    let grad = clf.gradient(eta);
    q.iter().chain(qd.iter()).chain(grad.iter()).copied().collect()
}

/// Per-coordinate affine normalization `(x − mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Column means and standard deviations; near-constant columns keep unit scale.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Self {
        let n = rows.clone().count().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows.clone() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v.sqrt() > 1e-8 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// Learned residuals `â(·)`, `b̂(·)` and the normalization they were trained in.
///
/// The networks see standardized features and predict residuals in units of
/// `residual_scale` (and `residual_scale / input_scale` for `â`).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEstimator {
    pub a_net: Mlp,
    pub b_net: Mlp,
    pub features: Standardizer,
    pub input_scale: f64,
    pub residual_scale: f64,
}

impl ResidualEstimator {
    /// `â ≡ 0`, `b̂ ≡ 0`.
    pub fn zero(n_features: usize, inputs: usize, hidden: usize) -> Self {
        Self {
            a_net: Mlp::zeros(n_features, hidden, inputs),
            b_net: Mlp::zeros(n_features, hidden, 1),
            features: Standardizer::identity(n_features),
            input_scale: 1.0,
            residual_scale: 1.0,
        }
    }

    pub fn inputs(&self) -> usize {
        self.a_net.outputs()
    }

    /// `(â, b̂)` at raw features.
    pub fn residuals(&self, features: &[f64]) -> (Vector, f64) {
        let z = self.features.apply(features);
        let a = Vector::from_vec(self.a_net.forward(&z)) * (self.residual_scale / self.input_scale);
        let b = self.b_net.forward(&z)[0] * self.residual_scale;
        (a, b)
    }

    /// `Ŵ̇ = V̂̇ + âᵀu + b̂` as an affine decomposition in `u`.
    pub fn augment(&self, base: &VdotAffine, features: &[f64]) -> VdotAffine {
        let (a, b) = self.residuals(features);
        VdotAffine { drift: base.drift + b, coeff: &base.coeff + a }
    }
}

/// The learned derivative estimate `Ŵ̇` on top of a model-based context.
#[derive(Clone)]
pub struct LearnedDerivative {
    pub ctx: ClfContext,
    pub estimator: Arc<ResidualEstimator>,
}

impl DerivativeEstimate for LearnedDerivative {
    fn context(&self) -> &ClfContext {
        &self.ctx
    }

    fn estimate(&self, q: &Vector, qd: &Vector, t: f64) -> Result<VdotAffine> {
        let base = self.ctx.vdot_affine(q, qd, t)?;
        let eta = self.ctx.error_state(q, qd, t);
        Ok(self.estimator.augment(&base, &features(q, qd, &eta, &self.ctx.clf)))
    }
}

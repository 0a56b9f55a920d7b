use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{solve_qp, Controller, DerivativeEstimate, QpProblem, TickDiagnostics};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Floor on the slack curvature so the QP stays strictly convex when the
/// input coefficient of the learned derivative vanishes (η → 0).
const SLACK_CURVATURE_FLOOR: f64 = 1e-9;

/// Weights of the augmenting QP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationConfig {
    /// Decrease rate; `None` uses the CLF's `c₃`.
    pub c3: Option<f64>,
    /// `C̄`, scales the slack penalty `½C̄‖coeff‖²δ²`.
    pub slack_weight: f64,
    /// `R̄`, scales the smoothing penalty `R̄‖u′ − u_prev‖²`.
    pub smoothing_weight: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self { c3: None, slack_weight: 1e14, smoothing_weight: 0.1 }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slack_weight > 0.0 && self.slack_weight.is_finite()) {
            return Err(Error::InvalidInput(format!("slack weight must be positive, got {}", self.slack_weight)));
        }
        if !(self.smoothing_weight >= 0.0 && self.smoothing_weight.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "smoothing weight must be nonnegative, got {}",
                self.smoothing_weight
            )));
        }
        if let Some(c3) = self.c3 {
            if !(c3 > 0.0 && c3.is_finite()) {
                return Err(Error::InvalidInput(format!("c3 must be positive, got {c3}")));
            }
        }
        Ok(())
    }
}

/// Result of one augmenting QP.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    pub u_aug: Vector,
    pub slack: f64,
}

/// `u = u_nom + w·u′` where `u′` solves
///
/// ```text
/// min  ½‖u_nom + u′‖² + R̄‖u′ − u_prev‖² + ½C̄‖coeff‖²δ²
/// s.t. Ŵ̇(η, q, q̇, u_nom + u′) ≤ −c₃‖η‖² + δ,   δ ≥ 0
/// ```
///
/// with `coeff` the input coefficient of `Ŵ̇`. Carries `u_prev` between ticks,
/// so one instance serves one control loop.
pub struct AugmentingController {
    nominal: Box<dyn Controller + Send>,
    estimate: Arc<dyn DerivativeEstimate>,
    cfg: AugmentationConfig,
    trust: f64,
    u_prev: Vector,
    last: TickDiagnostics,
}

impl AugmentingController {
    pub fn new(
        nominal: Box<dyn Controller + Send>,
        estimate: Arc<dyn DerivativeEstimate>,
        cfg: AugmentationConfig,
        trust: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(0.0..=1.0).contains(&trust) {
            return Err(Error::InvalidInput(format!("trust must lie in [0, 1], got {trust}")));
        }
        let m = estimate.context().model.inputs();
        Ok(Self { nominal, estimate, cfg, trust, u_prev: Vector::zeros(m), last: TickDiagnostics::default() })
    }

    pub fn trust(&self) -> f64 {
        self.trust
    }

    pub fn previous_augmentation(&self) -> &Vector {
        &self.u_prev
    }

    /// Solves the augmenting QP around `u_nom` without touching controller state.
    pub fn augment(&self, u_nom: &Vector, q: &Vector, qd: &Vector, t: f64) -> Result<Augmentation> {
        let ctx = self.estimate.context();
        let m = u_nom.len();
        let d = self.estimate.estimate(q, qd, t)?;
        let eta = ctx.error_state(q, qd, t);
        let c3 = self.cfg.c3.unwrap_or_else(|| ctx.clf.c3());
        let bound = -c3 * eta.norm_squared();
        let r = self.cfg.smoothing_weight;

        let mut cost = Matrix::zeros(m + 1, m + 1);
        cost.view_mut((0, 0), (m, m)).fill_with_identity();
        cost.view_mut((0, 0), (m, m)).scale_mut(1.0 + 2.0 * r);
        cost[(m, m)] = (self.cfg.slack_weight * d.coeff.norm_squared()).max(SLACK_CURVATURE_FLOOR);
        let mut linear = Vector::zeros(m + 1);
        linear.rows_mut(0, m).copy_from(&(u_nom - &self.u_prev * (2.0 * r)));

        let mut constraints = Matrix::zeros(2, m + 1);
        constraints.view_mut((0, 0), (1, m)).copy_from(&d.coeff.transpose());
        constraints[(0, m)] = -1.0;
        constraints[(1, m)] = -1.0;
        let bounds = Vector::from_vec(vec![bound - d.drift - d.coeff.dot(u_nom), 0.0]);

        let problem = QpProblem {
            cost,
            linear,
            constant: 0.5 * u_nom.norm_squared() + r * self.u_prev.norm_squared(),
            constraints,
            bounds,
        };
        let sol = solve_qp(&problem)?;
        Ok(Augmentation { u_aug: sol.z.rows(0, m).into_owned(), slack: sol.z[m].max(0.0) })
    }
}

impl Controller for AugmentingController {
    fn control(&mut self, q: &Vector, qd: &Vector, t: f64) -> Vector {
        let u_nom = self.nominal.control(q, qd, t);
        match self.augment(&u_nom, q, qd, t) {
            Ok(aug) if aug.u_aug.iter().all(|v| v.is_finite()) => {
                self.last = TickDiagnostics { constraint_slack: aug.slack, fallback: false };
                let u = &u_nom + &aug.u_aug * self.trust;
                self.u_prev = aug.u_aug;
                u
            }
            _ => {
                self.last = TickDiagnostics { constraint_slack: 0.0, fallback: true };
                u_nom
            }
        }
    }

    fn diagnostics(&self) -> TickDiagnostics {
        self.last
    }

    fn reset(&mut self) {
        self.nominal.reset();
        self.u_prev.fill(0.0);
        self.last = TickDiagnostics::default();
    }
}

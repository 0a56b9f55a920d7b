use std::sync::Arc;

use super::{Clf, TrackingProblem};
use crate::dynamics::{Controller, RoboticModel, TickDiagnostics};
use crate::error::{Error, Result};
use crate::numerics::{lu_solve, sym_eig_bounds, Matrix, Vector};

/// Conditioning floor on the decoupling matrix `g̃ g̃ᵀ` (squared singular value).
const DECOUPLING_TOLERANCE: f64 = 1e-8;

/// `V̇(η, u) = drift + coeffᵀ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct VdotAffine {
    pub drift: f64,
    pub coeff: Vector,
}

impl VdotAffine {
    pub fn eval(&self, u: &Vector) -> f64 {
        self.drift + self.coeff.dot(u)
    }
}

/// A model, the outputs it should track, and the CLF built for them.
#[derive(Clone)]
pub struct ClfContext {
    pub model: Arc<dyn RoboticModel>,
    pub tracking: Arc<TrackingProblem>,
    pub clf: Arc<Clf>,
}

impl ClfContext {
    pub fn new(model: Arc<dyn RoboticModel>, tracking: Arc<TrackingProblem>, clf: Arc<Clf>) -> Result<Self> {
        let k = tracking.k();
        if clf.k() != k {
            return Err(Error::Dimension(format!(
                "CLF built for {} outputs, tracking problem has {k}",
                clf.k()
            )));
        }
        if k > model.inputs() {
            return Err(Error::Dimension(format!(
                "{k} outputs cannot be linearized with {} inputs",
                model.inputs()
            )));
        }
        Ok(Self { model, tracking, clf })
    }

    /// Same tracking problem and CLF evaluated against another model.
    pub fn with_model(&self, model: Arc<dyn RoboticModel>) -> Self {
        Self { model, tracking: self.tracking.clone(), clf: self.clf.clone() }
    }

    pub fn error_state(&self, q: &Vector, qd: &Vector, t: f64) -> Vector {
        self.tracking.error_state(q, qd, t)
    }

    /// `(f̃, g̃)` with `ÿ = f̃ + g̃ u`.
    pub fn output_dynamics(&self, q: &Vector, qd: &Vector) -> Result<(Vector, Matrix)> {
        output_dynamics(self.model.as_ref(), &self.tracking, q, qd)
    }

    /// Stacked `(f, g)` with `d/dt (y − y_d, ẏ − ẏ_d) = f − ṙ + g u`.
    pub fn stacked_dynamics(&self, q: &Vector, qd: &Vector) -> Result<(Vector, Matrix)> {
        stacked_dynamics(self.model.as_ref(), &self.tracking, q, qd)
    }

    /// Affine decomposition of `V̇` under this context's model.
    pub fn vdot_affine(&self, q: &Vector, qd: &Vector, t: f64) -> Result<VdotAffine> {
        let eta = self.error_state(q, qd, t);
        let grad = self.clf.gradient(&eta);
        let (f, g) = self.stacked_dynamics(q, qd)?;
        let drift = grad.dot(&(f - self.tracking.reference_rate(t)));
        let coeff = g.tr_mul(&grad);
        Ok(VdotAffine { drift, coeff })
    }

    /// Input-output linearizing input `g̃†(−f̃ + ÿ_d − Kη)`.
    pub fn io_lin_input(&self, q: &Vector, qd: &Vector, t: f64) -> Result<Vector> {
        let (f_tilde, g_tilde) = self.output_dynamics(q, qd)?;
        let eta = self.error_state(q, qd, t);
        let (_, _, yd_ddot) = self.tracking.desired.evaluate(t);
        let nu = -(self.clf.gain() * &eta);
        let target = -f_tilde + yd_ddot + nu;
        right_pseudo_inverse_apply(&g_tilde, &target)
    }

    /// Residuals `(a, b)` of the true model relative to this one:
    /// `V̇_true(η, u) = V̇_this(η, u) + aᵀu + b`.
    pub fn true_residuals(&self, truth: &dyn RoboticModel, q: &Vector, qd: &Vector, t: f64) -> Result<(Vector, f64)> {
        let eta = self.error_state(q, qd, t);
        let grad = self.clf.gradient(&eta);
        let (f_hat, g_hat) = self.stacked_dynamics(q, qd)?;
        let (f, g) = stacked_dynamics(truth, &self.tracking, q, qd)?;
        let a = (g - g_hat).tr_mul(&grad);
        let b = grad.dot(&(f - f_hat));
        Ok((a, b))
    }
}

fn output_dynamics(
    model: &dyn RoboticModel,
    tracking: &TrackingProblem,
    q: &Vector,
    qd: &Vector,
) -> Result<(Vector, Matrix)> {
    let out = &tracking.output;
    let m = model.inputs();
    let mut rhs = Matrix::zeros(model.dof(), 1 + m);
    rhs.set_column(0, &model.drift(q, qd));
    rhs.columns_mut(1, m).copy_from(&model.actuation());
    let projected = out.jacobian(q) * model.inertia_solve(q, &rhs)?;
    let f_tilde = out.rate_jacobian(q, qd) * qd - projected.column(0);
    let g_tilde = projected.columns(1, m).into_owned();
    Ok((f_tilde, g_tilde))
}

fn stacked_dynamics(
    model: &dyn RoboticModel,
    tracking: &TrackingProblem,
    q: &Vector,
    qd: &Vector,
) -> Result<(Vector, Matrix)> {
    let k = tracking.k();
    let m = model.inputs();
    let (f_tilde, g_tilde) = output_dynamics(model, tracking, q, qd)?;
    let mut f = Vector::zeros(2 * k);
    f.rows_mut(0, k).copy_from(&(tracking.output.jacobian(q) * qd));
    f.rows_mut(k, k).copy_from(&f_tilde);
    let mut g = Matrix::zeros(2 * k, m);
    g.view_mut((k, 0), (k, m)).copy_from(&g_tilde);
    Ok((f, g))
}

/// `g̃ᵀ (g̃ g̃ᵀ)⁻¹ v` for a full-row-rank `g̃`.
fn right_pseudo_inverse_apply(g_tilde: &Matrix, v: &Vector) -> Result<Vector> {
    let gram = g_tilde * g_tilde.transpose();
    let (smallest, _) = sym_eig_bounds(&gram)?;
    if !(smallest > DECOUPLING_TOLERANCE * DECOUPLING_TOLERANCE) {
        return Err(Error::RelativeDegree(smallest.max(0.0).sqrt()));
    }
    let z = lu_solve(&gram, v).map_err(|_| Error::RelativeDegree(smallest.sqrt()))?;
    Ok(g_tilde.tr_mul(&z))
}

/// Feedback-linearizing controller `u = g̃†(−f̃ + ÿ_d − Kη)` on a model.
pub struct IoLinController {
    ctx: ClfContext,
    failed: bool,
}

impl IoLinController {
    pub fn new(ctx: ClfContext) -> Self {
        Self { ctx, failed: false }
    }
}

impl Controller for IoLinController {
    fn control(&mut self, q: &Vector, qd: &Vector, t: f64) -> Vector {
        match self.ctx.io_lin_input(q, qd, t) {
            Ok(u) => {
                self.failed = false;
                u
            }
            Err(_) => {
                self.failed = true;
                Vector::from_element(self.ctx.model.inputs(), f64::NAN)
            }
        }
    }

    fn diagnostics(&self) -> TickDiagnostics {
        TickDiagnostics { constraint_slack: 0.0, fallback: self.failed }
    }
}

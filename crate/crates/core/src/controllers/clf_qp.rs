use std::sync::Arc;

use super::{solve_qp, Controller, DerivativeEstimate, QpProblem, TickDiagnostics};
use crate::error::{Error, Result};
use crate::numerics::{is_positive_definite, Matrix, Vector};

/// Ridge added to a singular cost matrix so the QP stays strictly convex.
const COST_RIDGE: f64 = 1e-9;

/// Quadratic cost `½uᵀMu + sᵀu + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpCost {
    pub m: Matrix,
    pub s: Vector,
    pub r: f64,
}

impl QpCost {
    pub fn min_norm(inputs: usize) -> Self {
        Self { m: Matrix::identity(inputs, inputs), s: Vector::zeros(inputs), r: 0.0 }
    }
}

/// `argmin ½uᵀMu + sᵀu + r  s.t.  V̇(η, u) ≤ −c₃‖η‖²`.
pub struct ClfQpController {
    estimate: Arc<dyn DerivativeEstimate>,
    cost: QpCost,
    last: TickDiagnostics,
}

impl ClfQpController {
    pub fn new(estimate: Arc<dyn DerivativeEstimate>, mut cost: QpCost) -> Result<Self> {
        let m = estimate.context().model.inputs();
        if cost.m.shape() != (m, m) || cost.s.len() != m {
            return Err(Error::Dimension(format!("QP cost must be sized for {m} inputs")));
        }
        if (&cost.m - cost.m.transpose()).amax() > 1e-12 * cost.m.amax().max(1.0) {
            return Err(Error::NotSymmetric((&cost.m - cost.m.transpose()).amax()));
        }
        if !is_positive_definite(&cost.m) {
            cost.m += Matrix::identity(m, m) * COST_RIDGE;
            if !is_positive_definite(&cost.m) {
                return Err(Error::InvalidInput("QP cost matrix must be positive semi-definite".into()));
            }
        }
        Ok(Self { estimate, cost, last: TickDiagnostics::default() })
    }

    pub fn min_norm(estimate: Arc<dyn DerivativeEstimate>) -> Self {
        let m = estimate.context().model.inputs();
        Self::new(estimate, QpCost::min_norm(m)).expect("identity cost is valid")
    }

    /// Solves one tick; returns the input and whether the constraint could be met.
    pub fn solve(&self, q: &Vector, qd: &Vector, t: f64) -> Result<(Vector, bool)> {
        let ctx = self.estimate.context();
        let d = self.estimate.estimate(q, qd, t)?;
        let eta = ctx.error_state(q, qd, t);
        let bound = -ctx.clf.c3() * eta.norm_squared();
        let problem = QpProblem {
            cost: self.cost.m.clone(),
            linear: self.cost.s.clone(),
            constant: self.cost.r,
            constraints: Matrix::from_row_slice(1, d.coeff.len(), d.coeff.as_slice()),
            bounds: Vector::from_element(1, bound - d.drift),
        };
        match solve_qp(&problem) {
            Ok(sol) => Ok((sol.z, true)),
            Err(Error::QpInfeasible) => {
                let unconstrained = QpProblem::unconstrained(problem.cost, problem.linear);
                Ok((solve_qp(&unconstrained)?.z, false))
            }
            Err(e) => Err(e),
        }
    }
}

impl Controller for ClfQpController {
    fn control(&mut self, q: &Vector, qd: &Vector, t: f64) -> Vector {
        match self.solve(q, qd, t) {
            Ok((u, feasible)) => {
                let ctx = self.estimate.context();
                let violation = self
                    .estimate
                    .estimate(q, qd, t)
                    .map(|d| d.eval(&u) + ctx.clf.c3() * ctx.error_state(q, qd, t).norm_squared())
                    .unwrap_or(0.0);
                self.last = TickDiagnostics { constraint_slack: violation.max(0.0), fallback: !feasible };
                u
            }
            Err(_) => {
                self.last = TickDiagnostics { constraint_slack: 0.0, fallback: true };
                Vector::from_element(self.cost.s.len(), f64::NAN)
            }
        }
    }

    fn diagnostics(&self) -> TickDiagnostics {
        self.last
    }
}

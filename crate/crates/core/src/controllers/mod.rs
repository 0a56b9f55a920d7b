//! Quadratic programs and the controllers built on them.

mod augment;
mod clf_qp;
mod pd;
mod qp;


pub use augment::{Augmentation, AugmentationConfig, AugmentingController};
pub use clf_qp::{ClfQpController, QpCost};
pub use pd::PdController;
pub use qp::{kkt_residuals, solve_qp, KktResiduals, QpProblem, QpSolution};

pub use crate::dynamics::{Controller, TickDiagnostics};

use crate::clf::{ClfContext, VdotAffine};
use crate::error::Result;
use crate::numerics::Vector;

/// An estimate of `V̇` that is affine in the input.
pub trait DerivativeEstimate: Send + Sync {
    fn context(&self) -> &ClfContext;

    fn estimate(&self, q: &Vector, qd: &Vector, t: f64) -> Result<VdotAffine>;
}

/// The model-based estimate `V̂̇` itself.
impl DerivativeEstimate for ClfContext {
    fn context(&self) -> &ClfContext {
        self
    }

    fn estimate(&self, q: &Vector, qd: &Vector, t: f64) -> Result<VdotAffine> {
        self.vdot_affine(q, qd, t)
    }
}

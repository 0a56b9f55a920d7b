//! Output-error coordinates, input-output linearization and the quadratic
//! control Lyapunov function built from the closed-loop output dynamics.

mod context;
mod lyapunov;
mod tracking;

pub use context::{ClfContext, IoLinController, VdotAffine};
pub use lyapunov::{Clf, ClfGains};
pub use tracking::{CoordinateOutput, DesiredTrajectory, OutputMap, SmoothSine, TrackingProblem};

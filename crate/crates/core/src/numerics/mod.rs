//! Small dense linear algebra, fixed-step integration, finite differencing and
//! reproducible random streams.

mod diff;
mod linalg;
mod ode;
mod rng;

pub use diff::central_difference;
pub use linalg::{
    is_positive_definite, kron, lu_solve, solve_ctle, sym_eig_bounds, sym_eigenvalues, Matrix,
    Vector, PIVOT_TOLERANCE,
};
pub use ode::rk4_step;
pub use rng::RngStream;

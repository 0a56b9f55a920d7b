//! Episodic learning of the uncertain part of a control Lyapunov function's
//! time derivative, and quadratic-program controllers that use it.
//!
//! The pieces, bottom-up:
//!
//! * [`numerics`]: dense solves, the Lyapunov equation, Jacobi eigenvalues, RK4.
//! * [`dynamics`]: affine robotic models, the planar Segway, simulation.
//! * [`clf`]: output coordinates, feedback linearization and the quadratic CLF.
//! * [`controllers`]: active-set QP, PD, CLF-QP and the augmenting controller.
//! * [`learning`]: two-layer ReLU residual models fit by empirical risk minimization.
//! * [`episodic`]: the data-aggregation loop and its evaluation metrics.

pub mod clf;
pub mod controllers;
pub mod dynamics;
pub mod episodic;
pub mod error;
pub mod learning;
pub mod numerics;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream, Vector};

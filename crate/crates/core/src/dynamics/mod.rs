//! Affine robotic systems `D(q) q̈ + H(q, q̇) = B u`, the planar Segway, and
//! zero-order-hold closed-loop simulation.

mod segway;
mod sim;

pub use segway::{perturb_params, Segway, SegwayParams};
pub use sim::{simulate, Controller, SimulationSettings, StateTrajectory, TickDiagnostics};

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// A mechanical system whose dynamics are affine in the input.
///
/// `drift` is `H(q, q̇) = C(q, q̇) q̇ + G(q) + R(q, q̇)` where `R` collects
/// velocity-dependent forces that are not derived from the inertia (motor
/// back-EMF, viscous losses). Models without such terms keep the default.
pub trait RoboticModel: Send + Sync {
    /// Configuration dimension `n`.
    fn dof(&self) -> usize;
    /// Input dimension `m`.
    fn inputs(&self) -> usize;
    fn inertia(&self, q: &Vector) -> Matrix;
    /// Coriolis/centrifugal matrix built from the Christoffel symbols of `inertia`.
    fn coriolis(&self, q: &Vector, qd: &Vector) -> Matrix;
    fn gravity(&self, q: &Vector) -> Vector;
    fn actuation(&self) -> Matrix;

    fn dissipation(&self, _q: &Vector, qd: &Vector) -> Vector {
        Vector::zeros(qd.len())
    }

    fn drift(&self, q: &Vector, qd: &Vector) -> Vector {
        self.coriolis(q, qd) * qd + self.gravity(q) + self.dissipation(q, qd)
    }

    /// `q̈ = D(q)⁻¹ (B u − H(q, q̇))`.
    fn forward_dynamics(&self, q: &Vector, qd: &Vector, u: &Vector) -> Result<Vector> {
        if q.len() != self.dof() || qd.len() != self.dof() || u.len() != self.inputs() {
            return Err(Error::Dimension(format!(
                "forward dynamics expects (q, q̇, u) of sizes ({}, {}, {}), got ({}, {}, {})",
                self.dof(),
                self.dof(),
                self.inputs(),
                q.len(),
                qd.len(),
                u.len()
            )));
        }
        let chol = Cholesky::new(self.inertia(q)).ok_or(Error::NotPositiveDefinite)?;
        Ok(chol.solve(&(self.actuation() * u - self.drift(q, qd))))
    }

    /// `D(q)⁻¹ M` for a matrix right-hand side.
    fn inertia_solve(&self, q: &Vector, rhs: &Matrix) -> Result<Matrix> {
        let chol = Cholesky::new(self.inertia(q)).ok_or(Error::NotPositiveDefinite)?;
        Ok(chol.solve(rhs))
    }
}

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Outputs `y(q)` with relative degree two.
pub trait OutputMap: Send + Sync {
    fn dim(&self) -> usize;
    fn output(&self, q: &Vector) -> Vector;
    /// `∂y/∂q`, k×n.
    fn jacobian(&self, q: &Vector) -> Matrix;
    /// `∂ẏ/∂q` where `ẏ = (∂y/∂q) q̇`, k×n.
    fn rate_jacobian(&self, q: &Vector, qd: &Vector) -> Matrix;
}

/// Desired outputs `y_d(t)` with two derivatives.
pub trait DesiredTrajectory: Send + Sync {
    fn dim(&self) -> usize;
    /// `(y_d, ẏ_d, ÿ_d)` at time `t`.
    fn evaluate(&self, t: f64) -> (Vector, Vector, Vector);
}

/// `y = q[index]`.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateOutput {
    pub index: usize,
    pub dof: usize,
}

impl OutputMap for CoordinateOutput {
    fn dim(&self) -> usize {
        1
    }

    fn output(&self, q: &Vector) -> Vector {
        Vector::from_element(1, q[self.index])
    }

    fn jacobian(&self, _q: &Vector) -> Matrix {
        let mut j = Matrix::zeros(1, self.dof);
        j[(0, self.index)] = 1.0;
        j
    }

    fn rate_jacobian(&self, _q: &Vector, _qd: &Vector) -> Matrix {
        Matrix::zeros(1, self.dof)
    }
}

/// `A sin(ωt) s(t)` with the cubic smooth-start window
/// `s(t) = min(1, τ²(3 − 2τ))`, `τ = t / t_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothSine {
    /// rad
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    /// Ramp-up time, s.
    pub ramp: f64,
}

impl Default for SmoothSine {
    fn default() -> Self {
        Self { amplitude: 0.15, frequency: 1.0, ramp: 1.0 }
    }
}

impl SmoothSine {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.frequency.is_finite()) {
            return Err(Error::InvalidInput("trajectory amplitude and frequency must be finite".into()));
        }
        if !(self.ramp > 0.0) {
            return Err(Error::InvalidInput(format!("ramp time must be positive, got {}", self.ramp)));
        }
        Ok(())
    }

    fn window(&self, t: f64) -> (f64, f64, f64) {
        let tau = t / self.ramp;
        if tau >= 1.0 {
            (1.0, 0.0, 0.0)
        } else if tau <= 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let s = tau * tau * (3.0 - 2.0 * tau);
            let ds = 6.0 * tau * (1.0 - tau) / self.ramp;
            let dds = (6.0 - 12.0 * tau) / (self.ramp * self.ramp);
            (s, ds, dds)
        }
    }

    pub fn eval_scalar(&self, t: f64) -> (f64, f64, f64) {
        let (a, w) = (self.amplitude, self.frequency);
        let (s, ds, dds) = self.window(t);
        let (sn, cs) = (w * t).sin_cos();
        let y = a * sn * s;
        let dy = a * (w * cs * s + sn * ds);
        let ddy = a * (-w * w * sn * s + 2.0 * w * cs * ds + sn * dds);
        (y, dy, ddy)
    }
}

impl DesiredTrajectory for SmoothSine {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, t: f64) -> (Vector, Vector, Vector) {
        let (y, dy, ddy) = self.eval_scalar(t);
        (Vector::from_element(1, y), Vector::from_element(1, dy), Vector::from_element(1, ddy))
    }
}

/// Outputs to regulate, what they should follow, and over which interval.
#[derive(Clone)]
pub struct TrackingProblem {
    pub output: Arc<dyn OutputMap>,
    pub desired: Arc<dyn DesiredTrajectory>,
    pub t0: f64,
    pub tf: f64,
}

impl TrackingProblem {
    pub fn new(
        output: Arc<dyn OutputMap>,
        desired: Arc<dyn DesiredTrajectory>,
        t0: f64,
        tf: f64,
    ) -> Result<Self> {
        if output.dim() != desired.dim() {
            return Err(Error::Dimension(format!(
                "output dimension {} differs from desired trajectory dimension {}",
                output.dim(),
                desired.dim()
            )));
        }
        if !(tf > t0) {
            return Err(Error::InvalidInput(format!("tracking interval [{t0}, {tf}] is empty")));
        }
        Ok(Self { output, desired, t0, tf })
    }

    /// Output dimension `k`.
    pub fn k(&self) -> usize {
        self.output.dim()
    }

    /// `η = (y − y_d, ẏ − ẏ_d)`.
    pub fn error_state(&self, q: &Vector, qd: &Vector, t: f64) -> Vector {
        let k = self.k();
        let (yd, yd_dot, _) = self.desired.evaluate(t);
        let y = self.output.output(q);
        let y_dot = self.output.jacobian(q) * qd;
        let mut eta = Vector::zeros(2 * k);
        eta.rows_mut(0, k).copy_from(&(y - yd));
        eta.rows_mut(k, k).copy_from(&(y_dot - yd_dot));
        eta
    }

    /// `ṙ = (ẏ_d, ÿ_d)`.
    pub fn reference_rate(&self, t: f64) -> Vector {
        let k = self.k();
        let (_, yd_dot, yd_ddot) = self.desired.evaluate(t);
        let mut r = Vector::zeros(2 * k);
        r.rows_mut(0, k).copy_from(&yd_dot);
        r.rows_mut(k, k).copy_from(&yd_ddot);
        r
    }
}

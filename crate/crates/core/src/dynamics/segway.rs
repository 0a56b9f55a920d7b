use nalgebra::{dmatrix, dvector};
use serde::{Deserialize, Serialize};

use super::RoboticModel;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream, Vector};

/// Physical parameters of the planar Segway.
///
/// The defaults are order-of-magnitude values for a Ninebot-class personal
/// transporter. Masses and inertias lump both wheels together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegwayParams {
    /// Combined wheel mass, kg.
    pub wheel_mass: f64,
    /// Body mass, kg.
    pub body_mass: f64,
    /// Combined wheel inertia about the axle, kg·m².
    pub wheel_inertia: f64,
    /// Body inertia about its center of mass, kg·m².
    pub body_inertia: f64,
    /// Wheel radius, m.
    pub wheel_radius: f64,
    /// Axle to body center of mass, m.
    pub com_distance: f64,
    /// Motor torque per volt, N·m/V.
    pub torque_constant: f64,
    /// Motor back-EMF, V·s/rad.
    pub back_emf: f64,
    /// m/s².
    pub gravity: f64,
}

impl Default for SegwayParams {
    fn default() -> Self {
        Self {
            wheel_mass: 2.5,
            body_mass: 44.8,
            wheel_inertia: 0.056,
            body_inertia: 3.6,
            wheel_radius: 0.195,
            com_distance: 0.17,
            torque_constant: 1.26,
            back_emf: 0.6,
            gravity: 9.81,
        }
    }
}

impl SegwayParams {
    fn fields(&self) -> [(&'static str, f64); 9] {
        [
            ("wheel_mass", self.wheel_mass),
            ("body_mass", self.body_mass),
            ("wheel_inertia", self.wheel_inertia),
            ("body_inertia", self.body_inertia),
            ("wheel_radius", self.wheel_radius),
            ("com_distance", self.com_distance),
            ("torque_constant", self.torque_constant),
            ("back_emf", self.back_emf),
            ("gravity", self.gravity),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.fields() {
            let admissible = if name == "back_emf" { value >= 0.0 } else { value > 0.0 };
            if !(value.is_finite() && admissible) {
                return Err(Error::InvalidInput(format!(
                    "segway parameter {name} must be finite and positive (back_emf may be zero), got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Largest relative deviation of any parameter from `nominal`.
    pub fn max_relative_change(&self, nominal: &SegwayParams) -> f64 {
        self.fields()
            .iter()
            .zip(nominal.fields().iter())
            .map(|((_, a), (_, b))| ((a - b) / b).abs())
            .fold(0.0, f64::max)
    }
}

/// Scales every parameter except gravity by an independent factor drawn
/// uniformly from `[1 - fraction, 1 + fraction]`.
pub fn perturb_params(p: &SegwayParams, fraction: f64, rng: &mut RngStream) -> Result<SegwayParams> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!(
            "perturbation fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let mut scale = |v: f64| v * rng.uniform(1.0 - fraction, 1.0 + fraction);
    let out = SegwayParams {
        wheel_mass: scale(p.wheel_mass),
        body_mass: scale(p.body_mass),
        wheel_inertia: scale(p.wheel_inertia),
        body_inertia: scale(p.body_inertia),
        wheel_radius: scale(p.wheel_radius),
        com_distance: scale(p.com_distance),
        torque_constant: scale(p.torque_constant),
        back_emf: scale(p.back_emf),
        gravity: p.gravity,
    };
    out.validate()?;
    Ok(out)
}

/// Planar wheeled inverted pendulum with `q = (x, θ)`.
///
/// `x` is the wheel travel (m), `θ` the body pitch from upright (rad, positive
/// leaning towards +x). A single voltage drives both motors; the motor applies
/// torque `K_t (u − K_b (θ̇ − ẋ/r))` to the body and its reaction to the
/// wheels.
#[derive(Debug, Clone, PartialEq)]
pub struct Segway {
    params: SegwayParams,
}

impl Segway {
    pub fn new(params: SegwayParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &SegwayParams {
        &self.params
    }

    /// Generalized force direction of the motor torque.
    fn motor_direction(&self) -> Vector {
        dvector![-1.0 / self.params.wheel_radius, 1.0]
    }

    /// Kinetic plus potential energy (zero potential at the axle height).
    pub fn energy(&self, q: &Vector, qd: &Vector) -> f64 {
        let p = &self.params;
        let kinetic = 0.5 * qd.dot(&(self.inertia(q) * qd));
        kinetic + p.body_mass * p.gravity * p.com_distance * q[1].cos()
    }
}

impl RoboticModel for Segway {
    fn dof(&self) -> usize {
        2
    }

    fn inputs(&self) -> usize {
        1
    }

    fn inertia(&self, q: &Vector) -> Matrix {
        let p = &self.params;
        let r = p.wheel_radius;
        let coupling = p.body_mass * p.com_distance * q[1].cos();
        dmatrix![
            p.wheel_mass + p.body_mass + p.wheel_inertia / (r * r), coupling;
            coupling, p.body_mass * p.com_distance * p.com_distance + p.body_inertia
        ]
    }

    fn coriolis(&self, q: &Vector, qd: &Vector) -> Matrix {
        // Only D₁₂ varies (with θ), so the single nonzero Christoffel term is
        // Γ₁₂₂ = ∂D₁₂/∂θ.
        let p = &self.params;
        dmatrix![
            0.0, -p.body_mass * p.com_distance * q[1].sin() * qd[1];
            0.0, 0.0
        ]
    }

    fn gravity(&self, q: &Vector) -> Vector {
        let p = &self.params;
        dvector![0.0, -p.body_mass * p.gravity * p.com_distance * q[1].sin()]
    }

    fn actuation(&self) -> Matrix {
        let dir = self.motor_direction() * self.params.torque_constant;
        Matrix::from_column_slice(2, 1, dir.as_slice())
    }

    fn dissipation(&self, _q: &Vector, qd: &Vector) -> Vector {
        let p = &self.params;
        let relative_rate = qd[1] - qd[0] / p.wheel_radius;
        self.motor_direction() * (p.torque_constant * p.back_emf * relative_rate)
    }
}

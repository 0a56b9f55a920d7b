use serde::{Deserialize, Serialize};

use super::RoboticModel;
use crate::error::{Error, Result};
use crate::numerics::{rk4_step, Vector};

/// Any state magnitude above this ends a simulation as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Per-tick controller bookkeeping recorded alongside the trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TickDiagnostics {
    /// How far the Lyapunov decrease constraint was relaxed at this tick.
    pub constraint_slack: f64,
    /// The controller fell back to its nominal input.
    pub fallback: bool,
}

/// State feedback `u(q, q̇, t)`, sampled once per control tick.
pub trait Controller {
    fn control(&mut self, q: &Vector, qd: &Vector, t: f64) -> Vector;

    fn diagnostics(&self) -> TickDiagnostics {
        TickDiagnostics::default()
    }

    /// Clears internal memory before a new rollout.
    fn reset(&mut self) {}
}

impl<F> Controller for F
where
    F: FnMut(&Vector, &Vector, f64) -> Vector,
{
    fn control(&mut self, q: &Vector, qd: &Vector, t: f64) -> Vector {
        self(q, qd, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    pub t0: f64,
    pub tf: f64,
    /// Control period; the input is held constant in between.
    pub dt_ctrl: f64,
    /// Integrator step, an integer divisor of `dt_ctrl`.
    pub dt_int: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self { t0: 0.0, tf: 10.0, dt_ctrl: 0.01, dt_int: 1e-3 }
    }
}

impl SimulationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tf > self.t0) {
            return Err(Error::InvalidInput(format!(
                "final time {} must exceed initial time {}",
                self.tf, self.t0
            )));
        }
        if !(self.dt_ctrl > 0.0 && self.dt_int > 0.0) {
            return Err(Error::InvalidInput("time steps must be positive".into()));
        }
        self.substeps()?;
        Ok(())
    }

    fn substeps(&self) -> Result<usize> {
        let ratio = self.dt_ctrl / self.dt_int;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps {
            return Err(Error::InvalidInput(format!(
                "control period {} is not an integer multiple of integrator step {}",
                self.dt_ctrl, self.dt_int
            )));
        }
        Ok(steps as usize)
    }

    pub fn ticks(&self) -> usize {
        ((self.tf - self.t0) / self.dt_ctrl).round() as usize
    }
}

/// States recorded at control ticks with the inputs held between them.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    /// Stacked `(q, q̇)` per tick.
    pub states: Vec<Vector>,
    /// `inputs[i]` is held on `[times[i], times[i + 1])`.
    pub inputs: Vec<Vector>,
    pub diagnostics: Vec<TickDiagnostics>,
    pub dt: f64,
    pub diverged: bool,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.states.first().map_or(0, |s| s.len() / 2)
    }

    pub fn q(&self, i: usize) -> Vector {
        self.states[i].rows(0, self.dof()).into_owned()
    }

    pub fn qd(&self, i: usize) -> Vector {
        let n = self.dof();
        self.states[i].rows(n, n).into_owned()
    }
}

/// Closed-loop rollout with a zero-order-hold controller and RK4 plant.
///
/// Divergence (a non-finite input or derivative, or a state component above
/// [`DIVERGENCE_BOUND`]) is reported through [`StateTrajectory::diverged`]
/// together with the prefix recorded so far.
pub fn simulate<M, C>(
    model: &M,
    controller: &mut C,
    q0: &Vector,
    qd0: &Vector,
    settings: &SimulationSettings,
) -> Result<StateTrajectory>
where
    M: RoboticModel + ?Sized,
    C: Controller + ?Sized,
{
    settings.validate()?;
    let n = model.dof();
    if q0.len() != n || qd0.len() != n {
        return Err(Error::Dimension(format!(
            "initial state must have {n} coordinates and rates"
        )));
    }
    let substeps = settings.substeps()?;
    let ticks = settings.ticks();
    let h = settings.dt_ctrl / substeps as f64;

    let mut state = Vector::zeros(2 * n);
    state.rows_mut(0, n).copy_from(q0);
    state.rows_mut(n, n).copy_from(qd0);

    let mut traj = StateTrajectory {
        times: vec![settings.t0],
        states: vec![state.clone()],
        inputs: Vec::with_capacity(ticks),
        diagnostics: Vec::with_capacity(ticks),
        dt: settings.dt_ctrl,
        diverged: false,
    };
    controller.reset();

    'ticks: for i in 0..ticks {
        let t = settings.t0 + i as f64 * settings.dt_ctrl;
        let q = state.rows(0, n).into_owned();
        let qd = state.rows(n, n).into_owned();
        let u = controller.control(&q, &qd, t);
        if u.len() != model.inputs() {
            return Err(Error::Dimension(format!(
                "controller returned {} inputs, model takes {}",
                u.len(),
                model.inputs()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            traj.diverged = true;
            break;
        }
        let diag = controller.diagnostics();

        for s in 0..substeps {
            let ts = t + s as f64 * h;
            let mut dynamics_failed = false;
            let field = |_: f64, x: &Vector| -> Vector {
                let q = x.rows(0, n).into_owned();
                let qd = x.rows(n, n).into_owned();
                match model.forward_dynamics(&q, &qd, &u) {
                    Ok(qdd) => {
                        let mut dx = Vector::zeros(2 * n);
                        dx.rows_mut(0, n).copy_from(&qd);
                        dx.rows_mut(n, n).copy_from(&qdd);
                        dx
                    }
                    Err(_) => {
                        dynamics_failed = true;
                        Vector::from_element(2 * n, f64::NAN)
                    }
                }
            };
            match rk4_step(field, &state, ts, h) {
                Ok(next) if next.amax() <= DIVERGENCE_BOUND && !dynamics_failed => state = next,
                _ => {
                    traj.diverged = true;
                    break 'ticks;
                }
            }
        }
        traj.inputs.push(u);
        traj.diagnostics.push(diag);
        traj.times.push(settings.t0 + (i + 1) as f64 * settings.dt_ctrl);
        traj.states.push(state.clone());
    }
    Ok(traj)
}

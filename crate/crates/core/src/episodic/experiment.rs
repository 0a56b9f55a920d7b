use crate::clf::{ClfContext, TrackingProblem};
use crate::dynamics::{simulate, Controller, RoboticModel, SimulationSettings, StateTrajectory, TickDiagnostics};
use crate::error::Result;
use crate::learning::{make_dataset, Dataset};
use crate::numerics::{RngStream, Vector};

/// Pitch magnitude beyond which the body has fallen and data is discarded.
pub const FALLEN_PITCH: f64 = std::f64::consts::FRAC_PI_2;

/// Adds per-tick exploration noise `ε`, each coordinate uniform on
/// `[−a‖u‖, a‖u‖]` with `u` the wrapped controller's output.
pub struct Perturbed {
    base: Box<dyn Controller + Send>,
    amplitude: f64,
    rng: RngStream,
}

impl Perturbed {
    pub fn new(base: Box<dyn Controller + Send>, amplitude: f64, rng: RngStream) -> Self {
        Self { base, amplitude: amplitude.max(0.0), rng }
    }
}

impl Controller for Perturbed {
    fn control(&mut self, q: &Vector, qd: &Vector, t: f64) -> Vector {
        let u = self.base.control(q, qd, t);
        let scale = self.amplitude * u.norm();
        if !(scale > 0.0) {
            return u;
        }
        u.map(|v| v + self.rng.uniform(-scale, scale))
    }

    fn diagnostics(&self) -> TickDiagnostics {
        self.base.diagnostics()
    }

    fn reset(&mut self) {
        self.base.reset();
    }
}

/// Tracking quality of one rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `∫ ‖y − y_d‖² dt` by the trapezoid rule over control ticks.
    pub ise: f64,
    /// `max ‖y − y_d‖` over ticks.
    pub max_err: f64,
    pub diverged: bool,
}

/// Metrics of a recorded trajectory. A diverged rollout is scored on its
/// recorded prefix, so compare `diverged` before `ise`.
pub fn tracking_metrics(traj: &StateTrajectory, tracking: &TrackingProblem) -> Metrics {
    let k = tracking.k();
    let sq: Vec<f64> = (0..traj.len())
        .map(|i| tracking.error_state(&traj.q(i), &traj.qd(i), traj.times[i]).rows(0, k).norm_squared())
        .collect();
    let ise = sq
        .windows(2)
        .zip(traj.times.windows(2))
        .map(|(e, t)| 0.5 * (e[0] + e[1]) * (t[1] - t[0]))
        .sum();
    let max_err = sq.iter().fold(0.0f64, |m, &e| m.max(e.sqrt()));
    Metrics { ise, max_err, diverged: traj.diverged }
}

/// Longest prefix with every pitch inside `|θ| < π/2`.
pub fn upright_prefix(traj: &StateTrajectory, pitch_index: usize) -> usize {
    (0..traj.len()).find(|&i| traj.states[i][pitch_index].abs() >= FALLEN_PITCH).unwrap_or(traj.len())
}

/// Truncated copy of `traj` keeping its first `len` ticks.
pub fn truncate(traj: &StateTrajectory, len: usize) -> StateTrajectory {
    let len = len.min(traj.len());
    StateTrajectory {
        times: traj.times[..len].to_vec(),
        states: traj.states[..len].to_vec(),
        inputs: traj.inputs[..len.saturating_sub(1).min(traj.inputs.len())].to_vec(),
        diagnostics: traj.diagnostics[..len.saturating_sub(1).min(traj.diagnostics.len())].to_vec(),
        dt: traj.dt,
        diverged: traj.diverged,
    }
}

/// One experiment: roll out `controller` on the plant from `(q0, 0)` and turn
/// the upright part of the rollout into samples.
///
/// A rollout that falls over or diverges still yields its prefix; fewer than 3
/// upright ticks yield an empty dataset.
pub fn run_experiment<M, C>(
    plant: &M,
    controller: &mut C,
    q0: &Vector,
    ctx: &ClfContext,
    pitch_index: usize,
    settings: &SimulationSettings,
    episode: usize,
) -> Result<(StateTrajectory, Dataset)>
where
    M: RoboticModel + ?Sized,
    C: Controller + ?Sized,
{
    let qd0 = Vector::zeros(q0.len());
    let traj = simulate(plant, controller, q0, &qd0, settings)?;
    let keep = upright_prefix(&traj, pitch_index);
    let dataset = if keep >= 3 {
        make_dataset(&truncate(&traj, keep), ctx, episode)?
    } else {
        Dataset::from_episode(episode, Vec::new())
    };
    Ok((traj, dataset))
}

/// Noise-free rollout from `(q0, q̇0)` scored against the tracking problem.
pub fn evaluate<M, C>(
    plant: &M,
    controller: &mut C,
    tracking: &TrackingProblem,
    q0: &Vector,
    qd0: &Vector,
    settings: &SimulationSettings,
) -> Result<(StateTrajectory, Metrics)>
where
    M: RoboticModel + ?Sized,
    C: Controller + ?Sized,
{
    let traj = simulate(plant, controller, q0, qd0, settings)?;
    let metrics = tracking_metrics(&traj, tracking);
    Ok((traj, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::tests_support::segway_ctx;
    use crate::clf::IoLinController;
    use nalgebra::dvector;

    #[test]
    fn zero_amplitude_and_zero_input_pass_through() {
        let base = |_: &Vector, _: &Vector, _: f64| dvector![1.5];
        let mut p = Perturbed::new(Box::new(base), 0.0, RngStream::new(1));
        assert_eq!(p.control(&dvector![0.0], &dvector![0.0], 0.0), dvector![1.5]);
        let zero = |_: &Vector, _: &Vector, _: f64| dvector![0.0, 0.0];
        let mut p = Perturbed::new(Box::new(zero), 0.3, RngStream::new(1));
        assert_eq!(p.control(&dvector![0.0], &dvector![0.0], 0.0), dvector![0.0, 0.0]);
    }

    #[test]
    fn noise_statistics() {
        let base = |_: &Vector, _: &Vector, _: f64| dvector![3.0, 4.0];
        let mut p = Perturbed::new(Box::new(base), 0.2, RngStream::new(5));
        let bound = 0.2 * 5.0;
        let n = 100_000;
        let (mut sum, mut max) = (0.0, 0.0f64);
        for _ in 0..n {
            let u = p.control(&dvector![0.0], &dvector![0.0], 0.0);
            let eps = u[0] - 3.0;
            sum += eps;
            max = max.max(eps.abs()).max((u[1] - 4.0).abs());
        }
        assert!(max <= bound);
        let sigma = bound / 3f64.sqrt() / (n as f64).sqrt();
        assert!((sum / n as f64).abs() <= 3.0 * sigma);
    }

    #[test]
    fn ise_closed_forms() {
        let ctx = segway_ctx();
        let tracking = &ctx.tracking;
        let n = 101;
        let dt = 0.01;
        let times: Vec<f64> = (0..n).map(|i| 20.0 + i as f64 * dt).collect();
        let perfect = StateTrajectory {
            states: times
                .iter()
                .map(|&t| {
                    let (y, yd, _) = crate::clf::SmoothSine::default().eval_scalar(t);
                    dvector![0.0, y, 0.0, yd]
                })
                .collect(),
            times: times.clone(),
            inputs: vec![dvector![0.0]; n - 1],
            diagnostics: vec![TickDiagnostics::default(); n - 1],
            dt,
            diverged: false,
        };
        let m = tracking_metrics(&perfect, tracking);
        assert!(m.ise.abs() <= 1e-20 && m.max_err <= 1e-12);

        let offset = 0.05;
        let shifted = StateTrajectory {
            states: perfect.states.iter().map(|s| dvector![s[0], s[1] + offset, s[2], s[3]]).collect(),
            ..perfect.clone()
        };
        let m = tracking_metrics(&shifted, tracking);
        assert!((m.ise - offset * offset * 1.0).abs() <= 1e-12, "{}", m.ise);
        assert!((m.max_err - offset).abs() <= 1e-12);
    }

    #[test]
    fn experiment_matches_analytic_derivative_and_counts() {
        let ctx = segway_ctx();
        let settings = SimulationSettings { tf: 2.0, ..Default::default() };
        let q0 = dvector![0.0, 0.01];
        let run = || {
            let mut c = IoLinController::new(ctx.clone());
            run_experiment(ctx.model.as_ref(), &mut c, &q0, &ctx, 1, &settings, 1).unwrap()
        };
        let (traj, data) = run();
        assert_eq!(data.len(), traj.len() - 1);
        for s in data.samples() {
            let analytic = ctx.vdot_affine(&s.q, &s.qd, s.t).unwrap().eval(&s.u);
            assert!((analytic - s.vdot).abs() <= 5e-3, "{} vs {}", analytic, s.vdot);
        }
        let (_, again) = run();
        assert_eq!(data, again);
    }

    #[test]
    fn fallen_rollouts_are_truncated() {
        let ctx = segway_ctx();
        let settings = SimulationSettings { tf: 5.0, ..Default::default() };
        let mut idle = |_: &Vector, _: &Vector, _: f64| dvector![0.0];
        let (traj, data) =
            run_experiment(ctx.model.as_ref(), &mut idle, &dvector![0.0, 0.3], &ctx, 1, &settings, 1).unwrap();
        let keep = upright_prefix(&traj, 1);
        assert!(keep < traj.len());
        assert_eq!(data.len(), keep - 1);
        assert!(data.samples().iter().all(|s| s.q[1].abs() < FALLEN_PITCH));
    }
}

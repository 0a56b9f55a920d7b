use crate::clf::ClfContext;
use crate::dynamics::StateTrajectory;
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// One regression pair `((q, q̇, η, u), V̇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub episode: usize,
    pub t: f64,
    pub q: Vector,
    pub qd: Vector,
    pub eta: Vector,
    /// Input held over the differenced interval; see [`make_dataset`].
    pub u: Vector,
    pub vdot: f64,
}

/// Samples aggregated across episodes, never replaced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    /// `(episode, sample count)` in aggregation order.
    episode_counts: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_episode(episode: usize, samples: Vec<Sample>) -> Self {
        let episode_counts = vec![(episode, samples.len())];
        Self { samples, episode_counts }
    }

    /// `D ← D ∪ D_k`.
    pub fn aggregate(&mut self, other: Dataset) {
        self.samples.extend(other.samples);
        self.episode_counts.extend(other.episode_counts);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn episode_counts(&self) -> &[(usize, usize)] {
        &self.episode_counts
    }
}

/// Turns a rollout into regression samples, one per held input.
///
/// The input is constant on each control interval `[tᵢ, tᵢ₊₁]`, so `V` is
/// smooth there and `(Vᵢ₊₁ − Vᵢ)/Δt` is a central difference about the
/// interval midpoint, accurate to `O(Δt²)`. Sample `i` pairs that derivative
/// with `uᵢ` and with the state at the midpoint, interpolated linearly (also
/// `O(Δt²)`). Differencing across a tick instead would straddle two inputs
/// and pick up an `O(Δt)` error from the jump in `V̈`, which exploration noise
/// makes large.
pub fn make_dataset(traj: &StateTrajectory, ctx: &ClfContext, episode: usize) -> Result<Dataset> {
    if traj.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 recorded ticks to build a dataset, got {}",
            traj.len()
        )));
    }
    let values: Vec<f64> = (0..traj.len())
        .map(|i| ctx.clf.value(&ctx.error_state(&traj.q(i), &traj.qd(i), traj.times[i])))
        .collect();

    let samples = (0..traj.len() - 1)
        .map(|i| {
            let dt = traj.times[i + 1] - traj.times[i];
            let t = 0.5 * (traj.times[i] + traj.times[i + 1]);
            let q = (traj.q(i) + traj.q(i + 1)) * 0.5;
            let qd = (traj.qd(i) + traj.qd(i + 1)) * 0.5;
            let eta = ctx.error_state(&q, &qd, t);
            Sample { episode, t, q, qd, eta, u: traj.inputs[i].clone(), vdot: (values[i + 1] - values[i]) / dt }
        })
        .collect();
    Ok(Dataset::from_episode(episode, samples))
}

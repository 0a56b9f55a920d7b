use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sigmoid trust sequence running from `w_min` at episode 1 to `1 − w_min` at
/// episode `T`, or a constant trust when `constant` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustSchedule {
    pub episodes: usize,
    pub w_min: f64,
    pub constant: Option<f64>,
}

impl Default for TrustSchedule {
    fn default() -> Self {
        Self { episodes: 20, w_min: 0.01, constant: None }
    }
}

impl TrustSchedule {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.constant {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidInput(format!("constant trust must lie in [0, 1], got {w}")));
            }
            if self.episodes == 0 {
                return Err(Error::InvalidInput("trust schedule needs at least 1 episode".into()));
            }
            return Ok(());
        }
        if self.episodes < 2 {
            return Err(Error::InvalidInput(format!(
                "trust schedule needs at least 2 episodes, got {}",
                self.episodes
            )));
        }
        if !(self.w_min > 0.0 && self.w_min < 0.5) {
            return Err(Error::InvalidInput(format!("w_min must lie in (0, 0.5), got {}", self.w_min)));
        }
        Ok(())
    }

    pub fn w_max(&self) -> f64 {
        1.0 - self.w_min
    }

    /// Logistic steepness that places `w_min` and `w_max` on the endpoints.
    pub fn steepness(&self) -> f64 {
        2.0 * ((1.0 - self.w_min) / self.w_min).ln() / (self.episodes as f64 - 1.0)
    }
}

/// `w_k = 1 / (1 + exp(−β (k − (T+1)/2)))` for `1 ≤ k ≤ T`.
pub fn trust(k: usize, sched: &TrustSchedule) -> Result<f64> {
    sched.validate()?;
    if k == 0 || k > sched.episodes {
        return Err(Error::InvalidInput(format!("episode {k} outside 1..={}", sched.episodes)));
    }
    if let Some(w) = sched.constant {
        return Ok(w);
    }
    let mid = (sched.episodes as f64 + 1.0) / 2.0;
    Ok(1.0 / (1.0 + (-sched.steepness() * (k as f64 - mid)).exp()))
}

/// Exploration noise amplitude, as a fraction of the controller norm: constant
/// for `plateau` episodes, then linear down to zero over `decay` episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationSchedule {
    pub amplitude: f64,
    pub plateau: usize,
    pub decay: usize,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self { amplitude: 0.2, plateau: 10, decay: 10 }
    }
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "exploration amplitude must be nonnegative, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }
}

pub fn exploration_amplitude(k: usize, sched: &ExplorationSchedule) -> f64 {
    if k <= sched.plateau {
        return sched.amplitude;
    }
    if sched.decay == 0 {
        return 0.0;
    }
    let progress = (k - sched.plateau) as f64 / sched.decay as f64;
    sched.amplitude * (1.0 - progress).max(0.0)
}

use std::sync::Arc;

use super::Controller;
use crate::clf::TrackingProblem;
use crate::numerics::Vector;

/// `u = −k_p (y − y_d) − k_d (ẏ − ẏ_d)`, one input per output.
pub struct PdController {
    pub kp: f64,
    pub kd: f64,
    tracking: Arc<TrackingProblem>,
}

impl PdController {
    pub fn new(kp: f64, kd: f64, tracking: Arc<TrackingProblem>) -> Self {
        Self { kp, kd, tracking }
    }
}

impl Controller for PdController {
    fn control(&mut self, q: &Vector, qd: &Vector, t: f64) -> Vector {
        let k = self.tracking.k();
        let eta = self.tracking.error_state(q, qd, t);
        -(eta.rows(0, k) * self.kp + eta.rows(k, k) * self.kd)
    }
}

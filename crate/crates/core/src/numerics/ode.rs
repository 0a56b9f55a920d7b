use super::Vector;
use crate::error::{Error, Result};

/// One classical fourth-order Runge-Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(mut f: F, x: &Vector, t: f64, h: f64) -> Result<Vector>
where
    F: FnMut(f64, &Vector) -> Vector,
{
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
    }
    let mut stage = |tt: f64, xx: &Vector| -> Result<Vector> {
        let k = f(tt, xx);
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::Divergence { t: tt })
        }
    };
    let k1 = stage(t, x)?;
    let k2 = stage(t + 0.5 * h, &(x + &k1 * (0.5 * h)))?;
    let k3 = stage(t + 0.5 * h, &(x + &k2 * (0.5 * h)))?;
    let k4 = stage(t + h, &(x + &k3 * h))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

use crate::error::{Error, Result};

/// Numerical derivative of a uniformly sampled series.
///
/// Interior points use central differences, the two endpoints one-sided first
/// order differences. The output has the same length as the input.
pub fn central_difference(samples: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "central difference needs at least 3 samples, got {n}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("sample spacing must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(n);
    out.push((samples[1] - samples[0]) / dt);
    out.extend(samples.windows(3).map(|w| (w[2] - w[0]) / (2.0 * dt)));
    out.push((samples[n - 1] - samples[n - 2]) / dt);
    Ok(out)
}

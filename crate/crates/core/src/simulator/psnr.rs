use crate::error::{ensure_shape, Error, Result};
use crate::Field;

/// PSNR in dB after removing the mean difference between `a` and `b`, so a
/// global gray-value offset is not penalised. Returns `f64::INFINITY` when
/// the aligned images agree to rounding error.
pub fn psnr_aligned(a: &Field, b: &Field, peak: f64) -> Result<f64> {
    ensure_shape(a.dim(), b.dim())?;
    if !(peak > 0.0) {
        return Err(Error::Config(format!("peak must be positive, got {peak}")));
    }
    let n = a.len() as f64;
    let offset = a.iter().zip(b.iter()).map(|(x, y)| x - y).sum::<f64>() / n;
    let mse = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y - offset).powi(2))
        .sum::<f64>()
        / n;
    if mse <= 1e-24 * peak * peak {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

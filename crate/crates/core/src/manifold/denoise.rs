use ndarray::Array3;

use crate::error::{Error, Result};
use crate::manifold::TimeSurface;
use crate::Field;

pub const DEFAULT_DENOISE_WEIGHT: f64 = 1.0;
pub const DEFAULT_DENOISE_ITERATIONS: usize = 50;

/// TV-L1 denoising of the time surface,
/// `min_t  Σ |∇t| + weight · Σ |t − t₀|`, with flat forward-difference TV,
/// solved by a fixed number of primal-dual iterations. The result is clamped
/// back to `[0, scale]`. Zero iterations return the input unchanged.
pub fn denoise_timestamps(
    surface: &TimeSurface,
    weight: f64,
    iterations: usize,
) -> Result<TimeSurface> {
    if !(weight > 0.0) {
        return Err(Error::Config(format!("denoise weight must be > 0, got {weight}")));
    }
    if iterations == 0 {
        return Ok(surface.clone());
    }
    let t0 = surface.values();
    let (rows, cols) = t0.dim();
    // ‖∇‖² ≤ 8 for the flat gradient.
    let tau = 1.0 / 8f64.sqrt();
    let sigma = 1.0 / 8f64.sqrt();
    let shrink = tau * weight;

    let mut t = t0.clone();
    let mut t_bar = t0.clone();
    let mut p = Array3::<f64>::zeros((rows, cols, 2));

    for _ in 0..iterations {
        for y in 0..rows {
            for x in 0..cols {
                let here = t_bar[(y, x)];
                let gx = if x + 1 < cols { t_bar[(y, x + 1)] - here } else { 0.0 };
                let gy = if y + 1 < rows { t_bar[(y + 1, x)] - here } else { 0.0 };
                let px = p[(y, x, 0)] + sigma * gx;
                let py = p[(y, x, 1)] + sigma * gy;
                let scale = (px * px + py * py).sqrt().max(1.0);
                p[(y, x, 0)] = px / scale;
                p[(y, x, 1)] = py / scale;
            }
        }
        for y in 0..rows {
            for x in 0..cols {
                let px_here = if x + 1 < cols { p[(y, x, 0)] } else { 0.0 };
                let px_left = if x > 0 { p[(y, x - 1, 0)] } else { 0.0 };
                let py_here = if y + 1 < rows { p[(y, x, 1)] } else { 0.0 };
                let py_up = if y > 0 { p[(y - 1, x, 1)] } else { 0.0 };
                let div = (px_here - px_left) + (py_here - py_up);
                let old = t[(y, x)];
                // t − τ∇*p = t + τ·div p, then the L1 prox shrinks towards t₀.
                let v = old + tau * div;
                let d = v - t0[(y, x)];
                let new = t0[(y, x)] + d.signum() * (d.abs() - shrink).max(0.0);
                t[(y, x)] = new;
                t_bar[(y, x)] = 2.0 * new - old;
            }
        }
    }

    let scale = surface.scale();
    let values: Field = t.mapv(|v| v.clamp(0.0, scale));
    Ok(TimeSurface::from_parts_unchecked(values, scale))
}

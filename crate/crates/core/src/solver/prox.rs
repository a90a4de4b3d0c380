use ndarray::{Axis, Zip};
use rayon::prelude::*;

use crate::error::{ensure_shape, Error, Result};
use crate::manifold::{DualField, MetricField};
use crate::solver::SolverConfig;
use crate::{Field, ROWS_PER_TASK};

/// Minimiser of `(u − ū)²/2 + β(u − f log u)` on `[lo, hi]`.
///
/// The unconstrained root `½((ū−β) + √((ū−β)² + 4βf))` is evaluated in a
/// cancellation-free form when `ū − β < 0`.
#[inline]
pub fn prox_kl_scalar(u_bar: f64, f: f64, beta: f64, lo: f64, hi: f64) -> f64 {
    let d = u_bar - beta;
    let disc = (d * d + 4.0 * beta * f).sqrt();
    let root = if d >= 0.0 {
        0.5 * (d + disc)
    } else {
        let denom = disc - d;
        if denom > 0.0 {
            2.0 * beta * f / denom
        } else {
            0.0
        }
    };
    root.clamp(lo, hi)
}

pub(crate) fn check_measurement(f: &Field) -> Result<()> {
    match f.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(bad) => Err(Error::Domain(format!(
            "measurement must be positive and finite, found {bad}"
        ))),
        None => Ok(()),
    }
}

/// Proximal map of `τ·D` with `D(u) = λ Σ (u − f log u)·√G` restricted to
/// the box, evaluated pixel-wise with `β = τ·λ·√G`.
pub fn prox_data(
    u_bar: &Field,
    f: &Field,
    m: &MetricField,
    tau: f64,
    cfg: &SolverConfig,
) -> Result<Field> {
    ensure_shape(m.dim(), u_bar.dim())?;
    ensure_shape(m.dim(), f.dim())?;
    check_measurement(f)?;
    let scale = tau * cfg.lambda;
    let mut out = Field::zeros(u_bar.dim());
    Zip::from(&mut out)
        .and(u_bar)
        .and(f)
        .and(m.sqrt_g())
        .par_for_each(|o, &ub, &fv, &sg| {
            *o = prox_kl_scalar(ub, fv, scale * sg, cfg.u_min, cfg.u_max);
        });
    Ok(out)
}

/// Projects each pixel's 3-vector onto the ball of radius `√G`.
pub fn prox_dual(p_bar: &DualField, m: &MetricField) -> Result<DualField> {
    ensure_shape(m.dim(), p_bar.dim())?;
    let mut p = p_bar.clone();
    project_in_place(&mut p, m);
    Ok(p)
}

pub(crate) fn project_in_place(p: &mut DualField, m: &MetricField) {
    let sqrt_g = m.sqrt_g();
    p.0.axis_iter_mut(Axis(0))
        .into_par_iter()
        .with_min_len(ROWS_PER_TASK)
        .enumerate()
        .for_each(|(y, mut row)| {
            for (x, mut v) in row.axis_iter_mut(Axis(0)).enumerate() {
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                let s = (norm / sqrt_g[(y, x)]).max(1.0);
                v.mapv_inplace(|c| c / s);
            }
        });
}

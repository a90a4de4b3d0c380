//! The discrete manifold gradient `L_g : R^{H×W} → R^{H×W×3}` and its adjoint.
//!
//! Both operators are pure per-pixel maps over read-only inputs and are
//! evaluated row-parallel; the output does not depend on how rows are split.

use ndarray::{Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure_shape, Result};
use crate::manifold::metric::Coefficients;
use crate::manifold::MetricField;
use crate::{Field, ROWS_PER_TASK};

/// Dual variable of the primal-dual scheme: a 3-vector per pixel, stored as
/// an `(rows, cols, 3)` array.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField(pub Array3<f64>);

impl DualField {
    pub fn zeros(shape: (usize, usize)) -> Self {
        DualField(Array3::zeros((shape.0, shape.1, 3)))
    }

    pub fn dim(&self) -> (usize, usize) {
        let (r, c, _) = self.0.dim();
        (r, c)
    }

    pub fn channel(&self, l: usize) -> ndarray::ArrayView2<'_, f64> {
        self.0.index_axis(Axis(2), l)
    }

    /// Unweighted Euclidean inner product over all pixels and channels.
    pub fn dot(&self, other: &DualField) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Per-pixel Euclidean norm of the 3-vector.
    pub fn pixel_norms(&self) -> Field {
        let (r, c) = self.dim();
        Field::from_shape_fn((r, c), |(y, x)| {
            let p = &self.0;
            (p[(y, x, 0)].powi(2) + p[(y, x, 1)].powi(2) + p[(y, x, 2)].powi(2)).sqrt()
        })
    }
}

/// `‖L_g‖² ≤ 8 + 4√2`, the bound that fixes the step-size product.
pub fn operator_norm_bound() -> f64 {
    8.0 + 4.0 * std::f64::consts::SQRT_2
}

pub fn apply_lg(u: &Field, m: &MetricField) -> Result<DualField> {
    let mut out = DualField::zeros(u.dim());
    apply_lg_into(u, m, &mut out)?;
    Ok(out)
}

/// Writes `L_g u` into `out`.
pub fn apply_lg_into(u: &Field, m: &MetricField, out: &mut DualField) -> Result<()> {
    ensure_shape(m.dim(), u.dim())?;
    ensure_shape(m.dim(), out.dim())?;
    let u = u.as_standard_layout();
    let u = u.as_slice().expect("standard layout is contiguous");
    with_contiguous(&mut out.0, |o| lg_kernel(m, o, |i| u[i]));
    Ok(())
}

/// Runs `f` on the row-major storage of `a`, copying through a standard
/// layout buffer when `a` is not contiguous.
pub(crate) fn with_contiguous<D: ndarray::Dimension>(
    a: &mut ndarray::Array<f64, D>,
    f: impl FnOnce(&mut [f64]),
) {
    match a.as_slice_mut() {
        Some(s) => f(s),
        None => {
            let mut tmp = a.as_standard_layout().into_owned();
            f(tmp.as_slice_mut().expect("standard layout is contiguous"));
            a.assign(&tmp);
        }
    }
}

#[inline(always)]
fn apply_coeffs(c: &Coefficients, ux: f64, uy: f64) -> [f64; 3] {
    [c.a11 * ux + c.a12 * uy, c.a12 * ux + c.a22 * uy, c.a31 * ux + c.a32 * uy]
}

/// `L_g v` into the row-major `(rows, cols, 3)` buffer `out`, where `v` is
/// given by its flat index so callers can fuse a pre-map such as
/// over-relaxation.
pub(crate) fn lg_kernel<V>(m: &MetricField, out: &mut [f64], value: V)
where
    V: Fn(usize) -> f64 + Sync,
{
    gradient_kernel(m, out, value, |_, l, o| o.copy_from_slice(&l));
}

/// Calls `update(c, L_g v, out_i)` on every pixel, with `c` the pixel's
/// coefficients and `out_i` its 3-vector in `out`.
pub(crate) fn gradient_kernel<V, W>(m: &MetricField, out: &mut [f64], value: V, update: W)
where
    V: Fn(usize) -> f64 + Sync,
    W: Fn(&Coefficients, [f64; 3], &mut [f64]) + Sync,
{
    let (rows, cols) = m.dim();
    if cols == 0 {
        return;
    }
    let coeffs = &m.coeffs;
    out.par_chunks_mut(3 * cols)
        .with_min_len(ROWS_PER_TASK)
        .enumerate()
        .for_each(|(y, orow)| {
            let base = y * cols;
            let crow = &coeffs[base..base + cols];
            for (x, (o, c)) in orow.chunks_exact_mut(3).zip(crow).enumerate() {
                let i = base + x;
                let here = value(i);
                let ux = if x + 1 < cols { value(i + 1) - here } else { 0.0 };
                let uy = if y + 1 < rows { value(i + cols) - here } else { 0.0 };
                update(c, apply_coeffs(c, ux, uy), o);
            }
        });
}

/// Weighted channel sums `qx = a11·p1 + a12·p2 + a31·p3` and
/// `qy = a12·p1 + a22·p2 + a32·p3`, the first half of `L_g*`.
pub(crate) fn metric_weights(m: &MetricField, p: &[f64], qx: &mut [f64], qy: &mut [f64]) {
    let cols = m.dim().1;
    if cols == 0 {
        return;
    }
    let coeffs = &m.coeffs;
    qx.par_chunks_mut(cols)
        .zip(qy.par_chunks_mut(cols))
        .with_min_len(ROWS_PER_TASK)
        .enumerate()
        .for_each(|(y, (qxrow, qyrow))| {
            let base = y * cols;
            let prow = &p[3 * base..3 * (base + cols)];
            let crow = &coeffs[base..base + cols];
            for (((qx, qy), pv), c) in qxrow.iter_mut().zip(qyrow).zip(prow.chunks_exact(3)).zip(crow) {
                *qx = c.a11 * pv[0] + c.a12 * pv[1] + c.a31 * pv[2];
                *qy = c.a12 * pv[0] + c.a22 * pv[1] + c.a32 * pv[2];
            }
        });
}

/// Sets `out[i] = update(i, a_i)` with `a = −div(qx, qy)`, the backward
/// difference divergence whose last row and column entries count as zero.
pub(crate) fn divergence_kernel<W>(rows: usize, cols: usize, qx: &[f64], qy: &[f64], out: &mut [f64], update: W)
where
    W: Fn(usize, f64) -> f64 + Sync,
{
    if cols == 0 {
        return;
    }
    out.par_chunks_mut(cols)
        .with_min_len(ROWS_PER_TASK)
        .enumerate()
        .for_each(|(y, orow)| {
            let base = y * cols;
            for (x, o) in orow.iter_mut().enumerate() {
                let i = base + x;
                let here_x = if x + 1 < cols { qx[i] } else { 0.0 };
                let left = if x > 0 { qx[i - 1] } else { 0.0 };
                let here_y = if y + 1 < rows { qy[i] } else { 0.0 };
                let up = if y > 0 { qy[i - cols] } else { 0.0 };
                *o = update(i, -((here_x - left) + (here_y - up)));
            }
        });
}

pub fn apply_lg_adjoint(p: &DualField, m: &MetricField) -> Result<Field> {
    let mut out = Field::zeros(p.dim());
    apply_lg_adjoint_into(p, m, &mut out)?;
    Ok(out)
}

/// Writes `L_g* p` into `out`: the metric-weighted channel combination
/// followed by the negative backward-difference divergence.
pub fn apply_lg_adjoint_into(p: &DualField, m: &MetricField, out: &mut Field) -> Result<()> {
    ensure_shape(m.dim(), p.dim())?;
    ensure_shape(m.dim(), out.dim())?;
    let (rows, cols) = m.dim();
    let p = p.0.as_standard_layout();
    let p = p.as_slice().expect("standard layout is contiguous");
    let (mut qx, mut qy) = (vec![0.0; rows * cols], vec![0.0; rows * cols]);
    metric_weights(m, p, &mut qx, &mut qy);
    with_contiguous(out, |o| divergence_kernel(rows, cols, &qx, &qy, o, |_, a| a));
    Ok(())
}

/// Power-iteration estimate of `‖L_g‖²` (the largest eigenvalue of
/// `L_g* L_g`). Starts from a seeded random image; every iterate's Rayleigh
/// quotient is a lower bound on the true value.
pub fn estimate_operator_norm_sq(m: &MetricField, iterations: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Field::from_shape_fn(m.dim(), |_| rng.random_range(-1.0..1.0));
    let mut lv = DualField::zeros(m.dim());
    let mut w = Field::zeros(m.dim());
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return estimate;
        }
        v.mapv_inplace(|a| a / norm);
        apply_lg_into(&v, m, &mut lv).expect("shapes agree by construction");
        estimate = lv.dot(&lv);
        apply_lg_adjoint_into(&lv, m, &mut w).expect("shapes agree by construction");
        std::mem::swap(&mut v, &mut w);
    }
    estimate
}

//! Forward differences with Neumann boundary and the matching divergence.

use crate::Field;

/// `u[y, x+1] - u[y, x]`, zero on the last column.
pub fn forward_diff_x(u: &Field) -> Field {
    let (rows, cols) = u.dim();
    Field::from_shape_fn((rows, cols), |(y, x)| {
        if x + 1 < cols {
            u[(y, x + 1)] - u[(y, x)]
        } else {
            0.0
        }
    })
}

/// `u[y+1, x] - u[y, x]`, zero on the last row.
pub fn forward_diff_y(u: &Field) -> Field {
    let (rows, cols) = u.dim();
    Field::from_shape_fn((rows, cols), |(y, x)| {
        if y + 1 < rows {
            u[(y + 1, x)] - u[(y, x)]
        } else {
            0.0
        }
    })
}

/// Adjoint of `(forward_diff_x, forward_diff_y)`, i.e. minus the
/// backward-difference divergence of `(qx, qy)`.
pub fn negative_divergence(qx: &Field, qy: &Field) -> Field {
    let (rows, cols) = qx.dim();
    Field::from_shape_fn((rows, cols), |(y, x)| {
        -(backward_x(|x| qx[(y, x)], x, cols) + backward_y(|y| qy[(y, x)], y, rows))
    })
}

/// Backward difference of a component whose last entry is treated as zero.
#[inline]
pub(crate) fn backward_x(q: impl Fn(usize) -> f64, x: usize, cols: usize) -> f64 {
    let here = if x + 1 < cols { q(x) } else { 0.0 };
    let left = if x > 0 { q(x - 1) } else { 0.0 };
    here - left
}

#[inline]
pub(crate) fn backward_y(q: impl Fn(usize) -> f64, y: usize, rows: usize) -> f64 {
    backward_x(q, y, rows)
}

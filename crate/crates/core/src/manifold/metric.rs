use crate::manifold::diff::{forward_diff_x, forward_diff_y};
use crate::manifold::TimeSurface;
use crate::Field;

/// Per-pixel geometry of the surface: the partial derivatives of `t`, the
/// metric determinant `G = 1 + tx² + ty²` and the area element `√G`.
///
/// Also caches the entries of the 3×2 matrix that maps the flat gradient
/// `(Lx u, Ly u)` to the manifold gradient, which is `[φx φy]·g⁻¹` with
/// `φx = (1, 0, tx)` and `φy = (0, 1, ty)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    tx: Field,
    ty: Field,
    g: Field,
    sqrt_g: Field,
    pub(crate) coeffs: Vec<Coefficients>,
}

/// Row-major per-pixel entries with `(Lg u)_1 = a11·ux + a12·uy`,
/// `(Lg u)_2 = a12·ux + a22·uy` and `(Lg u)_3 = a31·ux + a32·uy`, packed so
/// the kernels read one contiguous record per pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Coefficients {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub a31: f64,
    pub a32: f64,
    pub sqrt_g: f64,
}

impl MetricField {
    /// Builds the metric from precomputed partial derivatives.
    pub fn from_derivatives(tx: Field, ty: Field) -> Self {
        assert_eq!(tx.dim(), ty.dim(), "tx and ty must share a shape");
        let g = Field::from_shape_fn(tx.dim(), |ij| 1.0 + tx[ij] * tx[ij] + ty[ij] * ty[ij]);
        let sqrt_g = g.mapv(f64::sqrt);
        let cols = tx.ncols();
        let coeffs = (0..tx.len())
            .map(|i| {
                let ij = (i / cols, i % cols);
                let (tx, ty, g) = (tx[ij], ty[ij], g[ij]);
                Coefficients {
                    a11: (1.0 + ty * ty) / g,
                    a12: -tx * ty / g,
                    a22: (1.0 + tx * tx) / g,
                    a31: tx / g,
                    a32: ty / g,
                    sqrt_g: sqrt_g[ij],
                }
            })
            .collect();
        Self {
            tx,
            ty,
            g,
            sqrt_g,
            coeffs,
        }
    }

    /// Identity metric, as produced by a constant surface.
    pub fn flat(shape: (usize, usize)) -> Self {
        Self::from_derivatives(Field::zeros(shape), Field::zeros(shape))
    }

    pub fn tx(&self) -> &Field {
        &self.tx
    }

    pub fn ty(&self) -> &Field {
        &self.ty
    }

    /// Determinant `G` of the metric tensor.
    pub fn g(&self) -> &Field {
        &self.g
    }

    pub fn sqrt_g(&self) -> &Field {
        &self.sqrt_g
    }

    pub fn dim(&self) -> (usize, usize) {
        self.g.dim()
    }

    /// The 2×2 metric tensor at pixel `(y, x)`.
    pub fn tensor(&self, y: usize, x: usize) -> [[f64; 2]; 2] {
        let (tx, ty) = (self.tx[(y, x)], self.ty[(y, x)]);
        [[1.0 + tx * tx, tx * ty], [tx * ty, 1.0 + ty * ty]]
    }

    /// Inverse metric tensor at pixel `(y, x)`.
    pub fn inverse_tensor(&self, y: usize, x: usize) -> [[f64; 2]; 2] {
        let (tx, ty, g) = (self.tx[(y, x)], self.ty[(y, x)], self.g[(y, x)]);
        [
            [(1.0 + ty * ty) / g, -tx * ty / g],
            [-tx * ty / g, (1.0 + tx * tx) / g],
        ]
    }
}

/// Metric of `surface` using forward differences, zero on the last
/// column (`tx`) and last row (`ty`).
pub fn compute_metric(surface: &TimeSurface) -> MetricField {
    let t = surface.values();
    MetricField::from_derivatives(forward_diff_x(t), forward_diff_y(t))
}

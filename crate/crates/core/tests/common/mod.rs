//! Independent reference implementations on plain `Vec<f64>` buffers.
//! They share no code with the library so they can serve as test oracles.

#![allow(dead_code)]

/// Row-major grid image.
#[derive(Clone, Debug)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for y in 0..rows {
            for x in 0..cols {
                data.push(f(y, x));
            }
        }
        Self { rows, cols, data }
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.cols + x]
    }
}

/// Forward differences with zero on the far boundary.
pub fn gradient(u: &Grid) -> (Vec<f64>, Vec<f64>) {
    let (r, c) = (u.rows, u.cols);
    let mut gx = vec![0.0; r * c];
    let mut gy = vec![0.0; r * c];
    for y in 0..r {
        for x in 0..c {
            let i = y * c + x;
            if x + 1 < c {
                gx[i] = u.data[i + 1] - u.data[i];
            }
            if y + 1 < r {
                gy[i] = u.data[i + c] - u.data[i];
            }
        }
    }
    (gx, gy)
}

/// Backward-difference divergence, the negative adjoint of [`gradient`].
pub fn divergence(px: &[f64], py: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut d = vec![0.0; rows * cols];
    for y in 0..rows {
        for x in 0..cols {
            let i = y * cols + x;
            let mut v = 0.0;
            if x + 1 < cols {
                v += px[i];
            }
            if x > 0 {
                v -= px[i - 1];
            }
            if y + 1 < rows {
                v += py[i];
            }
            if y > 0 {
                v -= py[i - cols];
            }
            d[i] = v;
        }
    }
    d
}

/// Isotropic flat TV + generalised KL on a box, by primal-dual iteration
/// with the given steps, starting from `u = f`, `p = 0`.
pub fn flat_tv_kl(f: &Grid, lambda: f64, lo: f64, hi: f64, tau: f64, sigma: f64, iterations: usize) -> Grid {
    let scalar_prox = |ub: f64, fv: f64| {
        let b = tau * lambda;
        let d = ub - b;
        (0.5 * (d + (d * d + 4.0 * b * fv).sqrt())).clamp(lo, hi)
    };
    primal_dual(f, tau, sigma, iterations, scalar_prox)
}

/// Flat ROF: isotropic TV + (λ/2)‖u − f‖², no box.
pub fn flat_rof(f: &Grid, lambda: f64, tau: f64, sigma: f64, iterations: usize) -> Grid {
    let scalar_prox = |ub: f64, fv: f64| (ub + tau * lambda * fv) / (1.0 + tau * lambda);
    primal_dual(f, tau, sigma, iterations, scalar_prox)
}

fn primal_dual(f: &Grid, tau: f64, sigma: f64, iterations: usize, prox: impl Fn(f64, f64) -> f64) -> Grid {
    let (r, c) = (f.rows, f.cols);
    let n = r * c;
    let mut u = f.clone();
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    for _ in 0..iterations {
        let div = divergence(&px, &py, r, c);
        let old = u.data.clone();
        for i in 0..n {
            u.data[i] = prox(old[i] + tau * div[i], f.data[i]);
        }
        let bar = Grid { rows: r, cols: c, data: (0..n).map(|i| 2.0 * u.data[i] - old[i]).collect() };
        let (gx, gy) = gradient(&bar);
        for i in 0..n {
            let a = px[i] + sigma * gx[i];
            let b = py[i] + sigma * gy[i];
            let s = (a * a + b * b).sqrt().max(1.0);
            px[i] = a / s;
            py[i] = b / s;
        }
    }
    u
}

/// Isotropic flat TV + KL energy.
pub fn flat_energy(u: &Grid, f: &Grid, lambda: f64) -> f64 {
    let (gx, gy) = gradient(u);
    let tv: f64 = gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).sum();
    let data: f64 = u.data.iter().zip(&f.data).map(|(u, f)| u - f * u.ln()).sum();
    tv + lambda * data
}

/// Deterministic pseudo-random values in `[lo, hi)` from a 64-bit LCG.
pub fn lcg_field(rows: usize, cols: usize, seed: u64, lo: f64, hi: f64) -> Grid {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    Grid::new(rows, cols, |_, _| {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        lo + (hi - lo) * ((s >> 11) as f64 / (1u64 << 53) as f64)
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

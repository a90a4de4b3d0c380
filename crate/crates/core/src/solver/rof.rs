use crate::error::{ensure_shape, Error, Result};
use crate::manifold::{operator_norm_bound, MetricField};
use crate::solver::primal_dual::run;
use crate::solver::SolverConfig;
use crate::Field;

/// Minimiser of `(u − ū)²/2 + (β/2)(u − f)²`.
#[inline]
pub fn rof_prox_scalar(u_bar: f64, f: f64, beta: f64) -> f64 {
    (u_bar + beta * f) / (1.0 + beta)
}

/// ROF denoising on the manifold,
/// `min_u Σ |L_g u|·√G + (λ/2) Σ (u − f)²·√G`,
/// with the same primal-dual scheme and default step sizes as the KL model
/// but no box constraint. Starts from `u = f`, `p = 0`.
pub fn rof_manifold_solve(
    f: &Field,
    m: &MetricField,
    lambda: f64,
    iterations: usize,
) -> Result<Field> {
    ensure_shape(m.dim(), f.dim())?;
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be > 0, got {lambda}")));
    }
    if let Some(bad) = f.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("input must be finite, found {bad}")));
    }
    let step = 1.0 / operator_norm_bound().sqrt();
    let cfg = SolverConfig {
        max_iterations: iterations,
        tau: step,
        sigma: step,
        convergence_tol: None,
        ..SolverConfig::default()
    };
    let scale = step * lambda;
    let prox = |u_bar: f64, f: f64, sqrt_g: f64| rof_prox_scalar(u_bar, f, scale * sqrt_g);
    run(f, m, &cfg, None, None, prox, None).map(|s| s.u)
}

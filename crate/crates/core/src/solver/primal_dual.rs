use crate::error::{ensure_shape, Result};
use crate::manifold::operator::{divergence_kernel, gradient_kernel, metric_weights};
use crate::manifold::{DualField, MetricField};
use crate::solver::energy::energy;
use crate::solver::prox::{check_measurement, prox_kl_scalar};
use crate::solver::SolverConfig;
use crate::Field;

/// One row of the optional per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub primal_change: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Field,
    pub p: DualField,
    pub iterations: usize,
    /// `‖u_k − u_{k−1}‖ / ‖u_{k−1}‖` at the last iteration.
    pub final_change: f64,
    /// Filled when `SolverConfig::record_trace` is set.
    pub trace: Vec<TraceRow>,
}

/// Minimises the manifold TV + generalised-KL energy for measurement `f`.
///
/// Iterates
/// `u ← prox_τD(u − τ L_g* p)` then `p ← prox_σR*(p + σ L_g(2u_new − u_old))`.
/// Warm starts default to `u = f` and `p = 0`.
pub fn primal_dual_solve(
    f: &Field,
    m: &MetricField,
    cfg: &SolverConfig,
    u_init: Option<&Field>,
    p_init: Option<&DualField>,
) -> Result<Solution> {
    cfg.validate()?;
    ensure_shape(m.dim(), f.dim())?;
    check_measurement(f)?;
    let (lo, hi) = cfg.bounds();
    let scale = cfg.tau * cfg.lambda;
    let prox = |u_bar: f64, f: f64, sqrt_g: f64| prox_kl_scalar(u_bar, f, scale * sqrt_g, lo, hi);
    let trace_energy = |u: &Field| energy(u, f, m, cfg.lambda);
    run(
        f,
        m,
        cfg,
        u_init,
        p_init,
        prox,
        cfg.record_trace.then_some(&trace_energy),
    )
}

type EnergyFn<'a> = &'a (dyn Fn(&Field) -> Result<f64> + 'a);

/// Primal-dual loop shared by the KL and ROF models. `prox(ū, f, √G)` is the
/// pixel-wise primal proximal map.
pub(crate) fn run<P>(
    f: &Field,
    m: &MetricField,
    cfg: &SolverConfig,
    u_init: Option<&Field>,
    p_init: Option<&DualField>,
    prox: P,
    trace_energy: Option<EnergyFn<'_>>,
) -> Result<Solution>
where
    P: Fn(f64, f64, f64) -> f64 + Sync,
{
    let shape = m.dim();
    let (rows, cols) = shape;
    let standard = |a: &Field| a.as_standard_layout().into_owned();
    let mut u = match u_init {
        Some(u0) => {
            ensure_shape(shape, u0.dim())?;
            standard(u0)
        }
        None => standard(f),
    };
    let mut p = match p_init {
        Some(p0) => {
            ensure_shape(shape, p0.dim())?;
            DualField(p0.0.as_standard_layout().into_owned())
        }
        None => DualField::zeros(shape),
    };
    let f_std = standard(f);
    let fs = f_std.as_slice().expect("standard layout is contiguous");
    let mut u_prev = Field::zeros(shape);
    let (mut qx, mut qy) = (vec![0.0; rows * cols], vec![0.0; rows * cols]);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut final_change = 0.0;
    let (tau, sigma) = (cfg.tau, cfg.sigma);

    for k in 1..=cfg.max_iterations {
        let ps = p.0.as_slice_mut().expect("standard layout is contiguous");
        metric_weights(m, ps, &mut qx, &mut qy);
        std::mem::swap(&mut u, &mut u_prev);
        let prev = u_prev.as_slice().expect("standard layout is contiguous");
        let us = u.as_slice_mut().expect("standard layout is contiguous");
        divergence_kernel(rows, cols, &qx, &qy, us, |i, adj| {
            prox(prev[i] - tau * adj, fs[i], m.coeffs[i].sqrt_g)
        });
        let us: &[f64] = us;
        gradient_kernel(m, ps, |i| 2.0 * us[i] - prev[i], |c, lv, pv| dual_step(pv, lv, sigma, c.sqrt_g));

        final_change = relative_change(&u, &u_prev);
        iterations = k;
        if let Some(energy_of) = trace_energy {
            trace.push(TraceRow {
                iteration: k,
                energy: energy_of(&u)?,
                primal_change: final_change,
            });
        }
        // a cold start leaves u = f unchanged on the first step
        if k > 1 && cfg.convergence_tol.is_some_and(|tol| final_change < tol) {
            break;
        }
    }

    Ok(Solution {
        u,
        p,
        iterations,
        final_change,
        trace,
    })
}

/// `p ← proj_{‖·‖ ≤ √G}(p + σ·lg)` at one pixel.
#[inline(always)]
fn dual_step(pv: &mut [f64], lv: [f64; 3], sigma: f64, sqrt_g: f64) {
    let a = pv[0] + sigma * lv[0];
    let b = pv[1] + sigma * lv[1];
    let c = pv[2] + sigma * lv[2];
    let s = ((a * a + b * b + c * c).sqrt() / sqrt_g).max(1.0);
    pv[0] = a / s;
    pv[1] = b / s;
    pv[2] = c / s;
}

fn relative_change(u: &Field, prev: &Field) -> f64 {
    let (mut diff, mut base) = (0.0, 0.0);
    for (a, b) in u.iter().zip(prev.iter()) {
        diff += (a - b) * (a - b);
        base += b * b;
    }
    if base > 0.0 {
        (diff / base).sqrt()
    } else {
        diff.sqrt()
    }
}

//! Minimisation of `‖L_g u‖_g + λ Σ (u − f log u)·√G` over `u ∈ [u_min, u_max]`.
//!
//! The g-tensor norm is dualised and the saddle-point problem is solved with
//! a first-order primal-dual iteration. Both proximal maps are closed-form:
//! the data prox is the positive root of a quadratic, the dual prox a radial
//! projection onto balls of radius `√G`.

mod energy;
mod primal_dual;
mod prox;
mod rof;

pub use energy::{energy, energy_terms, EnergyTerms};
pub use primal_dual::{primal_dual_solve, Solution, TraceRow};
pub use prox::{prox_data, prox_dual, prox_kl_scalar};
pub use rof::{rof_manifold_solve, rof_prox_scalar};

use crate::error::{Error, Result};
use crate::manifold::operator_norm_bound;

/// Data weight used when none is given: 180/255 on the `[1, 2]` box.
pub const DEFAULT_LAMBDA: f64 = 180.0 / 255.0;
pub const DEFAULT_U_MIN: f64 = 1.0;
pub const DEFAULT_U_MAX: f64 = 2.0;
pub const DEFAULT_MAX_ITERATIONS: usize = 50;
/// Relative primal change used when early stopping is switched on.
pub const DEFAULT_EARLY_STOP_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub max_iterations: usize,
    pub tau: f64,
    pub sigma: f64,
    /// Stop once `‖u_{k+1} − u_k‖ / ‖u_k‖` drops below this value. `None`
    /// always runs `max_iterations`.
    pub convergence_tol: Option<f64>,
    /// Record energy and primal change after every iteration.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let step = 1.0 / operator_norm_bound().sqrt();
        Self {
            lambda: DEFAULT_LAMBDA,
            u_min: DEFAULT_U_MIN,
            u_max: DEFAULT_U_MAX,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tau: step,
            sigma: step,
            convergence_tol: None,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    /// Checked constructor with the default symmetric step sizes.
    pub fn new(lambda: f64, u_min: f64, u_max: f64, max_iterations: usize) -> Result<Self> {
        let cfg = Self {
            lambda,
            u_min,
            u_max,
            max_iterations,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_steps(mut self, tau: f64, sigma: f64) -> Result<Self> {
        self.tau = tau;
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be > 0, got {}", self.lambda));
        }
        if !(self.u_min > 0.0) {
            return fail(format!("u_min must be > 0, got {}", self.u_min));
        }
        if !(self.u_max > self.u_min && self.u_max.is_finite()) {
            return fail(format!(
                "u_max must exceed u_min, got [{}, {}]",
                self.u_min, self.u_max
            ));
        }
        if !(self.tau > 0.0 && self.sigma > 0.0) {
            return fail(format!(
                "step sizes must be positive, got tau={} sigma={}",
                self.tau, self.sigma
            ));
        }
        // Allow the last-ulp excess of the default 1/√bound split.
        let limit = (1.0 / operator_norm_bound()) * (1.0 + 1e-12);
        if self.tau * self.sigma > limit {
            return fail(format!(
                "tau*sigma = {} exceeds 1/(8+4√2) = {}",
                self.tau * self.sigma,
                1.0 / operator_norm_bound()
            ));
        }
        if let Some(tol) = self.convergence_tol {
            if !(tol > 0.0) {
                return fail(format!("convergence tolerance must be > 0, got {tol}"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.u_min, self.u_max)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.u_min + self.u_max)
    }
}

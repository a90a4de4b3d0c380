use crate::error::{ensure_shape, Error, Result};
use crate::manifold::{apply_lg, MetricField};
use crate::Field;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    /// `‖L_g u‖_g = Σ √(G · Σ_l (L_g u)_l²)`
    pub regulariser: f64,
    /// `λ Σ (u − f log u)·√G`
    pub data: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.regulariser + self.data
    }
}

pub fn energy_terms(u: &Field, f: &Field, m: &MetricField, lambda: f64) -> Result<EnergyTerms> {
    ensure_shape(m.dim(), u.dim())?;
    ensure_shape(m.dim(), f.dim())?;
    if let Some(bad) = u.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("energy needs u > 0, found {bad}")));
    }
    let lg = apply_lg(u, m)?;
    let regulariser = lg
        .pixel_norms()
        .iter()
        .zip(m.g().iter())
        .map(|(n, g)| (g * n * n).sqrt())
        .sum();
    let data = lambda
        * u.iter()
            .zip(f.iter())
            .zip(m.sqrt_g().iter())
            .map(|((u, f), sg)| (u - f * u.ln()) * sg)
            .sum::<f64>();
    Ok(EnergyTerms { regulariser, data })
}

pub fn energy(u: &Field, f: &Field, m: &MetricField, lambda: f64) -> Result<f64> {
    energy_terms(u, f, m, lambda).map(|t| t.total())
}

use serde::Serialize;

use super::lagrangian_rhs;
use crate::density::Density;
use crate::energy::{LagrangianField, ParticleState};
use crate::error::{QuantError, Result};
use crate::interp::cubic_nodal;
use crate::particle_flow::velocity_for;

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub n: usize,
    /// R^i = ∂_tX^i - (rescaled discrete velocity at the sampled X^i).
    pub residuals: Vec<f64>,
    pub sup_norm: f64,
}

/// Defect of the continuum solution sampled at θ_i = (i - ½)/N when inserted
/// into the rescaled particle system. Both ∂_tX and X are interpolated
/// (cubic) from the field's grid; requires N ≤ M/4.
pub fn consistency_residual(field: &LagrangianField, rho: &Density, n: usize) -> Result<ResidualReport> {
    if n == 0 || 4 * n > field.m() {
        return Err(QuantError::InvalidParameter(format!("N = {n} exceeds a quarter of the grid resolution {}", field.m())));
    }
    let dt_x = lagrangian_rhs(field, rho)?;
    let thetas: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
    let xs: Vec<f64> = thetas.iter().map(|&t| field.sample(t)).collect();
    let state = ParticleState::new(xs)?;
    let mut v = vec![0.0; n];
    velocity_for(rho).velocity(state.positions(), &mut v)?;
    let residuals: Vec<f64> = thetas.iter().zip(&v).map(|(&t, vi)| cubic_nodal(&dt_x, t) - vi).collect();
    let sup_norm = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(ResidualReport { n, residuals, sup_norm })
}

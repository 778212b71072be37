use serde::Serialize;

use super::{Clock, PdeConfig};
use crate::density::Density;
use crate::energy::LagrangianField;
use crate::error::{QuantError, Result};

/// Per-cell quantities shared by the right-hand side and the energy.
struct CellData {
    slope: Vec<f64>,
    rho: Vec<f64>,
    drho: Vec<f64>,
}

fn cell_data(x: &[f64], rho: &Density) -> Result<CellData> {
    let m = x.len() - 1;
    let mf = m as f64;
    let mut slope = Vec::with_capacity(m);
    let mut r = Vec::with_capacity(m);
    let mut dr = Vec::with_capacity(m);
    let uniform = rho.is_uniform();
    for w in x.windows(2) {
        slope.push(mf * (w[1] - w[0]));
        let xm = (0.5 * (w[0] + w[1])).clamp(0.0, 1.0);
        if uniform {
            r.push(1.0);
            dr.push(0.0);
        } else {
            r.push(rho.value(xm));
            dr.push(rho.derivative(xm, 1)?);
        }
    }
    Ok(CellData { slope, rho: r, drho: dr })
}

/// Nodal ∂_tX for the L²-gradient of the midpoint-rule energy (1/12) h Σ ρ(X_{j+½}) s_j³.
///
/// At interior nodes this is (1/4)D⁺(ρ s²) - (1/24)(ρ' s³ averaged), a centered
/// second-order approximation of ½ρ(X)X_θX_θθ + (1/6)ρ'(X)X_θ³.
#[allow(clippy::needless_range_loop)]
fn rhs_from_cells(c: &CellData, out: &mut [f64]) {
    let m = c.slope.len();
    let mf = m as f64;
    out[0] = 0.0;
    out[m] = 0.0;
    for j in 1..m {
        let (sl, sr) = (c.slope[j - 1], c.slope[j]);
        let flux_r = c.rho[j] * sr * sr;
        let flux_l = c.rho[j - 1] * sl * sl;
        let source = c.drho[j] * sr * sr * sr + c.drho[j - 1] * sl * sl * sl;
        out[j] = 0.25 * mf * (flux_r - flux_l) - source / 24.0;
    }
}

fn energy_from_cells(c: &CellData) -> f64 {
    let h = 1.0 / c.slope.len() as f64;
    c.slope.iter().zip(&c.rho).map(|(s, r)| r * s * s * s).sum::<f64>() * h / 12.0
}

/// Time derivative of the Lagrangian map at every node (zero at the pinned ends).
pub fn lagrangian_rhs(field: &LagrangianField, rho: &Density) -> Result<Vec<f64>> {
    let x = field.values();
    let c = cell_data(x, rho)?;
    if let Some((j, s)) = c.slope.iter().enumerate().find(|(_, s)| !(**s > 0.0)) {
        return Err(QuantError::SlopeViolation { index: j, time: 0.0, slope: *s, lo: 0.0, hi: f64::INFINITY });
    }
    let mut out = vec![0.0; x.len()];
    rhs_from_cells(&c, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LagrangianTrajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub fields: Vec<LagrangianField>,
    pub energies: Vec<f64>,
    pub steps: usize,
    /// Largest energy increase over a single step (≤ 0 when dissipation is exact).
    pub max_energy_increase: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    /// [λ^{2/3} c₀, C₀ / λ^{2/3}] from the initial slope range.
    pub band: (f64, f64),
    /// Slopes stayed in `band` up to a relative slack of 1e-3.
    pub band_ok: bool,
}

/// Explicit Euler in time, dt = cfl · h² / (2 a_max), a = ½ ρ(X) ∂_θX.
///
/// Aborts when a slope falls below a quarter of the lower band edge.
pub fn lagrangian_integrate(field0: &LagrangianField, rho: &Density, cfg: &PdeConfig) -> Result<LagrangianTrajectory> {
    cfg.validate()?;
    rho.check_flow_admissible()?;
    let m = field0.m();
    let h = 1.0 / m as f64;
    let slopes0 = field0.slopes();
    let c0 = slopes0.iter().copied().fold(f64::INFINITY, f64::min);
    let cap0 = slopes0.iter().copied().fold(0.0, f64::max);
    let l23 = rho.lambda().powf(2.0 / 3.0);
    let band = (l23 * c0, cap0 / l23);
    let abort_below = 0.25 * band.0;

    let mut x = field0.values().to_vec();
    let mut rhs = vec![0.0; m + 1];
    let mut traj = LagrangianTrajectory {
        times: Vec::new(),
        fields: Vec::new(),
        energies: Vec::new(),
        steps: 0,
        max_energy_increase: f64::NEG_INFINITY,
        slope_min: c0,
        slope_max: cap0,
        band,
        band_ok: true,
    };
    let mut clock = Clock::new(cfg);
    let mut cells = cell_data(&x, rho)?;
    let mut energy = energy_from_cells(&cells);
    loop {
        if clock.take_record() {
            traj.times.push(clock.t);
            traj.fields.push(LagrangianField::from_raw(x.clone()));
            traj.energies.push(energy);
        }
        if clock.done() {
            break;
        }
        let a_max = cells.slope.iter().zip(&cells.rho).map(|(s, r)| 0.5 * r * s).fold(0.0, f64::max);
        let dt = clock.step(cfg.cfl * h * h / (2.0 * a_max));
        rhs_from_cells(&cells, &mut rhs);
        for j in 1..m {
            x[j] += dt * rhs[j];
        }
        traj.steps += 1;
        cells = cell_data(&x, rho)?;
        for (j, &s) in cells.slope.iter().enumerate() {
            if !s.is_finite() {
                return Err(QuantError::NonFinite { time: clock.t });
            }
            if s < abort_below {
                return Err(QuantError::SlopeViolation { index: j, time: clock.t, slope: s, lo: band.0, hi: band.1 });
            }
            traj.slope_min = traj.slope_min.min(s);
            traj.slope_max = traj.slope_max.max(s);
        }
        let e = energy_from_cells(&cells);
        traj.max_energy_increase = traj.max_energy_increase.max(e - energy);
        energy = e;
    }
    if traj.steps == 0 {
        traj.max_energy_increase = 0.0;
    }
    traj.band_ok = traj.slope_min >= band.0 * (1.0 - 1e-3) && traj.slope_max <= band.1 * (1.0 + 1e-3);
    Ok(traj)
}

impl LagrangianTrajectory {
    pub fn final_field(&self) -> &LagrangianField {
        self.fields.last().expect("trajectory records at least one field")
    }
}

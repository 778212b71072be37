use serde::Serialize;

use super::{Clock, PdeConfig};
use crate::density::Density;
use crate::error::{QuantError, Result};

/// Positive periodic density at cell centres x_j = (j + ½)/M, j = 0..M-1, unit mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerianField {
    values: Vec<f64>,
}

impl EulerianField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(QuantError::InvalidParameter("field needs at least two cells".into()));
        }
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(QuantError::PositivityLoss { index: j, time: 0.0, value: *v });
        }
        let mass = values.iter().sum::<f64>() / values.len() as f64;
        if (mass - 1.0).abs() > 1e-10 {
            return Err(QuantError::MassMismatch(mass, 1.0));
        }
        Ok(EulerianField { values })
    }

    /// Samples `f` at the cell centres and rescales to unit mean.
    pub fn from_fn<F: Fn(f64) -> f64>(m: usize, f: F) -> Result<Self> {
        let v: Vec<f64> = (0..m).map(|j| f((j as f64 + 0.5) / m as f64)).collect();
        Self::normalized(v)
    }

    /// Rescales positive values to unit mean.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let mass = values.iter().sum::<f64>() / values.len() as f64;
        if !(mass > 0.0) {
            return Err(QuantError::InvalidParameter("nonpositive total mass".into()));
        }
        Self::new(values.into_iter().map(|v| v / mass).collect())
    }

    pub fn constant(m: usize) -> Self {
        EulerianField { values: vec![1.0; m] }
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.m() as f64
    }

    /// h Σ |f_j - g_j|.
    pub fn l1_distance(&self, other: &EulerianField) -> Result<f64> {
        if other.m() != self.m() {
            return Err(QuantError::LengthMismatch { expected: self.m(), got: other.m() });
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() / self.m() as f64)
    }

    /// γ ρ^{1/3} sampled at cell centres and normalized on the grid.
    pub fn cube_root_profile(rho: &Density, m: usize) -> Result<Self> {
        Self::from_fn(m, |x| rho.value(x).cbrt())
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        EulerianField { values }
    }
}

/// Writes ∂_t f_j = -(F_{j+½} - F_{j-½})/h, F = v·f_upwind, v = (1/6) D⁺(ρ/f³).
/// Returns (max diffusivity ρ/(2f³), max |v|) for the step restriction.
fn rhs_into(f: &[f64], rho_c: &[f64], out: &mut [f64], flux: &mut [f64]) -> (f64, f64) {
    let m = f.len();
    let mf = m as f64;
    let mut d_max = 0.0f64;
    let mut v_max = 0.0f64;
    // flux[j] lives on the face between cell j and j+1 (periodic).
    for j in 0..m {
        let k = if j + 1 == m { 0 } else { j + 1 };
        let gj = rho_c[j] / (f[j] * f[j] * f[j]);
        let gk = rho_c[k] / (f[k] * f[k] * f[k]);
        let v = mf * (gk - gj) / 6.0;
        flux[j] = if v >= 0.0 { v * f[j] } else { v * f[k] };
        d_max = d_max.max(0.5 * gj);
        v_max = v_max.max(v.abs());
    }
    for j in 0..m {
        let left = if j == 0 { flux[m - 1] } else { flux[j - 1] };
        out[j] = -mf * (flux[j] - left);
    }
    (d_max, v_max)
}

fn centers_density(rho: &Density, m: usize) -> Vec<f64> {
    (0..m).map(|j| rho.value((j as f64 + 0.5) / m as f64)).collect()
}

/// Conservative flux-form time derivative of f.
pub fn eulerian_rhs(f: &EulerianField, rho: &Density) -> Result<Vec<f64>> {
    if let Some((j, v)) = f.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(QuantError::PositivityLoss { index: j, time: 0.0, value: *v });
    }
    let m = f.m();
    let rho_c = centers_density(rho, m);
    let mut out = vec![0.0; m];
    let mut flux = vec![0.0; m];
    rhs_into(f.values(), &rho_c, &mut out, &mut flux);
    Ok(out)
}

/// Monitors of u = f/ρ^{1/3} against the levels c ∈ {min u₀, max u₀}.
///
/// `weighted` tracks ∫ρ^{1/3}(u - c)_± (the quantity the scheme contracts);
/// `unweighted` tracks ∫(u - c)_± and is reported only.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonMonitor {
    pub c_min: f64,
    pub c_max: f64,
    /// Largest single-step increase of any of the four weighted quantities.
    pub max_increase_weighted: f64,
    /// Same for the unweighted quantities.
    pub max_increase_unweighted: f64,
    /// Per record: [∫m(u-c_min)₋, ∫m(u-c_min)₊, ∫m(u-c_max)₋, ∫m(u-c_max)₊].
    pub weighted: Vec<[f64; 4]>,
    pub unweighted: Vec<[f64; 4]>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
}

fn level_integrals(f: &[f64], m_c: &[f64], c_min: f64, c_max: f64) -> ([f64; 4], [f64; 4]) {
    let h = 1.0 / f.len() as f64;
    let mut w = [0.0; 4];
    let mut u = [0.0; 4];
    for (fj, mj) in f.iter().zip(m_c) {
        let uj = fj / mj;
        let parts = [
            (c_min - uj).max(0.0),
            (uj - c_min).max(0.0),
            (c_max - uj).max(0.0),
            (uj - c_max).max(0.0),
        ];
        for k in 0..4 {
            w[k] += h * mj * parts[k];
            u[k] += h * parts[k];
        }
    }
    (w, u)
}

#[derive(Debug, Clone, Serialize)]
pub struct EulerianTrajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub fields: Vec<EulerianField>,
    pub steps: usize,
    /// max |h Σ f - 1| over all steps.
    pub mass_drift: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub comparison: ComparisonMonitor,
}

impl EulerianTrajectory {
    pub fn final_field(&self) -> &EulerianField {
        self.fields.last().expect("trajectory records at least one field")
    }
}

/// Explicit Euler with dt = cfl / (2 D_max/h² + 2 v_max/h), D = ρ/(2f³).
pub fn eulerian_integrate(f0: &EulerianField, rho: &Density, cfg: &PdeConfig) -> Result<EulerianTrajectory> {
    cfg.validate()?;
    rho.check_flow_admissible()?;
    let m = f0.m();
    let mf = m as f64;
    let rho_c = centers_density(rho, m);
    let m_c: Vec<f64> = rho_c.iter().map(|r| r.cbrt()).collect();
    let u0: Vec<f64> = f0.values().iter().zip(&m_c).map(|(f, w)| f / w).collect();
    let c_min = u0.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = u0.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut f = f0.values().to_vec();
    let mut out = vec![0.0; m];
    let mut flux = vec![0.0; m];
    let (mut w_prev, mut u_prev) = level_integrals(&f, &m_c, c_min, c_max);
    let mut traj = EulerianTrajectory {
        times: Vec::new(),
        fields: Vec::new(),
        steps: 0,
        mass_drift: 0.0,
        f_min: f.iter().copied().fold(f64::INFINITY, f64::min),
        f_max: f.iter().copied().fold(0.0, f64::max),
        comparison: ComparisonMonitor {
            c_min,
            c_max,
            max_increase_weighted: 0.0,
            max_increase_unweighted: 0.0,
            weighted: Vec::new(),
            unweighted: Vec::new(),
            u_min: Vec::new(),
            u_max: Vec::new(),
        },
    };
    let mass0 = f.iter().sum::<f64>() / mf;
    let mut clock = Clock::new(cfg);
    loop {
        if clock.take_record() {
            traj.times.push(clock.t);
            traj.fields.push(EulerianField::from_raw(f.clone()));
            let cm = &mut traj.comparison;
            cm.weighted.push(w_prev);
            cm.unweighted.push(u_prev);
            let (lo, hi) = f.iter().zip(&m_c).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a / b), hi.max(a / b)));
            cm.u_min.push(lo);
            cm.u_max.push(hi);
        }
        if clock.done() {
            break;
        }
        let (d_max, v_max) = rhs_into(&f, &rho_c, &mut out, &mut flux);
        let dt = clock.step(cfg.cfl / (2.0 * d_max * mf * mf + 2.0 * v_max * mf));
        for j in 0..m {
            f[j] += dt * out[j];
        }
        traj.steps += 1;
        for (j, &v) in f.iter().enumerate() {
            if !v.is_finite() {
                return Err(QuantError::NonFinite { time: clock.t });
            }
            if !(v > 0.0) {
                return Err(QuantError::PositivityLoss { index: j, time: clock.t, value: v });
            }
            traj.f_min = traj.f_min.min(v);
            traj.f_max = traj.f_max.max(v);
        }
        let mass = f.iter().sum::<f64>() / mf;
        traj.mass_drift = traj.mass_drift.max((mass - mass0).abs());
        let (w, u) = level_integrals(&f, &m_c, c_min, c_max);
        for k in 0..4 {
            traj.comparison.max_increase_weighted = traj.comparison.max_increase_weighted.max(w[k] - w_prev[k]);
            traj.comparison.max_increase_unweighted = traj.comparison.max_increase_unweighted.max(u[k] - u_prev[k]);
        }
        w_prev = w;
        u_prev = u;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_is_stationary() {
        let f = EulerianField::constant(32);
        assert!(eulerian_rhs(&f, &Density::uniform()).unwrap().iter().all(|v| *v == 0.0));
        let tr = eulerian_integrate(&f, &Density::uniform(), &PdeConfig::new(0.1)).unwrap();
        assert!(tr.final_field().values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rhs_conserves_mass() {
        let f = EulerianField::from_fn(64, |x| 1.0 + 0.3 * (2.0 * PI * x).sin() + 0.1 * (6.0 * PI * x).cos()).unwrap();
        for rho in [Density::uniform(), Density::cosine(0.2).unwrap()] {
            let s: f64 = eulerian_rhs(&f, &rho).unwrap().iter().sum();
            assert!(s.abs() < 1e-9, "sum {s}");
        }
    }

    #[test]
    fn cube_root_profile_is_discrete_steady_state() {
        let rho = Density::cosine(0.05).unwrap();
        let f = EulerianField::cube_root_profile(&rho, 256).unwrap();
        assert!(eulerian_rhs(&f, &rho).unwrap().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn relaxes_to_constant_with_monotone_envelopes() {
        let f0 = EulerianField::from_fn(64, |x| 1.0 + 0.2 * (2.0 * PI * x).cos()).unwrap();
        let tr = eulerian_integrate(&f0, &Density::uniform(), &PdeConfig::new(0.5).with_record_count(20)).unwrap();
        assert!(tr.final_field().l1_distance(&EulerianField::constant(64)).unwrap() < 1e-3);
        assert!(tr.comparison.max_increase_weighted <= 1e-12);
        assert!(tr.mass_drift < 1e-12);
        for w in tr.comparison.u_min.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for w in tr.comparison.u_max.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(EulerianField::new(vec![1.0, -1.0, 3.0]).is_err());
        assert!(EulerianField::new(vec![1.0, 2.0]).is_err());
        assert!(EulerianField::normalized(vec![1.0, 2.0]).is_ok());
    }
}

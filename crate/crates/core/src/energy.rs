//! Quantization energy of N particles and of a continuum transport map.

use serde::Serialize;

use crate::density::Density;
use crate::error::{QuantError, Result};
use crate::interp::cubic_nodal;

/// Tolerance for per-cell energy integrals.
const CELL_TOL: f64 = 1e-15;

/// Ordered particle positions in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    positions: Vec<f64>,
}

impl ParticleState {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(QuantError::InvalidParameter("empty particle state".into()));
        }
        for &x in &positions {
            if !(x > 0.0 && x < 1.0) {
                return Err(QuantError::OutOfRange { value: x, lo: 0.0, hi: 1.0 });
            }
        }
        check_increasing(&positions)?;
        Ok(ParticleState { positions })
    }

    /// Midpoint lattice x^i = (i - ½)/N.
    pub fn lattice(n: usize) -> Self {
        let nf = n as f64;
        ParticleState { positions: (1..=n).map(|i| (i as f64 - 0.5) / nf).collect() }
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    /// x⁰ = -x¹.
    pub fn ghost_left(&self) -> f64 {
        -self.positions[0]
    }

    /// x^{N+1} = 2 - x^N.
    pub fn ghost_right(&self) -> f64 {
        2.0 - self.positions[self.n() - 1]
    }

    /// Positions with both ghosts attached: x⁰, x¹, …, x^N, x^{N+1}.
    pub fn with_ghosts(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n() + 2);
        v.push(self.ghost_left());
        v.extend_from_slice(&self.positions);
        v.push(self.ghost_right());
        v
    }

    /// Spacings x^{i+1} - x^i for i = 1..N-1.
    pub fn spacings(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub(crate) fn check_increasing(xs: &[f64]) -> Result<()> {
    for (i, w) in xs.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(QuantError::NonMonotone { index: i, left: w[0], right: w[1] });
        }
    }
    Ok(())
}

/// Which cells the outermost particles own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConvention {
    /// Outer cells end at 0 and 1.
    Static,
    /// Ghosts x⁰ = -x¹, x^{N+1} = 2 - x^N with the density reflected across the ends.
    Mirror,
}

/// Monotone transport map sampled at θ_j = j/M with X_0 = 0, X_M = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianField {
    values: Vec<f64>,
}

impl LagrangianField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(QuantError::InvalidParameter("field needs at least two cells".into()));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 1.0 {
            return Err(QuantError::InvalidParameter("field must satisfy X(0) = 0, X(1) = 1".into()));
        }
        check_increasing(&values)?;
        Ok(LagrangianField { values })
    }

    /// Samples `map` at the nodes and pins the endpoints.
    pub fn from_fn<F: Fn(f64) -> f64>(m: usize, map: F) -> Result<Self> {
        let mut v: Vec<f64> = (0..=m).map(|j| map(j as f64 / m as f64)).collect();
        v[0] = 0.0;
        v[m] = 1.0;
        Self::new(v)
    }

    pub fn identity(m: usize) -> Self {
        LagrangianField { values: (0..=m).map(|j| j as f64 / m as f64).collect() }
    }

    /// Number of cells M.
    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 / self.m() as f64
    }

    /// Cell slopes M (X_{j+1} - X_j).
    pub fn slopes(&self) -> Vec<f64> {
        let mf = self.m() as f64;
        self.values.windows(2).map(|w| mf * (w[1] - w[0])).collect()
    }

    /// Cubic interpolation of X at θ.
    pub fn sample(&self, theta: f64) -> f64 {
        cubic_nodal(&self.values, theta)
    }

    /// Fails on the first slope outside [lo, hi].
    pub fn check_slopes(&self, lo: f64, hi: f64) -> Result<()> {
        for (j, s) in self.slopes().into_iter().enumerate() {
            if !(s >= lo && s <= hi) {
                return Err(QuantError::SlopeViolation { index: j, time: 0.0, slope: s, lo, hi });
            }
        }
        Ok(())
    }

    /// Builds a field from raw nodal values without checks (solver-internal).
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        LagrangianField { values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub value: f64,
    pub r: f64,
    pub c_r: f64,
}

/// C_r = 1 / (2^r (r + 1)).
pub fn c_r(r: f64) -> f64 {
    1.0 / (2f64.powf(r) * (r + 1.0))
}

fn check_exponent(r: f64) -> Result<()> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(QuantError::InvalidParameter(format!("exponent {r} must be >= 1")));
    }
    Ok(())
}

/// Cell boundaries x^{1/2}, …, x^{N+1/2} under `conv`.
fn cell_edges(state: &ParticleState, conv: BoundaryConvention) -> Vec<f64> {
    let x = state.positions();
    let n = x.len();
    let mut e = Vec::with_capacity(n + 1);
    match conv {
        BoundaryConvention::Static => e.push(0.0),
        BoundaryConvention::Mirror => e.push(0.5 * (state.ghost_left() + x[0])),
    }
    for w in x.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    match conv {
        BoundaryConvention::Static => e.push(1.0),
        BoundaryConvention::Mirror => e.push(0.5 * (x[n - 1] + state.ghost_right())),
    }
    e
}

/// ∫_a^b |y - c|^r ρ(y) dy for [a, b] ⊂ [0, 1].
fn cell_energy(rho: &Density, a: f64, b: f64, c: f64, r: f64) -> f64 {
    if rho.is_uniform() {
        let p = r + 1.0;
        let side = |d: f64| d.abs().powf(p) / p;
        return if c <= a {
            side(b - c) - side(a - c)
        } else if c >= b {
            side(c - a) - side(c - b)
        } else {
            side(b - c) + side(c - a)
        };
    }
    if r == 2.0 {
        // Closed-form-friendly: smooth integrand, no kink at c.
        return rho.integrate_weighted(|y| (y - c) * (y - c), a, b, &[], CELL_TOL);
    }
    rho.integrate_weighted(|y| (y - c).abs().powf(r), a, b, &[c], CELL_TOL)
}

/// F_{N,r}(x) = Σ_i ∫_{cell i} |y - x^i|^r ρ(y) dy, outer cells ending at 0 and 1.
pub fn discrete_energy(state: &ParticleState, rho: &Density, r: f64) -> Result<EnergyReport> {
    discrete_energy_with(state, rho, r, BoundaryConvention::Static)
}

/// Energy under an explicit boundary convention. The mirror ghosts place the
/// outer cell edges at exactly 0 and 1, so both conventions give the same value.
pub fn discrete_energy_with(state: &ParticleState, rho: &Density, r: f64, conv: BoundaryConvention) -> Result<EnergyReport> {
    check_exponent(r)?;
    check_increasing(state.positions())?;
    let e = cell_edges(state, conv);
    let value = state
        .positions()
        .iter()
        .enumerate()
        .map(|(i, &x)| cell_energy(rho, e[i].clamp(0.0, 1.0), e[i + 1].clamp(0.0, 1.0), x, r))
        .sum();
    Ok(EnergyReport { value, r, c_r: c_r(r) })
}

/// ∂F_{N,2}/∂x^i = -2 ∫_{cell i} (y - x^i) ρ(y) dy.
pub fn gradient_f_n2(state: &ParticleState, rho: &Density, conv: BoundaryConvention) -> Result<Vec<f64>> {
    check_increasing(state.positions())?;
    let e = cell_edges(state, conv);
    state
        .positions()
        .iter()
        .enumerate()
        .map(|(i, &x)| rho.moments(e[i], e[i + 1], x).map(|(_, mo)| -2.0 * mo))
        .collect()
}

/// m_i = ρ-mass of the Voronoi cell of x^i within [0, 1].
pub fn optimal_masses(state: &ParticleState, rho: &Density) -> Result<Vec<f64>> {
    check_increasing(state.positions())?;
    let e = cell_edges(state, BoundaryConvention::Static);
    Ok(e.windows(2).map(|w| rho.mass_between(w[0], w[1])).collect())
}

/// C_r Σ_j h ρ(X_{j+½}) |s_j|^{r+1}, s_j the cell slope, X_{j+½} the cell average.
pub fn continuum_energy(field: &LagrangianField, rho: &Density, r: f64) -> Result<EnergyReport> {
    check_exponent(r)?;
    let v = field.values();
    let h = 1.0 / field.m() as f64;
    let p = r + 1.0;
    let mut acc = 0.0;
    for w in v.windows(2) {
        let s = (w[1] - w[0]) / h;
        let xm = 0.5 * (w[0] + w[1]);
        acc += rho.value(xm.clamp(0.0, 1.0)) * s.abs().powf(p);
    }
    let cr = c_r(r);
    Ok(EnergyReport { value: cr * h * acc, r, c_r: cr })
}

/// |N^r F_{N,r}(x) - 𝓕[X]| for x^i = X((i - ½)/N), one entry per N.
pub fn taylor_limit_check(field: &LagrangianField, rho: &Density, r: f64, n_list: &[usize]) -> Result<Vec<f64>> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QuantError::InvalidParameter("N list must be increasing".into()));
    }
    let reference = continuum_energy(field, rho, r)?.value;
    n_list
        .iter()
        .map(|&n| {
            let xs: Vec<f64> = (1..=n).map(|i| field.sample((i as f64 - 0.5) / n as f64)).collect();
            let state = ParticleState::new(xs)?;
            let f = discrete_energy(&state, rho, r)?.value;
            Ok(((n as f64).powf(r) * f - reference).abs())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form for ρ ≡ 1, r = 2: x¹³/3 + Σ (x^{i+1} - x^i)³/12 + (1 - x^N)³/3.
    fn uniform_formula(x: &[f64]) -> f64 {
        let n = x.len();
        x[0].powi(3) / 3.0 + x.windows(2).map(|w| (w[1] - w[0]).powi(3) / 12.0).sum::<f64>() + (1.0 - x[n - 1]).powi(3) / 3.0
    }

    #[test]
    fn two_particle_energy() {
        let s = ParticleState::new(vec![0.25, 0.75]).unwrap();
        let e = discrete_energy(&s, &Density::uniform(), 2.0).unwrap();
        assert!((e.value - 1.0 / 48.0).abs() < 1e-15);
        assert!((e.c_r - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn lattice_scaling_identity() {
        for n in [1, 2, 4, 8, 16, 64] {
            let e = discrete_energy(&ParticleState::lattice(n), &Density::uniform(), 2.0).unwrap();
            assert!(((n * n) as f64 * e.value - 1.0 / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conventions_agree() {
        let s = ParticleState::new(vec![0.1, 0.35, 0.8]).unwrap();
        let rho = Density::cosine(0.2).unwrap();
        let a = discrete_energy_with(&s, &rho, 2.0, BoundaryConvention::Static).unwrap().value;
        let b = discrete_energy_with(&s, &rho, 2.0, BoundaryConvention::Mirror).unwrap().value;
        assert!((a - b).abs() < 1e-15);
        let ga = gradient_f_n2(&s, &rho, BoundaryConvention::Static).unwrap();
        let gb = gradient_f_n2(&s, &rho, BoundaryConvention::Mirror).unwrap();
        for (p, q) in ga.iter().zip(&gb) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn single_particle_gradient() {
        let s = ParticleState::new(vec![0.3]).unwrap();
        let g = gradient_f_n2(&s, &Density::uniform(), BoundaryConvention::Mirror).unwrap();
        assert!((g[0] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn lattice_gradient_vanishes() {
        let g = gradient_f_n2(&ParticleState::lattice(7), &Density::uniform(), BoundaryConvention::Mirror).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn masses() {
        let s = ParticleState::new(vec![0.25, 0.75]).unwrap();
        let m = optimal_masses(&s, &Density::cosine(0.1).unwrap()).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-14 && (m[1] - 0.5).abs() < 1e-14);
        let m = optimal_masses(&ParticleState::lattice(5), &Density::uniform()).unwrap();
        assert!(m.iter().all(|v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn continuum_values() {
        let id = LagrangianField::identity(64);
        let u = Density::uniform();
        assert!((continuum_energy(&id, &u, 2.0).unwrap().value - 1.0 / 12.0).abs() < 1e-15);
        assert!((continuum_energy(&id, &u, 1.0).unwrap().value - 0.25).abs() < 1e-15);
        // Oracle for C_1: N cells of width h = 1/N, each ∫_{-h/2}^{h/2} |y| dy = h²/4, scaled by N.
        let n = 100.0;
        let h: f64 = 1.0 / n;
        assert!((c_r(1.0) - n * n * (h * h / 4.0)).abs() < 1e-15);
        let sq = |m: usize| continuum_energy(&LagrangianField::from_fn(m, |t| t * t).unwrap(), &u, 2.0).unwrap().value;
        let (e1, e2) = ((sq(128) - 1.0 / 6.0).abs(), (sq(256) - 1.0 / 6.0).abs());
        assert!(e2 < 1e-5 && e1 / e2 > 3.9);
    }

    #[test]
    fn taylor_identity_is_exact() {
        let errs = taylor_limit_check(&LagrangianField::identity(256), &Density::uniform(), 2.0, &[4, 8, 16]).unwrap();
        assert!(errs.iter().all(|e| *e < 1e-12));
    }

    #[test]
    fn rejects_bad_states() {
        assert!(ParticleState::new(vec![0.3, 0.3]).is_err());
        assert!(ParticleState::new(vec![0.0, 0.3]).is_err());
        assert!(ParticleState::new(vec![]).is_err());
        assert!(LagrangianField::new(vec![0.0, 0.6, 0.5, 1.0]).is_err());
        assert!(LagrangianField::new(vec![0.0, 0.5, 0.9]).is_err());
    }

    #[test]
    fn uniform_formula_matches() {
        let s = ParticleState::new(vec![0.05, 0.2, 0.21, 0.6, 0.93]).unwrap();
        let e = discrete_energy(&s, &Density::uniform(), 2.0).unwrap().value;
        assert!((e - uniform_formula(s.positions())).abs() < 1e-12);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn state_strategy() -> impl Strategy<Value = ParticleState> {
            (1usize..12).prop_flat_map(|n| {
                proptest::collection::vec(-0.3f64..0.3, n).prop_map(move |off| {
                    let nf = off.len() as f64;
                    ParticleState::new(off.iter().enumerate().map(|(i, o)| (i as f64 + 0.5 + o) / nf).collect()).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn uniform_energy_matches_closed_form(s in state_strategy()) {
                let e = discrete_energy(&s, &Density::uniform(), 2.0).unwrap().value;
                prop_assert!((e - super::uniform_formula(s.positions())).abs() < 1e-12);
            }

            #[test]
            fn masses_partition_unity(s in state_strategy(), eps in 0.0f64..0.9) {
                let m = optimal_masses(&s, &Density::cosine(eps).unwrap()).unwrap();
                prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                prop_assert!(m.iter().all(|v| *v >= 0.0));
            }

            #[test]
            fn gradient_matches_difference(s in state_strategy(), eps in 0.0f64..0.5) {
                let rho = Density::cosine(eps).unwrap();
                let g = gradient_f_n2(&s, &rho, BoundaryConvention::Mirror).unwrap();
                let h = 1e-6;
                for i in 0..s.n() {
                    let mut p = s.positions().to_vec();
                    let mut q = p.clone();
                    p[i] += h;
                    q[i] -= h;
                    let (Ok(sp), Ok(sq)) = (ParticleState::new(p), ParticleState::new(q)) else { continue };
                    let fd = (discrete_energy(&sp, &rho, 2.0).unwrap().value - discrete_energy(&sq, &rho, 2.0).unwrap().value) / (2.0 * h);
                    let scale = g[i].abs().max(1e-4 / (s.n() * s.n()) as f64);
                    prop_assert!((fd - g[i]).abs() <= 1e-6 * scale, "i={} fd={} g={}", i, fd, g[i]);
                }
            }

            #[test]
            fn resorting_is_idempotent(s in state_strategy()) {
                let mut v = s.positions().to_vec();
                v.sort_by(f64::total_cmp);
                let t = ParticleState::new(v).unwrap();
                let rho = Density::uniform();
                prop_assert_eq!(discrete_energy(&s, &rho, 2.0).unwrap().value, discrete_energy(&t, &rho, 2.0).unwrap().value);
            }
        }
    }
}

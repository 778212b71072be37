//! Exact Monge–Kantorovich distances on [0, 1] via distribution and quantile functions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density::Density;
use crate::energy::{discrete_energy, optimal_masses, ParticleState};
use crate::error::{QuantError, Result};
use crate::field_flow::EulerianField;
use crate::quadrature::integrate;

/// Tolerance for total-mass agreement.
const MASS_TOL: f64 = 1e-8;
/// Bisection tolerance for CDF crossings and quantiles.
const ROOT_TOL: f64 = 1e-12;
/// Interior samples per piece used to isolate CDF crossings.
const CROSSING_SAMPLES: usize = 16;

/// A finite measure on [0, 1].
#[derive(Debug, Clone)]
pub enum Measure {
    /// Σ m_i δ_{x_i}, positions increasing.
    Atomic { positions: Vec<f64>, masses: Vec<f64>, cumulative: Vec<f64> },
    Density(Density),
    /// Piecewise constant over the cells [j/M, (j+1)/M].
    Grid { values: Vec<f64>, cumulative: Vec<f64> },
}

impl Measure {
    pub fn atomic(positions: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if positions.len() != masses.len() {
            return Err(QuantError::LengthMismatch { expected: positions.len(), got: masses.len() });
        }
        if positions.windows(2).any(|w| w[1] < w[0]) {
            return Err(QuantError::InvalidParameter("atom positions must be sorted".into()));
        }
        if positions.iter().any(|x| !(0.0..=1.0).contains(x)) || masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(QuantError::InvalidParameter("atoms must lie in [0, 1] with nonnegative mass".into()));
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        Ok(Measure::Atomic { positions, masses, cumulative })
    }

    /// (1/N) Σ δ_{x^i}.
    pub fn empirical(state: &ParticleState) -> Self {
        let n = state.n();
        Self::atomic(state.positions().to_vec(), vec![1.0 / n as f64; n]).expect("particle states are sorted in (0, 1)")
    }

    pub fn weighted(state: &ParticleState, masses: Vec<f64>) -> Result<Self> {
        Self::atomic(state.positions().to_vec(), masses)
    }

    pub fn lebesgue() -> Self {
        Measure::Density(Density::uniform())
    }

    pub fn density(rho: &Density) -> Self {
        Measure::Density(rho.clone())
    }

    pub fn grid(field: &EulerianField) -> Self {
        Self::grid_values(field.values().to_vec())
    }

    pub(crate) fn grid_values(values: Vec<f64>) -> Self {
        let h = 1.0 / values.len() as f64;
        let mut cumulative = Vec::with_capacity(values.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for v in &values {
            acc += v * h;
            cumulative.push(acc);
        }
        Measure::Grid { values, cumulative }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Measure::Atomic { cumulative, .. } => cumulative.last().copied().unwrap_or(0.0),
            Measure::Density(rho) => rho.mass(),
            Measure::Grid { cumulative, .. } => cumulative[cumulative.len() - 1],
        }
    }

    /// F(x) = μ([0, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Measure::Atomic { positions, cumulative, .. } => {
                let k = positions.partition_point(|&p| p <= x);
                if k == 0 {
                    0.0
                } else {
                    cumulative[k - 1]
                }
            }
            Measure::Density(rho) => rho.mass_between(0.0, x),
            Measure::Grid { values, cumulative } => {
                let m = values.len();
                let s = x * m as f64;
                let j = (s.floor() as usize).min(m - 1);
                cumulative[j] + values[j] * (s - j as f64) / m as f64
            }
        }
    }

    /// F(x⁻) = μ([0, x)).
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Measure::Atomic { positions, cumulative, .. } => {
                let k = positions.partition_point(|&p| p < x);
                if k == 0 {
                    0.0
                } else {
                    cumulative[k - 1]
                }
            }
            _ => self.cdf(x),
        }
    }

    /// Points where F has jumps or kinks, within (0, 1).
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Measure::Atomic { positions, .. } => positions.clone(),
            Measure::Density(rho) => rho.breakpoints(),
            Measure::Grid { values, .. } => (1..values.len()).map(|j| j as f64 / values.len() as f64).collect(),
        }
    }

    /// Generalized inverse Q(s) = inf {x : F(x) ≥ s}.
    pub fn quantile(&self, s: f64) -> f64 {
        match self {
            Measure::Atomic { positions, cumulative, .. } => {
                let k = cumulative.partition_point(|&c| c < s - 1e-15);
                positions[k.min(positions.len() - 1)]
            }
            Measure::Grid { values, cumulative } => {
                let m = values.len();
                let k = cumulative.partition_point(|&c| c < s).clamp(1, m);
                let j = k - 1;
                if values[j] <= 0.0 {
                    return j as f64 / m as f64;
                }
                (j as f64 + (s - cumulative[j]) * m as f64 / values[j]).min(k as f64) / m as f64
            }
            Measure::Density(rho) => {
                let (mut lo, mut hi) = (0.0, 1.0);
                while hi - lo > 1e-15 {
                    let mid = 0.5 * (lo + hi);
                    if rho.mass_between(0.0, mid) < s {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if mid == lo && mid == hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// ∫_a^b |c - y|^r dν(y) for a continuous measure and a ≤ b.
    fn cost_against_point(&self, c: f64, a: f64, b: f64, r: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Measure::Density(rho) => rho.integrate_weighted(|y| (c - y).abs().powf(r), a, b, &[c], 1e-14),
            Measure::Grid { values, .. } => {
                let m = values.len();
                let p = r + 1.0;
                // ∫_lo^hi |c - y|^r dy in closed form.
                let prim = |y: f64| (y - c).signum() * (y - c).abs().powf(p) / p;
                let mut acc = 0.0;
                let j0 = ((a * m as f64).floor() as usize).min(m - 1);
                let j1 = ((b * m as f64).ceil() as usize).clamp(j0 + 1, m);
                for (j, v) in values.iter().enumerate().take(j1).skip(j0) {
                    let lo = (j as f64 / m as f64).max(a);
                    let hi = ((j + 1) as f64 / m as f64).min(b);
                    if hi > lo {
                        acc += v * (prim(hi) - prim(lo));
                    }
                }
                acc
            }
            Measure::Atomic { .. } => unreachable!("atomic measures are handled by level merging"),
        }
    }

    fn is_atomic(&self) -> bool {
        matches!(self, Measure::Atomic { .. })
    }
}

fn check_masses(mu: &Measure, nu: &Measure) -> Result<()> {
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > MASS_TOL || (a - 1.0).abs() > MASS_TOL {
        return Err(QuantError::MassMismatch(a, b));
    }
    Ok(())
}

/// MK₁(μ, ν) = ∫₀¹ |F_μ - F_ν|.
///
/// Between consecutive breakpoints of either measure, sign changes of the CDF
/// difference are bracketed on a sample grid and refined by bisection; each
/// signed piece is integrated by adaptive quadrature.
pub fn mk1(mu: &Measure, nu: &Measure) -> Result<f64> {
    check_masses(mu, nu)?;
    let mut pts = vec![0.0, 1.0];
    pts.extend(mu.breakpoints());
    pts.extend(nu.breakpoints());
    pts.retain(|x| (0.0..=1.0).contains(x));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let d = |x: f64| mu.cdf(x) - nu.cdf(x);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // Sample grid with one-sided limits at the piece ends.
        let mut xs = vec![a];
        let mut ds = vec![d(a)];
        for k in 0..CROSSING_SAMPLES {
            let x = a + (b - a) * (k as f64 + 0.5) / CROSSING_SAMPLES as f64;
            xs.push(x);
            ds.push(d(x));
        }
        xs.push(b);
        ds.push(mu.cdf_left(b) - nu.cdf_left(b));
        let mut cuts = vec![a];
        for k in 0..xs.len() - 1 {
            if ds[k] * ds[k + 1] < 0.0 {
                let (mut lo, mut hi) = (xs[k], xs[k + 1]);
                let lo_sign = ds[k].signum();
                while hi - lo > ROOT_TOL {
                    let mid = 0.5 * (lo + hi);
                    if d(mid).signum() == lo_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
            }
        }
        cuts.push(b);
        for c in cuts.windows(2) {
            if c[1] > c[0] {
                total += integrate(d, c[0], c[1], 1e-14).abs();
            }
        }
    }
    Ok(total)
}

/// Cumulative levels 0 = S_0 < … < S_k = 1 of an atomic measure with its atoms.
fn atomic_levels(m: &Measure) -> (&[f64], &[f64]) {
    match m {
        Measure::Atomic { positions, cumulative, .. } => (positions, cumulative),
        _ => unreachable!(),
    }
}

/// MK_r cost ∫₀¹ |Q_μ(s) - Q_ν(s)|^r ds of the monotone coupling (no r-th root).
pub fn mk_r(mu: &Measure, nu: &Measure, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(QuantError::InvalidParameter(format!("exponent {r} must be >= 1")));
    }
    check_masses(mu, nu)?;
    match (mu.is_atomic(), nu.is_atomic()) {
        (true, true) => {
            let (xa, ca) = atomic_levels(mu);
            let (xb, cb) = atomic_levels(nu);
            let (mut i, mut j) = (0, 0);
            let mut s = 0.0;
            let mut acc = 0.0;
            while i < xa.len() && j < xb.len() {
                let next = ca[i].min(cb[j]);
                acc += (next - s).max(0.0) * (xa[i] - xb[j]).abs().powf(r);
                s = next;
                if ca[i] <= next {
                    i += 1;
                }
                if cb[j] <= next {
                    j += 1;
                }
            }
            Ok(acc)
        }
        (true, false) | (false, true) => {
            let (atoms, cont) = if mu.is_atomic() { (mu, nu) } else { (nu, mu) };
            let (x, c) = atomic_levels(atoms);
            let mut acc = 0.0;
            let mut lo_y = 0.0;
            for (i, &xi) in x.iter().enumerate() {
                let hi_y = if i + 1 == x.len() { 1.0 } else { cont.quantile(c[i]) };
                acc += cont.cost_against_point(xi, lo_y, hi_y, r);
                lo_y = hi_y;
            }
            Ok(acc)
        }
        (false, false) => {
            let mut levels = vec![0.0, 1.0];
            for m in [mu, nu] {
                if let Measure::Grid { cumulative, .. } = m {
                    levels.extend_from_slice(cumulative);
                }
                for b in m.breakpoints() {
                    levels.push(m.cdf(b));
                }
            }
            levels.retain(|s| (0.0..=1.0).contains(s));
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let mut acc = 0.0;
            for w in levels.windows(2) {
                acc += integrate(|s| (mu.quantile(s) - nu.quantile(s)).abs().powf(r), w[0], w[1], 1e-12);
            }
            Ok(acc)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub mk_r: f64,
    pub energy: f64,
    pub relative_error: f64,
    /// Smallest cost among the random mass perturbations.
    pub best_perturbed: f64,
    pub masses_optimal: bool,
    pub pass: bool,
}

/// Compares MK_r(Σ m_i δ_{x^i}, ρ) with optimal masses against F_{N,r}(x),
/// and checks the optimal masses beat 10 seeded random perturbations.
pub fn quantization_identity_check(state: &ParticleState, rho: &Density, r: f64, seed: u64) -> Result<IdentityReport> {
    let masses = optimal_masses(state, rho)?;
    let nu = Measure::density(rho);
    let cost = mk_r(&Measure::weighted(state, masses.clone())?, &nu, r)?;
    let energy = discrete_energy(state, rho, r)?.value;
    let relative_error = (cost - energy).abs() / energy.abs().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_perturbed = f64::INFINITY;
    for _ in 0..10 {
        let mut p: Vec<f64> = masses.iter().map(|m| m * (1.0 + rng.gen_range(-0.3..0.3))).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        best_perturbed = best_perturbed.min(mk_r(&Measure::weighted(state, p)?, &nu, r)?);
    }
    let masses_optimal = best_perturbed >= cost * (1.0 - 1e-9);
    Ok(IdentityReport { mk_r: cost, energy, relative_error, best_perturbed, masses_optimal, pass: relative_error <= 1e-6 && masses_optimal })
}

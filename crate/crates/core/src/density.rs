//! Probability densities on [0, 1].
//!
//! A [`Density`] wraps a [`DensityProfile`] (the concrete family: uniform,
//! cosine, piecewise constant, Gaussian-mollified) together with the rule used
//! to evaluate it outside the unit interval. Densities are immutable and cheap
//! to clone.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{QuantError, Result};
use crate::quadrature::{self, integrate_with_breaks};

/// Truncation radius of the Gaussian mollifier, in standard deviations.
pub const MOLLIFIER_TRUNCATION: f64 = 8.0;

/// Grid on which λ is estimated for densities without a closed-form bound.
const LAMBDA_SCAN: usize = 2048;

/// A concrete family of densities on [0, 1].
pub trait DensityProfile: Send + Sync + Debug {
    fn name(&self) -> &str;

    /// ρ(x) for x in [0, 1].
    fn value(&self, x: f64) -> f64;

    /// k-th derivative at x in [0, 1], or `None` when not available.
    fn derivative(&self, x: f64, order: usize) -> Option<f64>;

    /// Highest analytically available derivative.
    fn derivative_order(&self) -> usize;

    /// Points in (0, 1) where the profile (or one of its derivatives) jumps.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn periodic(&self) -> bool;

    fn is_uniform(&self) -> bool {
        false
    }

    /// Closed-form `(∫_a^b ρ, ∫_a^b (y - c) ρ(y) dy)` for `[a, b] ⊂ [0, 1]`.
    fn moments(&self, _a: f64, _b: f64, _c: f64) -> Option<(f64, f64)> {
        None
    }

    /// Closed-form lower bound λ with λ ≤ ρ ≤ 1/λ, if known.
    fn lambda_hint(&self) -> Option<f64> {
        None
    }
}

/// How a density is continued outside [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionMode {
    /// ρ(-y) = ρ(y), ρ(2 - y) = ρ(y).
    #[default]
    Reflection,
    /// ρ(y + 1) = ρ(y).
    Periodic,
}

#[derive(Debug)]
struct Uniform;

impl DensityProfile for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }
    fn value(&self, _x: f64) -> f64 {
        1.0
    }
    fn derivative(&self, _x: f64, order: usize) -> Option<f64> {
        Some(if order == 0 { 1.0 } else { 0.0 })
    }
    fn derivative_order(&self) -> usize {
        usize::MAX
    }
    fn periodic(&self) -> bool {
        true
    }
    fn is_uniform(&self) -> bool {
        true
    }
    fn moments(&self, a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
        Some((b - a, 0.5 * ((b - c) * (b - c) - (a - c) * (a - c))))
    }
    fn lambda_hint(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// ρ(x) = 1 + ε cos(2πx).
#[derive(Debug)]
struct Cosine {
    eps: f64,
}

impl DensityProfile for Cosine {
    fn name(&self) -> &str {
        "cosine"
    }
    fn value(&self, x: f64) -> f64 {
        1.0 + self.eps * (2.0 * PI * x).cos()
    }
    fn derivative(&self, x: f64, order: usize) -> Option<f64> {
        let k = 2.0 * PI;
        let phase = k * x;
        let kn = k.powi(order as i32);
        let trig = match order % 4 {
            0 => phase.cos(),
            1 => -phase.sin(),
            2 => -phase.cos(),
            _ => phase.sin(),
        };
        Some(if order == 0 { 1.0 + self.eps * trig } else { self.eps * kn * trig })
    }
    fn derivative_order(&self) -> usize {
        usize::MAX
    }
    fn periodic(&self) -> bool {
        true
    }
    fn moments(&self, a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
        let k = 2.0 * PI;
        let mass = (b - a) + self.eps / k * ((k * b).sin() - (k * a).sin());
        let prim = |y: f64| (y - c) * (k * y).sin() / k + (k * y).cos() / (k * k);
        let moment = 0.5 * ((b - c) * (b - c) - (a - c) * (a - c)) + self.eps * (prim(b) - prim(a));
        Some((mass, moment))
    }
    fn lambda_hint(&self) -> Option<f64> {
        Some(1.0 - self.eps)
    }
}

/// Piecewise-constant profile; values[k] on [breaks[k], breaks[k+1]).
#[derive(Debug)]
struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    fn locate(&self, x: f64) -> usize {
        let k = self.breaks.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(self.values.len() - 1)
    }
}

impl DensityProfile for PiecewiseConstant {
    fn name(&self) -> &str {
        "piecewise_constant"
    }
    fn value(&self, x: f64) -> f64 {
        self.values[self.locate(x)]
    }
    fn derivative(&self, x: f64, order: usize) -> Option<f64> {
        (order == 0).then(|| self.value(x))
    }
    fn derivative_order(&self) -> usize {
        0
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks[1..self.breaks.len() - 1].to_vec()
    }
    fn periodic(&self) -> bool {
        (self.values[0] - self.values[self.values.len() - 1]).abs() <= 1e-12
    }
    fn moments(&self, a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
        let mut mass = 0.0;
        let mut moment = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            let lo = self.breaks[k].max(a);
            let hi = self.breaks[k + 1].min(b);
            if hi > lo {
                mass += v * (hi - lo);
                moment += v * 0.5 * ((hi - c) * (hi - c) - (lo - c) * (lo - c));
            }
        }
        Some((mass, moment))
    }
}

/// Gaussian mollification of a (periodically extended) raw profile.
#[derive(Debug)]
struct Mollified {
    raw: Arc<dyn DensityProfile>,
    sigma: f64,
    name: String,
}

impl Mollified {
    /// ∫ ρ̄(x - z) φ^{(order)}(z) dz, truncated at ±8σ.
    fn convolve(&self, x: f64, order: usize) -> f64 {
        let s = self.sigma;
        let s2 = s * s;
        let norm = 1.0 / ((2.0 * PI).sqrt() * s);
        let kernel = |z: f64| {
            let g = norm * (-0.5 * z * z / s2).exp();
            match order {
                0 => g,
                1 => -z / s2 * g,
                2 => (z * z / (s2 * s2) - 1.0 / s2) * g,
                _ => (-z * z * z / (s2 * s2 * s2) + 3.0 * z / (s2 * s2)) * g,
            }
        };
        let raw_periodic = |y: f64| self.raw.value(y - y.floor());
        let r = MOLLIFIER_TRUNCATION * s;
        // x - z crosses a raw breakpoint b (or a periodic copy) at z = x - b - k.
        let mut cuts = Vec::new();
        let mut raw_breaks = self.raw.breakpoints();
        raw_breaks.push(0.0);
        for b in raw_breaks {
            let lo = (x - r - b).floor() as i64 - 1;
            let hi = (x + r - b).ceil() as i64 + 1;
            for k in lo..=hi {
                let z = x - b - k as f64;
                if z > -r && z < r {
                    cuts.push(z);
                }
            }
        }
        let scale = s.powi(-(order as i32));
        integrate_with_breaks(|z| raw_periodic(x - z) * kernel(z), -r, r, &cuts, 1e-13 * scale)
    }
}

impl DensityProfile for Mollified {
    fn name(&self) -> &str {
        &self.name
    }
    fn value(&self, x: f64) -> f64 {
        self.convolve(x, 0)
    }
    fn derivative(&self, x: f64, order: usize) -> Option<f64> {
        (order <= 3).then(|| self.convolve(x, order))
    }
    fn derivative_order(&self) -> usize {
        3
    }
    fn periodic(&self) -> bool {
        true
    }
}

/// A density on [0, 1] plus its extension rule.
#[derive(Clone, Debug)]
pub struct Density {
    profile: Arc<dyn DensityProfile>,
    extension: ExtensionMode,
    lambda: f64,
    mass: f64,
}

impl Density {
    fn from_profile(profile: Arc<dyn DensityProfile>, extension: ExtensionMode) -> Self {
        let mut d = Density { profile, extension, lambda: 0.0, mass: 1.0 };
        d.mass = d.mass_between(0.0, 1.0);
        d.lambda = match d.profile.lambda_hint() {
            Some(l) => l,
            None => {
                let mut lam = f64::INFINITY;
                for j in 0..=LAMBDA_SCAN {
                    let v = d.profile.value(j as f64 / LAMBDA_SCAN as f64);
                    lam = lam.min(v.min(1.0 / v));
                }
                lam.max(0.0)
            }
        };
        d
    }

    /// ρ ≡ 1.
    pub fn uniform() -> Self {
        Self::from_profile(Arc::new(Uniform), ExtensionMode::Reflection)
    }

    /// ρ(x) = 1 + eps·cos(2πx), 0 ≤ eps < 1.
    pub fn cosine(eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(QuantError::InvalidParameter(format!("cosine amplitude {eps} not in [0, 1)")));
        }
        if eps == 0.0 {
            return Ok(Self::uniform());
        }
        Ok(Self::from_profile(Arc::new(Cosine { eps }), ExtensionMode::Reflection))
    }

    /// Piecewise-constant profile taking `values[k]` on `[breaks[k], breaks[k+1])`.
    /// The result is not renormalized; see [`Density::normalized_piecewise`].
    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(QuantError::LengthMismatch { expected: values.len() + 1, got: breaks.len() });
        }
        if breaks[0] != 0.0 || breaks[breaks.len() - 1] != 1.0 || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QuantError::InvalidParameter("breaks must increase from 0 to 1".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(QuantError::InvalidParameter("values must be finite and nonnegative".into()));
        }
        Ok(Self::from_profile(Arc::new(PiecewiseConstant { breaks, values }), ExtensionMode::Periodic))
    }

    /// Piecewise-constant profile rescaled to unit mass.
    pub fn normalized_piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let raw = Self::piecewise_constant(breaks.clone(), values.clone())?;
        let m = raw.mass();
        if m <= 0.0 {
            return Err(QuantError::InvalidParameter("zero total mass".into()));
        }
        Self::piecewise_constant(breaks, values.into_iter().map(|v| v / m).collect())
    }

    /// Indicator of [½ - half_width, ½ + half_width] (mass 2·half_width).
    pub fn centered_indicator(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width < 0.5) {
            return Err(QuantError::InvalidParameter(format!("half width {half_width} not in (0, 1/2)")));
        }
        Self::piecewise_constant(vec![0.0, 0.5 - half_width, 0.5 + half_width, 1.0], vec![0.0, 1.0, 0.0])
    }

    pub fn with_extension(mut self, mode: ExtensionMode) -> Self {
        self.extension = mode;
        self
    }

    pub fn name(&self) -> &str {
        self.profile.name()
    }
    pub fn extension(&self) -> ExtensionMode {
        self.extension
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn periodic(&self) -> bool {
        self.profile.periodic()
    }
    pub fn is_uniform(&self) -> bool {
        self.profile.is_uniform()
    }
    pub fn derivative_order(&self) -> usize {
        self.profile.derivative_order()
    }
    pub fn breakpoints(&self) -> Vec<f64> {
        self.profile.breakpoints()
    }
    /// ∫₀¹ ρ.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Smooth enough (C²), bounded below and of unit mass: admissible as a flow input.
    pub fn check_flow_admissible(&self) -> Result<()> {
        if self.derivative_order() < 2 {
            return Err(QuantError::NonSmoothDensity);
        }
        if self.lambda <= 0.0 || (self.mass - 1.0).abs() > 1e-8 {
            return Err(QuantError::InvalidParameter(format!(
                "flow density must be a probability density bounded below (mass {}, lambda {})",
                self.mass, self.lambda
            )));
        }
        Ok(())
    }

    /// ρ(x) for x in [0, 1].
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.profile.value(x)
    }

    /// ρ^{(order)}(x) for x in [0, 1].
    pub fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        self.profile.derivative(x, order).ok_or(QuantError::MissingDerivative(order))
    }

    /// Maps y in [-1, 2] to (z in [0, 1], sign) with ρ^{(k)}(y) = sign^k ρ^{(k)}(z).
    fn fold(&self, y: f64) -> Result<(f64, f64)> {
        if !(-1.0..=2.0).contains(&y) || y.is_nan() {
            return Err(QuantError::OutOfRange { value: y, lo: -1.0, hi: 2.0 });
        }
        Ok(match self.extension {
            ExtensionMode::Reflection if y < 0.0 => (-y, -1.0),
            ExtensionMode::Reflection if y > 1.0 => (2.0 - y, -1.0),
            ExtensionMode::Periodic if y < 0.0 => (y + 1.0, 1.0),
            ExtensionMode::Periodic if y > 1.0 => (y - 1.0, 1.0),
            _ => (y, 1.0),
        })
    }

    /// ρ extended to [-1, 2] by reflection or periodicity.
    pub fn evaluate_extended(&self, y: f64) -> Result<f64> {
        let (z, _) = self.fold(y)?;
        Ok(self.value(z))
    }

    /// Derivative of the extended density.
    pub fn extended_derivative(&self, y: f64, order: usize) -> Result<f64> {
        let (z, sign) = self.fold(y)?;
        let d = self.derivative(z, order)?;
        Ok(if order % 2 == 1 { sign * d } else { d })
    }

    /// `(∫_a^b ρ, ∫_a^b (y - c) ρ(y) dy)` over `[a, b] ⊂ [-1, 2]` using the extension.
    pub fn moments(&self, a: f64, b: f64, c: f64) -> Result<(f64, f64)> {
        if a > b {
            let (m, mo) = self.moments(b, a, c)?;
            return Ok((-m, -mo));
        }
        if a < -1.0 || b > 2.0 {
            return Err(QuantError::OutOfRange { value: if a < -1.0 { a } else { b }, lo: -1.0, hi: 2.0 });
        }
        let mut mass = 0.0;
        let mut moment = 0.0;
        // Left of 0.
        if a < 0.0 {
            let hi = b.min(0.0);
            match self.extension {
                ExtensionMode::Reflection => {
                    let (m, mo) = self.inner_moments(-hi, -a, -c);
                    mass += m;
                    moment -= mo;
                }
                ExtensionMode::Periodic => {
                    let (m, mo) = self.inner_moments(a + 1.0, hi + 1.0, c + 1.0);
                    mass += m;
                    moment += mo;
                }
            }
        }
        let lo = a.max(0.0);
        let hi = b.min(1.0);
        if hi > lo {
            let (m, mo) = self.inner_moments(lo, hi, c);
            mass += m;
            moment += mo;
        }
        if b > 1.0 {
            let lo = a.max(1.0);
            match self.extension {
                ExtensionMode::Reflection => {
                    let (m, mo) = self.inner_moments(2.0 - b, 2.0 - lo, 2.0 - c);
                    mass += m;
                    moment -= mo;
                }
                ExtensionMode::Periodic => {
                    let (m, mo) = self.inner_moments(lo - 1.0, b - 1.0, c - 1.0);
                    mass += m;
                    moment += mo;
                }
            }
        }
        Ok((mass, moment))
    }

    fn inner_moments(&self, a: f64, b: f64, c: f64) -> (f64, f64) {
        if let Some(m) = self.profile.moments(a, b, c) {
            return m;
        }
        let br = self.breakpoints();
        let mass = integrate_with_breaks(|y| self.value(y), a, b, &br, quadrature::TIGHT_TOL);
        let moment = integrate_with_breaks(|y| (y - c) * self.value(y), a, b, &br, quadrature::TIGHT_TOL);
        (mass, moment)
    }

    /// ∫_a^b ρ for [a, b] ⊂ [0, 1].
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        self.inner_moments(a, b, 0.0).0
    }

    /// ∫_a^b g(y) ρ(y) dy for [a, b] ⊂ [0, 1], splitting at `extra` breaks.
    pub fn integrate_weighted<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64, extra: &[f64], tol: f64) -> f64 {
        let mut br = self.breakpoints();
        br.extend_from_slice(extra);
        integrate_with_breaks(|y| g(y) * self.value(y), a, b, &br, tol)
    }
}

/// Gaussian mollification ρ̄ * φ_δ of a raw profile, φ_δ of variance `delta`.
///
/// The raw profile is extended periodically; the convolution is evaluated by
/// quadrature truncated at 8 standard deviations. Mass is not renormalized.
pub fn mollify(raw: &Density, delta: f64) -> Result<Density> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(QuantError::InvalidParameter(format!("mollification scale {delta} must be positive")));
    }
    let profile = Mollified {
        raw: raw.profile.clone(),
        sigma: delta.sqrt(),
        name: format!("mollified_{}", raw.name()),
    };
    Ok(Density::from_profile(Arc::new(profile), ExtensionMode::Periodic))
}

/// Grid maxima of |ρ'| and |ρ''| (lower bounds of the true sup norms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityNorms {
    pub sup_rho_prime: f64,
    pub sup_rho_second: f64,
    /// ‖ρ‖_{C³} plus the ½-Hölder seminorm of ρ''' on neighbouring grid pairs.
    pub holder_c3alpha: Option<f64>,
    pub grid_size: usize,
}

pub fn sup_norms(rho: &Density, grid_size: usize) -> Result<DensityNorms> {
    if grid_size < 64 {
        return Err(QuantError::InvalidParameter(format!("grid size {grid_size} below 64")));
    }
    let h = 1.0 / grid_size as f64;
    let xs: Vec<f64> = (0..=grid_size).map(|j| j as f64 * h).collect();
    let analytic = rho.derivative_order() >= 2;
    let (mut d1, mut d2) = (0.0f64, 0.0f64);
    for &x in &xs {
        let (a, b) = if analytic {
            (rho.derivative(x, 1)?, rho.derivative(x, 2)?)
        } else {
            // Centered differences on the extended density.
            let e = 1e-4;
            let f = |y: f64| rho.evaluate_extended(y);
            ((f(x + e)? - f(x - e)?) / (2.0 * e), (f(x + e)? - 2.0 * f(x)? + f(x - e)?) / (e * e))
        };
        d1 = d1.max(a.abs());
        d2 = d2.max(b.abs());
    }
    let holder_c3alpha = if rho.derivative_order() >= 3 {
        let mut c3 = 0.0f64;
        let mut third = Vec::with_capacity(xs.len());
        for &x in &xs {
            let v = rho.value(x).abs().max(d1).max(d2);
            let t = rho.derivative(x, 3)?;
            c3 = c3.max(v).max(t.abs());
            third.push(t);
        }
        let mut semi = 0.0f64;
        for w in third.windows(2) {
            semi = semi.max((w[1] - w[0]).abs() / h.sqrt());
        }
        Some(c3 + semi)
    } else {
        None
    };
    Ok(DensityNorms { sup_rho_prime: d1, sup_rho_second: d2, holder_c3alpha, grid_size })
}

/// γ = 1 / ∫₀¹ ρ^{1/3}.
pub fn cube_root_normalizer(rho: &Density) -> f64 {
    let br = rho.breakpoints();
    let s = integrate_with_breaks(|y| rho.value(y).cbrt(), 0.0, 1.0, &br, 1e-13);
    1.0 / s
}

/// Configuration-file form of a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    #[default]
    Uniform,
    Cosine {
        eps: f64,
    },
    /// Mollified indicator of [½ - eps, ½ + eps].
    MollifiedIndicator {
        eps: f64,
        delta: f64,
    },
}

impl DensitySpec {
    pub fn build(&self) -> Result<Density> {
        match *self {
            DensitySpec::Uniform => Ok(Density::uniform()),
            DensitySpec::Cosine { eps } => Density::cosine(eps),
            DensitySpec::MollifiedIndicator { eps, delta } => mollify(&Density::centered_indicator(eps)?, delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cosine_values_and_mass() {
        let rho = Density::cosine(0.1).unwrap();
        assert!(close(rho.value(0.0), 1.1, 1e-15));
        assert!(close(rho.value(0.5), 0.9, 1e-15));
        // Oracle: composite quadrature of the formula itself.
        let q = quadrature::integrate(|x| 1.0 + 0.1 * (2.0 * PI * x).cos(), 0.0, 1.0, 1e-14);
        assert!(close(q, 1.0, 1e-13));
        assert!(close(rho.mass(), 1.0, 1e-13));
        assert!(close(rho.lambda(), 0.9, 0.0));
        assert!(rho.periodic());
        assert!(rho.derivative_order() >= 3);
    }

    #[test]
    fn zero_amplitude_is_uniform() {
        let rho = Density::cosine(0.0).unwrap();
        assert!(rho.is_uniform());
        assert_eq!(rho.value(0.37), 1.0);
    }

    #[test]
    fn amplitude_out_of_range() {
        assert!(Density::cosine(1.0).is_err());
        assert!(Density::cosine(-0.1).is_err());
    }

    #[test]
    fn cosine_sup_norms_match_dense_grid() {
        let rho = Density::cosine(0.1).unwrap();
        let n = sup_norms(&rho, 4096).unwrap();
        // Oracle: dense maximization of the analytic derivatives.
        let mut m1 = 0.0f64;
        let mut m2 = 0.0f64;
        for j in 0..=200_000 {
            let x = j as f64 / 200_000.0;
            m1 = m1.max((0.1 * 2.0 * PI * (2.0 * PI * x).sin()).abs());
            m2 = m2.max((0.1 * 4.0 * PI * PI * (2.0 * PI * x).cos()).abs());
        }
        assert!(close(n.sup_rho_prime, 0.2 * PI, 1e-6));
        assert!(close(n.sup_rho_second, 0.4 * PI * PI, 1e-6));
        assert!(close(m1, 0.2 * PI, 1e-6) && close(m2, 0.4 * PI * PI, 1e-9));

        let n = sup_norms(&Density::cosine(0.05).unwrap(), 4096).unwrap();
        assert!(close(n.sup_rho_prime, 0.1 * PI, 1e-6));
        assert!(close(n.sup_rho_second, 0.2 * PI * PI, 1e-6));
        assert!(n.holder_c3alpha.is_some());
    }

    #[test]
    fn uniform_norms_vanish() {
        let n = sup_norms(&Density::uniform(), 64).unwrap();
        assert_eq!((n.sup_rho_prime, n.sup_rho_second), (0.0, 0.0));
        assert!(sup_norms(&Density::uniform(), 10).is_err());
    }

    #[test]
    fn reflection_extension() {
        let rho = Density::cosine(0.1).unwrap();
        assert!(close(rho.evaluate_extended(-0.25).unwrap(), 1.0, 1e-15));
        assert!(close(rho.evaluate_extended(1.25).unwrap(), 1.0, 1e-15));
        assert_eq!(Density::uniform().evaluate_extended(-0.3).unwrap(), 1.0);
        for j in 0..=100 {
            let y = j as f64 / 100.0;
            assert_eq!(rho.evaluate_extended(-y).unwrap(), rho.evaluate_extended(y).unwrap());
            assert!(close(rho.evaluate_extended(2.0 - y).unwrap(), rho.value(y), 1e-14));
        }
        assert!(rho.evaluate_extended(2.5).is_err());
        assert!(rho.evaluate_extended(-1.01).is_err());
    }

    #[test]
    fn periodic_extension() {
        let rho = Density::normalized_piecewise(vec![0.0, 0.3, 1.0], vec![2.0, 0.5]).unwrap();
        assert_eq!(rho.extension(), ExtensionMode::Periodic);
        assert_eq!(rho.evaluate_extended(-0.1).unwrap(), rho.value(0.9));
        assert_eq!(rho.evaluate_extended(1.1).unwrap(), rho.value(0.1));
    }

    #[test]
    fn extended_moments_match_quadrature() {
        let rho = Density::cosine(0.3).unwrap();
        let (m, mo) = rho.moments(-0.2, 0.15, 0.05).unwrap();
        let qm = quadrature::integrate(|y| rho.evaluate_extended(y).unwrap(), -0.2, 0.15, 1e-14);
        let qmo = quadrature::integrate(|y| (y - 0.05) * rho.evaluate_extended(y).unwrap(), -0.2, 0.15, 1e-14);
        assert!(close(m, qm, 1e-13) && close(mo, qmo, 1e-13));
        let (m, mo) = rho.moments(0.9, 1.3, 0.95).unwrap();
        let qm = quadrature::integrate(|y| rho.evaluate_extended(y).unwrap(), 0.9, 1.3, 1e-14);
        let qmo = quadrature::integrate(|y| (y - 0.95) * rho.evaluate_extended(y).unwrap(), 0.9, 1.3, 1e-14);
        assert!(close(m, qm, 1e-13) && close(mo, qmo, 1e-13));
    }

    #[test]
    fn derivative_consistency_second_order() {
        let rho = Density::cosine(0.2).unwrap();
        let x = 0.31;
        let err = |h: f64| ((rho.value(x + h) - rho.value(x - h)) / (2.0 * h) - rho.derivative(x, 1).unwrap()).abs();
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 / e2 > 3.9 && e1 / e2 < 4.1);
        let h = 1e-3;
        let fd3 = (rho.derivative(x + h, 2).unwrap() - rho.derivative(x - h, 2).unwrap()) / (2.0 * h);
        assert!(close(fd3, rho.derivative(x, 3).unwrap(), 1e-3));
    }

    #[test]
    fn mollified_uniform_is_uniform() {
        let one = Density::piecewise_constant(vec![0.0, 1.0], vec![1.0]).unwrap();
        let m = mollify(&one, 1e-3).unwrap();
        for x in [0.0, 0.2, 0.77] {
            assert!(close(m.value(x), 1.0, 1e-12));
        }
        assert!(mollify(&one, 0.0).is_err());
        assert!(mollify(&one, -1.0).is_err());
    }

    #[test]
    fn mollified_indicator_matches_erf_oracle() {
        use statrs::function::erf::erf;
        let eps = 0.25;
        let delta: f64 = 1e-3;
        let m = mollify(&Density::centered_indicator(eps).unwrap(), delta).unwrap();
        let s = delta.sqrt() * 2f64.sqrt();
        let oracle = |x: f64| {
            (-1..=1)
                .map(|k| {
                    let a = 0.5 - eps + k as f64;
                    let b = 0.5 + eps + k as f64;
                    0.5 * (erf((x - a) / s) - erf((x - b) / s))
                })
                .sum::<f64>()
        };
        for x in [0.0, 0.2, 0.25, 0.3, 0.5, 0.74, 0.9] {
            // statrs erf is accurate to a few 1e-12.
            assert!(close(m.value(x), oracle(x), 1e-11), "x = {x}: {} vs {}", m.value(x), oracle(x));
        }
        assert!(close(m.mass(), 2.0 * eps, 1e-8));
    }

    #[test]
    fn mollifier_limit_at_center() {
        let m = mollify(&Density::centered_indicator(0.1).unwrap(), 1e-4).unwrap();
        assert!((m.value(0.5) - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn mollified_norms_grow_as_delta_shrinks() {
        let raw = Density::centered_indicator(0.25).unwrap();
        let a = sup_norms(&mollify(&raw, 1e-2).unwrap(), 512).unwrap();
        let b = sup_norms(&mollify(&raw, 1e-3).unwrap(), 512).unwrap();
        assert!(a.sup_rho_prime.is_finite() && b.sup_rho_second.is_finite());
        assert!(b.sup_rho_prime > a.sup_rho_prime);
        assert!(b.sup_rho_second > a.sup_rho_second);
    }

    #[test]
    fn mollified_derivatives_match_differences() {
        let m = mollify(&Density::centered_indicator(0.2).unwrap(), 1e-3).unwrap();
        let x = 0.31;
        let h = 1e-5;
        let fd1 = (m.value(x + h) - m.value(x - h)) / (2.0 * h);
        let fd2 = (m.derivative(x + h, 1).unwrap() - m.derivative(x - h, 1).unwrap()) / (2.0 * h);
        assert!(close(fd1, m.derivative(x, 1).unwrap(), 1e-5 * (1.0 + fd1.abs())));
        assert!(close(fd2, m.derivative(x, 2).unwrap(), 1e-5 * (1.0 + fd2.abs())));
    }

    #[test]
    fn cube_root_normalizer_values() {
        assert!(close(cube_root_normalizer(&Density::uniform()), 1.0, 1e-14));
        let rho = Density::cosine(0.1).unwrap();
        let gamma = cube_root_normalizer(&rho);
        // Oracle: fine composite midpoint rule of ρ^{1/3}.
        let n = 200_000;
        let s: f64 = (0..n).map(|j| rho.value((j as f64 + 0.5) / n as f64).cbrt()).sum::<f64>() / n as f64;
        assert!(close(gamma, 1.0 / s, 1e-10));
        assert!(gamma > 1.0);

        // 8 on [0, 1/8], floor 0.1 elsewhere, renormalized.
        let pw = Density::normalized_piecewise(vec![0.0, 0.125, 1.0], vec![8.0, 0.1]).unwrap();
        assert!(close(pw.mass(), 1.0, 1e-13));
        let total: f64 = 8.0 * 0.125 + 0.1 * 0.875;
        let exact = 1.0 / (0.125 * (8.0f64 / total).cbrt() + 0.875 * (0.1f64 / total).cbrt());
        assert!(close(cube_root_normalizer(&pw), exact, 1e-10));
        assert!(cube_root_normalizer(&pw) >= 1.0);
    }

    #[test]
    fn flow_admissibility() {
        assert!(Density::uniform().check_flow_admissible().is_ok());
        assert!(Density::cosine(0.2).unwrap().check_flow_admissible().is_ok());
        let pw = Density::normalized_piecewise(vec![0.0, 0.5, 1.0], vec![1.5, 0.5]).unwrap();
        assert_eq!(pw.check_flow_admissible(), Err(QuantError::NonSmoothDensity));
        let ind = mollify(&Density::centered_indicator(0.1).unwrap(), 1e-3).unwrap();
        assert!(ind.check_flow_admissible().is_err());
    }

    #[test]
    fn spec_round_trip_from_toml_shape() {
        let spec: DensitySpec = serde_json::from_str(r#"{"kind":"cosine","eps":0.05}"#).unwrap_or(DensitySpec::Uniform);
        assert_eq!(spec, DensitySpec::Cosine { eps: 0.05 });
        assert!(spec.build().unwrap().value(0.0) > 1.0);
    }
}

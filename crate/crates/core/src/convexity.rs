//! Second variation of 𝓕_ρ[X] = ∫ ρ(X) (∂_θX)³ dθ (no 1/12 factor):
//!
//! D²𝓕[X](Y, Y) = 6∫ρ(X)X_θY_θ² + 6∫ρ'(X)X_θ²Y_θY + ∫ρ''(X)X_θ³Y².

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density::{mollify, sup_norms, Density, DensityNorms};
use crate::energy::LagrangianField;
use crate::error::{QuantError, Result};

/// A base map X and a direction Y on the same nodes θ_j = j/M.
#[derive(Debug, Clone)]
pub struct HessianProbe {
    x: LagrangianField,
    y: Vec<f64>,
}

impl HessianProbe {
    pub fn new(x: LagrangianField, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.values().len() {
            return Err(QuantError::LengthMismatch { expected: x.values().len(), got: y.len() });
        }
        Ok(HessianProbe { x, y })
    }

    pub fn from_fns<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(m: usize, x: F, y: G) -> Result<Self> {
        let field = LagrangianField::from_fn(m, x)?;
        let dir = (0..=m).map(|j| y(j as f64 / m as f64)).collect();
        Self::new(field, dir)
    }

    pub fn base(&self) -> &LagrangianField {
        &self.x
    }

    pub fn direction(&self) -> &[f64] {
        &self.y
    }

    /// max |M (Y_{j+1} - Y_j)|.
    pub fn direction_slope_bound(&self) -> f64 {
        let m = self.x.m() as f64;
        self.y.windows(2).map(|w| (m * (w[1] - w[0])).abs()).fold(0.0, f64::max)
    }

    /// Y scaled by α.
    pub fn scaled(&self, alpha: f64) -> Self {
        HessianProbe { x: self.x.clone(), y: self.y.iter().map(|v| alpha * v).collect() }
    }
}

fn extended(rho: &Density, x: f64, order: usize) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        rho.derivative(x, order)
    } else {
        rho.extended_derivative(x, order)
    }
}

/// Midpoint rule per cell: slopes X_s, Y_s, averages X̄, Ȳ.
pub fn hessian_form(probe: &HessianProbe, rho: &Density) -> Result<f64> {
    if rho.derivative_order() < 2 {
        return Err(QuantError::MissingDerivative(2));
    }
    let x = probe.x.values();
    let y = &probe.y;
    let m = probe.x.m();
    let mf = m as f64;
    let mut acc = 0.0;
    for j in 0..m {
        let xs = mf * (x[j + 1] - x[j]);
        let ys = mf * (y[j + 1] - y[j]);
        let xm = 0.5 * (x[j] + x[j + 1]);
        let ym = 0.5 * (y[j] + y[j + 1]);
        let r0 = extended(rho, xm, 0)?;
        let r1 = extended(rho, xm, 1)?;
        let r2 = extended(rho, xm, 2)?;
        acc += 6.0 * r0 * xs * ys * ys + 6.0 * r1 * xs * xs * ys * ym + r2 * xs * xs * xs * ym * ym;
    }
    Ok(acc / mf)
}

/// Midpoint-rule 𝓕_ρ on raw nodal values (ends not pinned; ρ extended outside [0, 1]).
fn energy_raw(x: &[f64], rho: &Density) -> Result<f64> {
    let m = x.len() - 1;
    let mf = m as f64;
    let mut acc = 0.0;
    for w in x.windows(2) {
        let s = mf * (w[1] - w[0]);
        if !(s > 0.0) {
            return Err(QuantError::NonMonotone { index: 0, left: w[0], right: w[1] });
        }
        acc += extended(rho, 0.5 * (w[0] + w[1]), 0)? * s * s * s;
    }
    Ok(acc / mf)
}

/// (𝓕[X + hY] - 2𝓕[X] + 𝓕[X - hY]) / h².
pub fn second_difference_oracle(probe: &HessianProbe, rho: &Density, h: f64) -> Result<f64> {
    let x = probe.x.values();
    let plus: Vec<f64> = x.iter().zip(&probe.y).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = x.iter().zip(&probe.y).map(|(a, b)| a - h * b).collect();
    let (ep, e0, em) = (energy_raw(&plus, rho)?, energy_raw(x, rho)?, energy_raw(&minus, rho)?);
    Ok((ep - 2.0 * e0 + em) / (h * h))
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub norms: DensityNorms,
    pub lambda: f64,
    /// 3λc - 3C²‖ρ'‖ - ½C³‖ρ''‖: positive iff 6λc > 6C²‖ρ'‖ + C³‖ρ''‖.
    pub margin: f64,
    /// 3λc - (C³‖ρ''‖ - 3C²‖ρ'‖), the weaker inequality as usually displayed.
    pub displayed_margin: f64,
    pub pass: bool,
    /// Smallest form value over the random probes (only sampled on a pass).
    pub sampled_min: Option<f64>,
    pub samples_nonnegative: Option<bool>,
}

/// Random probe with slopes of X in [c, C] and a Dirichlet direction with |Y_θ| ≤ C.
pub fn random_probe(rng: &mut ChaCha8Rng, m: usize, c: f64, cap: f64) -> Result<HessianProbe> {
    const MODES: usize = 4;
    // X_θ = 1 + Σ a_k cos(kπθ), Σ|a_k| ≤ min(1 - c, C - 1) keeps the band.
    let room = (1.0 - c).min(cap - 1.0).max(0.0) * 0.95;
    let mut a: Vec<f64> = (0..MODES).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sa: f64 = a.iter().map(|v: &f64| v.abs()).sum();
    a.iter_mut().for_each(|v| *v *= room / sa.max(1e-12));
    let mut b: Vec<f64> = (0..MODES).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sb: f64 = b.iter().map(|v: &f64| v.abs()).sum();
    let scale = rng.gen_range(0.1..1.0) * cap;
    b.iter_mut().for_each(|v| *v *= scale / sb.max(1e-12));
    let xf = |t: f64| t + (0..MODES).map(|k| a[k] * ((k + 1) as f64 * PI * t).sin() / ((k + 1) as f64 * PI)).sum::<f64>();
    let yf = |t: f64| (0..MODES).map(|k| b[k] * ((k + 1) as f64 * PI * t).sin() / ((k + 1) as f64 * PI)).sum::<f64>();
    HessianProbe::from_fns(m, xf, yf)
}

/// Sufficient condition for a positive Hessian on the slope band [c, C]; when it
/// holds, the form is sampled on 50 random admissible probes.
pub fn convexity_certificate(rho: &Density, c: f64, cap: f64, seed: u64) -> Result<CertificateReport> {
    if !(c > 0.0 && cap >= c) {
        return Err(QuantError::InvalidParameter(format!("slope band [{c}, {cap}] is empty")));
    }
    let norms = sup_norms(rho, 2048)?;
    let lambda = rho.lambda();
    let (a, b) = (norms.sup_rho_prime, norms.sup_rho_second);
    let margin = 3.0 * lambda * c - 3.0 * cap * cap * a - 0.5 * cap.powi(3) * b;
    let displayed_margin = 3.0 * lambda * c - (cap.powi(3) * b - 3.0 * cap * cap * a);
    let pass = margin > 0.0;
    let (sampled_min, samples_nonnegative) = if pass {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lo = f64::INFINITY;
        for _ in 0..50 {
            let p = random_probe(&mut rng, 256, c, cap)?;
            lo = lo.min(hessian_form(&p, rho)?);
        }
        (Some(lo), Some(lo >= -1e-8))
    } else {
        (None, None)
    };
    Ok(CertificateReport { norms, lambda, margin, displayed_margin, pass, sampled_min, samples_nonnegative })
}

/// X = θ and Y = |θ - ½| + 1 on [½ - ε, ½ + ε], constant 1 + ε outside.
pub fn counterexample_probe(eps: f64, m: usize) -> Result<HessianProbe> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(QuantError::InvalidParameter(format!("half width {eps} not in (0, 1/2)")));
    }
    HessianProbe::from_fns(m, |t| t, |t| (t - 0.5).abs().min(eps) + 1.0)
}

/// Limit of the mollified form for the counterexample probe, including the
/// contributions of the band edges: 8ε - 4.
pub fn counterexample_limit(eps: f64) -> f64 {
    8.0 * eps - 4.0
}

/// 2∫_band Y_θ² - 4Y(½) = 4ε - 4, the value obtained when the band-edge terms are dropped.
pub fn counterexample_interior_value(eps: f64) -> f64 {
    4.0 * eps - 4.0
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CounterexampleRow {
    pub eps: f64,
    pub delta: f64,
    pub hessian_value: f64,
    pub exact_limit: f64,
    pub interior_value: f64,
}

/// Grid used for the mollified counterexample: resolves σ = √δ by ≥ 40 cells
/// and puts the kinks of Y on nodes.
pub fn counterexample_grid(eps: f64, delta: f64) -> usize {
    let base = ((40.0 / delta.sqrt()).ceil() as usize).max(2000);
    // Multiple of 2/gcd-ish: choose M with ε·M and M/2 integral when ε is a short decimal.
    let unit = (1.0 / eps).round() as usize * 2;
    let unit = if ((unit as f64) * eps - 2.0).abs() < 1e-9 { unit } else { 2 };
    base.div_ceil(unit) * unit
}

/// Hessian of the mollified-indicator energy along the counterexample probe, per δ.
pub fn counterexample_suite(eps: f64, deltas: &[f64]) -> Result<Vec<CounterexampleRow>> {
    let raw = Density::centered_indicator(eps)?;
    deltas
        .iter()
        .map(|&delta| {
            let rho = mollify(&raw, delta)?;
            let probe = counterexample_probe(eps, counterexample_grid(eps, delta))?;
            Ok(CounterexampleRow {
                eps,
                delta,
                hessian_value: hessian_form(&probe, &rho)?,
                exact_limit: counterexample_limit(eps),
                interior_value: counterexample_interior_value(eps),
            })
        })
        .collect()
}

pub fn write_counterexample_csv<W: Write>(rows: &[CounterexampleRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["eps", "delta", "hessian_value", "exact_limit", "interior_value"])?;
    for r in rows {
        wr.write_record([
            format!("{}", r.eps),
            format!("{:e}", r.delta),
            format!("{:.12e}", r.hessian_value),
            format!("{:.12e}", r.exact_limit),
            format!("{:.12e}", r.interior_value),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_direction_on_identity() {
        let p = HessianProbe::from_fns(512, |t| t, |t| (PI * t).sin()).unwrap();
        let u = Density::uniform();
        let v = hessian_form(&p, &u).unwrap();
        assert!((v - 3.0 * PI * PI).abs() < 1e-3 * 3.0 * PI * PI);
        let fd = second_difference_oracle(&p, &u, 1e-3).unwrap();
        assert!((fd - 3.0 * PI * PI).abs() < 1e-3 * 3.0 * PI * PI);
    }

    #[test]
    fn zero_direction() {
        let p = HessianProbe::from_fns(64, |t| t, |_| 0.0).unwrap();
        let rho = Density::cosine(0.2).unwrap();
        assert_eq!(hessian_form(&p, &rho).unwrap(), 0.0);
        assert!(second_difference_oracle(&p, &rho, 1e-3).unwrap().abs() < 1e-9);
    }

    #[test]
    fn quadratic_in_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_probe(&mut rng, 128, 0.5, 2.0).unwrap();
        let rho = Density::cosine(0.3).unwrap();
        let base = hessian_form(&p, &rho).unwrap();
        for alpha in [-2.0, 0.5, 3.0] {
            let v = hessian_form(&p.scaled(alpha), &rho).unwrap();
            assert!((v - alpha * alpha * base).abs() <= 1e-10 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn uniform_certificate() {
        let r = convexity_certificate(&Density::uniform(), 0.5, 2.0, 1).unwrap();
        assert!(r.pass);
        assert!((r.margin - 1.5).abs() < 1e-15);
        assert_eq!(r.samples_nonnegative, Some(true));
    }

    #[test]
    fn small_cosine_certificate() {
        let r = convexity_certificate(&Density::cosine(0.005).unwrap(), 0.5, 2.0, 2).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.samples_nonnegative, Some(true));
        let r = convexity_certificate(&Density::cosine(0.05).unwrap(), 0.5, 2.0, 2).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn counterexample_grid_hits_kinks() {
        let m = counterexample_grid(0.1, 1e-4);
        assert!(m >= 4000 && m.is_multiple_of(20));
        assert!(counterexample_grid(0.25, 1e-3).is_multiple_of(8));
    }

    #[test]
    fn mollified_counterexample_approaches_edge_corrected_limit() {
        let rows = counterexample_suite(0.25, &[1e-2, 1e-3, 1e-4]).unwrap();
        let dist: Vec<f64> = rows.iter().map(|r| (r.hessian_value - r.exact_limit).abs()).collect();
        assert!(dist[0] > dist[1] && dist[1] > dist[2], "{rows:?}");
        for r in &rows {
            assert!(r.hessian_value < 0.0);
            assert!((r.hessian_value - r.exact_limit).abs() <= 2.0 * r.delta.sqrt() + 1e-3, "{r:?}");
        }
    }
}

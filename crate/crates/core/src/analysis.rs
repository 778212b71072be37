use serde::Serialize;

use crate::error::{QuantError, Result};
use crate::particle_flow::FlowTrace;

/// ((1/N) Σ_{i=0}^N (u^i)²)^{1/2} for a vector of length N + 1.
pub fn discrete_l2(u: &[f64], n: usize) -> Result<f64> {
    if n == 0 || u.len() != n + 1 {
        return Err(QuantError::LengthMismatch { expected: n + 1, got: u.len() });
    }
    Ok((u.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt())
}

/// (1/N) Σ N² (u^{i+1} - u^i)².
pub fn discrete_gradient_sq(u: &[f64], n: usize) -> Result<f64> {
    if n == 0 || u.len() != n + 1 {
        return Err(QuantError::LengthMismatch { expected: n + 1, got: u.len() });
    }
    let nf = n as f64;
    Ok(u.windows(2).map(|w| (nf * (w[1] - w[0])).powi(2)).sum::<f64>() / nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareReport {
    pub lhs: f64,
    pub gradient: f64,
    /// (N + 1)/(2N) · ‖u'‖².
    pub rhs: f64,
    pub pass: bool,
    /// Whether ‖u‖² ≤ ½‖u'‖² also holds.
    pub half_constant_holds: bool,
}

/// ‖u‖₂² ≤ ((N+1)/(2N)) ‖u'‖₂² for u⁰ = 0.
pub fn discrete_poincare_check(u: &[f64], n: usize) -> Result<PoincareReport> {
    if u.first() != Some(&0.0) {
        return Err(QuantError::InvalidParameter("Poincaré check needs u⁰ = 0".into()));
    }
    let lhs = discrete_l2(u, n)?.powi(2);
    let gradient = discrete_gradient_sq(u, n)?;
    let rhs = (n + 1) as f64 / (2 * n) as f64 * gradient;
    let slack = 1e-12 * rhs.max(f64::MIN_POSITIVE);
    Ok(PoincareReport { lhs, gradient, rhs, pass: lhs <= rhs + slack, half_constant_holds: lhs <= 0.5 * gradient + slack })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub scales: Vec<f64>,
    pub errors: Vec<f64>,
    /// -d log(error)/d log(scale).
    pub order: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    /// Leading points dropped as pre-asymptotic.
    pub dropped: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

/// Log-log least squares of error against scale (N, M or 1/h). When the fit
/// residual exceeds 0.1 and more than 3 points remain, the smallest scale is dropped.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(QuantError::InvalidParameter(format!("rate fit needs 3 points, got {}", points.len())));
    }
    if let Some((s, e)) = points.iter().find(|(s, e)| !(*e > 0.0) || !(*s > 0.0)) {
        return Err(QuantError::InvalidParameter(format!("nonpositive point ({s}, {e}) in rate fit")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(QuantError::InvalidParameter("repeated scale in rate fit".into()));
    }
    let mut dropped = 0;
    loop {
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let (slope, intercept, residual) = least_squares(&xs, &ys);
        if residual > 0.1 && pts.len() > 3 {
            pts.remove(0);
            dropped += 1;
            continue;
        }
        return Ok(RateFit {
            scales: pts.iter().map(|p| p.0).collect(),
            errors: pts.iter().map(|p| p.1).collect(),
            order: -slope,
            intercept,
            residual,
            dropped,
        });
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub n: usize,
    pub times: Vec<f64>,
    /// D(t) = (1/N) Σ (x̄^i - X^i)².
    pub d: Vec<f64>,
    /// Exponential rate fitted on the decaying part of D (0 if none).
    pub rate: f64,
    /// Smallest K with D(t) ≤ D(0) e^{-rate·t} + K/N⁴ at every recorded time.
    pub k: f64,
    pub sup: f64,
    pub pass: bool,
}

/// Compares a trace against its attached reference samples.
pub fn trajectory_l2_compare(trace: &FlowTrace) -> Result<DecayReport> {
    if trace.l2_ref.len() != trace.times.len() {
        return Err(QuantError::Desynchronized);
    }
    let d: Vec<f64> = trace.l2_ref.iter().map(|v| v.ok_or(QuantError::Desynchronized)).collect::<Result<_>>()?;
    let times = trace.times.clone();
    let d0 = d[0];
    let last = *d.last().unwrap();
    // Decaying part: D still well above its final level.
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&d)
        .take_while(|(_, v)| **v > 4.0 * last && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let rate = if pts.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        (-least_squares(&xs, &ys).0).max(0.0)
    } else {
        0.0
    };
    let n4 = (trace.n as f64).powi(4);
    let k = times.iter().zip(&d).map(|(t, v)| (v - d0 * (-rate * t).exp()).max(0.0) * n4).fold(0.0, f64::max);
    let sup = d.iter().copied().fold(0.0, f64::max);
    let pass = d.iter().all(|v| v.is_finite()) && k.is_finite();
    Ok(DecayReport { n: trace.n, times, d, rate, k, sup, pass })
}

use super::EulerianField;
use crate::density::{cube_root_normalizer, Density};
use crate::energy::LagrangianField;
use crate::error::{QuantError, Result};
use crate::interp::{cubic_nodal, linear_periodic_centered};

/// Substeps per output cell for the θ-integrations.
const SUBSTEPS: usize = 8;

/// Centered nodal slopes, one-sided second order at the ends.
fn nodal_slopes(x: &[f64]) -> Vec<f64> {
    let m = x.len() - 1;
    let mf = m as f64;
    let mut d = vec![0.0; m + 1];
    d[0] = 0.5 * mf * (-3.0 * x[0] + 4.0 * x[1] - x[2]);
    d[m] = 0.5 * mf * (3.0 * x[m] - 4.0 * x[m - 1] + x[m - 2]);
    for j in 1..m {
        d[j] = 0.5 * mf * (x[j + 1] - x[j - 1]);
    }
    d
}

/// θ with X(θ) = y, bisection on the cubic interpolant inside the bracketing cell.
fn invert(field: &LagrangianField, y: f64) -> f64 {
    let x = field.values();
    let m = field.m();
    let k = x.partition_point(|&v| v <= y).clamp(1, m);
    let (mut lo, mut hi) = ((k - 1) as f64 / m as f64, k as f64 / m as f64);
    // Widen by a cell if the interpolant does not bracket (possible near steep data).
    let g = |t: f64| field.sample(t) - y;
    if g(lo) > 0.0 {
        lo = (lo - 1.0 / m as f64).max(0.0);
    }
    if g(hi) < 0.0 {
        hi = (hi + 1.0 / m as f64).min(1.0);
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// f = X#dθ at cell centres: f(X(θ)) = 1/∂_θX(θ), renormalized to unit mass.
pub fn pushforward(field: &LagrangianField, m_out: usize) -> Result<EulerianField> {
    if m_out < 2 {
        return Err(QuantError::InvalidParameter("output resolution below 2".into()));
    }
    let d = nodal_slopes(field.values());
    let vals: Vec<f64> = (0..m_out)
        .map(|j| {
            let y = (j as f64 + 0.5) / m_out as f64;
            1.0 / cubic_nodal(&d, invert(field, y))
        })
        .collect();
    EulerianField::normalized(vals)
}

/// Solves θ ↦ X with ∂_θX = 1/f(X), X(0) = 0, where f is periodic-linear between
/// cell centres. The cumulative mass Φ(X) = ∫₀^X f is piecewise quadratic, so
/// X(θ) = Φ⁻¹(θ) is obtained exactly cell by cell.
pub fn pullback(f: &EulerianField, m_out: usize) -> Result<LagrangianField> {
    if m_out < 2 {
        return Err(QuantError::InvalidParameter("output resolution below 2".into()));
    }
    let m = f.m();
    let v = f.values();
    // Breakpoints of the interpolant: 0, centres, 1.
    let mut knots = Vec::with_capacity(m + 2);
    knots.push(0.0);
    knots.extend((0..m).map(|j| (j as f64 + 0.5) / m as f64));
    knots.push(1.0);
    let fv: Vec<f64> = knots.iter().map(|&x| linear_periodic_centered(v, x)).collect();
    let mut cum = vec![0.0; knots.len()];
    for k in 1..knots.len() {
        cum[k] = cum[k - 1] + 0.5 * (fv[k] + fv[k - 1]) * (knots[k] - knots[k - 1]);
    }
    let total = cum[knots.len() - 1];
    if (total - 1.0).abs() > 1e-8 {
        return Err(QuantError::MassMismatch(total, 1.0));
    }
    let mut out = vec![0.0; m_out + 1];
    for (j, o) in out.iter_mut().enumerate().take(m_out).skip(1) {
        let theta = j as f64 / m_out as f64 * total;
        let k = cum.partition_point(|&c| c <= theta).clamp(1, knots.len() - 1);
        let (x0, x1) = (knots[k - 1], knots[k]);
        let (f0, f1) = (fv[k - 1], fv[k]);
        let w = x1 - x0;
        let slope = (f1 - f0) / w;
        let r = theta - cum[k - 1];
        // f0 s + ½ slope s² = r, s ∈ [0, w].
        let s = if slope.abs() < 1e-14 {
            r / f0
        } else {
            2.0 * r / (f0 + (f0 * f0 + 2.0 * slope * r).max(0.0).sqrt())
        };
        *o = x0 + s.clamp(0.0, w);
    }
    out[m_out] = 1.0;
    LagrangianField::new(out)
}

/// X̄ with ∂_θX̄ = 1/(γ ρ^{1/3}(X̄)), X̄(0) = 0, by RK4 in θ.
pub fn stationary_profile(rho: &Density, m_out: usize) -> Result<LagrangianField> {
    if m_out < 2 {
        return Err(QuantError::InvalidParameter("output resolution below 2".into()));
    }
    let gamma = cube_root_normalizer(rho);
    let rhs = |x: f64| 1.0 / (gamma * rho.value(x.clamp(0.0, 1.0)).cbrt());
    let h = 1.0 / (m_out * SUBSTEPS) as f64;
    let mut x = 0.0;
    let mut out = Vec::with_capacity(m_out + 1);
    out.push(0.0);
    for _ in 0..m_out {
        for _ in 0..SUBSTEPS {
            let k1 = rhs(x);
            let k2 = rhs(x + 0.5 * h * k1);
            let k3 = rhs(x + 0.5 * h * k2);
            let k4 = rhs(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(x);
    }
    if (x - 1.0).abs() > 1e-10 {
        return Err(QuantError::InvalidParameter(format!("stationary profile ends at {x}, not 1")));
    }
    out[m_out] = 1.0;
    LagrangianField::new(out)
}

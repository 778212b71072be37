//! Adaptive composite Gauss–Legendre quadrature.
//!
//! Every integral in the crate goes through this module: 15-point panels,
//! recursive bisection until a panel and its two halves agree to the
//! requested absolute tolerance.

use std::sync::OnceLock;

/// Tolerance used when callers do not ask for anything tighter.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Tolerance for integrals that feed finite-difference checks.
pub const TIGHT_TOL: f64 = 1e-15;

const ORDER: usize = 15;
const MAX_DEPTH: u32 = 48;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        let n = ORDER as f64;
        for k in 0..ORDER {
            // Chebyshev-like initial guess, refined by Newton on P_n.
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(ORDER, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(ORDER, x);
            if d != 0.0 {
                dp = d;
            }
            nodes[k] = x;
            weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Rule { nodes, weights }
    })
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Single fixed 15-point panel on [a, b].
pub fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let r = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in r.nodes.iter().zip(r.weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = panel(f, a, m);
    let right = panel(f, m, b);
    let refined = left + right;
    if (refined - whole).abs() <= tol || depth >= MAX_DEPTH || m <= a || m >= b {
        return refined;
    }
    adapt(f, a, m, left, 0.5 * tol, depth + 1) + adapt(f, m, b, right, 0.5 * tol, depth + 1)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, tol);
    }
    let whole = panel(&f, a, b);
    adapt(&f, a, b, whole, tol, 0)
}

/// Integrates over `[a, b]`, splitting at interior `breaks` where `f` may
/// have kinks or jumps.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate_with_breaks(f, b, a, breaks, tol);
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut acc = 0.0;
    let mut lo = a;
    let share = tol / (pts.len() + 1) as f64;
    for &p in pts.iter().chain(std::iter::once(&b)) {
        acc += integrate(&f, lo, p, share);
        lo = p;
    }
    acc
}

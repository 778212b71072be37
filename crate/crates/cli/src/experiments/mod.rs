//! The built-in experiments. Particle counts are swept in parallel; every
//! table is assembled in input order so output files are deterministic.

mod closeness;
mod endgame;
mod lemmas;
mod pde;

pub use closeness::Closeness;
pub use endgame::{GeneralRate, MinimizerQuality, UniformRate};
pub use lemmas::{Hessian, Poincare};
pub use pde::{ComparisonPrinciple, L2Stability, ResidualOrder};

use std::f64::consts::PI;

use quantlab_core::{LagrangianField, ParticleState, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Decay rate of the slowest linearized mode of the rescaled uniform particle flow.
pub fn linear_rate(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * nf * nf * (PI / (2.0 * nf)).sin().powi(2)
}

/// log N / ĉ: the squared deviation from equilibrium, decaying at rate c' = 2ĉ,
/// is damped by a factor N² (t = 2 log N / c').
pub fn endgame_time(n: usize) -> f64 {
    ((n as f64).ln() / linear_rate(n)).max(0.5)
}

/// X((i - ½)/N), i = 1..N.
pub fn sample_midpoints(field: &LagrangianField, n: usize) -> Vec<f64> {
    (1..=n).map(|i| field.sample((i as f64 - 0.5) / n as f64)).collect()
}

/// Adds seeded offsets bounded by `amplitude / N²` and checks the result is a valid state.
pub fn jitter(positions: Vec<f64>, amplitude: f64, seed: u64) -> Result<ParticleState> {
    let n = positions.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = positions.into_iter().map(|v| v + amplitude * rng.gen_range(-1.0..=1.0) / (n * n)).collect();
    ParticleState::new(x)
}

/// Runs `f` for each N in parallel, preserving order.
pub fn sweep<T, F>(ns: &[usize], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    ns.par_iter().map(|&n| f(n)).collect()
}

/// Seed for the member of a sweep with N particles.
pub fn member_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(n as u64)
}

/// max/min of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_rate_limit() {
        assert!((linear_rate(1000) - PI * PI / 2.0).abs() < 1e-5);
        assert!((linear_rate(1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jitter_is_bounded_and_seeded() {
        let base: Vec<f64> = (1..=8).map(|i| (i as f64 - 0.5) / 8.0).collect();
        let a = jitter(base.clone(), 0.5, 3).unwrap();
        let b = jitter(base.clone(), 0.5, 3).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.positions().iter().zip(&base) {
            assert!((x - y).abs() <= 0.5 / 64.0);
        }
    }
}

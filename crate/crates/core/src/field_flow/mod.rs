//! Continuum flows: the Lagrangian map X(t, θ) with Dirichlet ends and the
//! periodic Eulerian density f(t, x), plus conversions between the two.

mod eulerian;
mod lagrangian;
mod maps;
mod residual;
mod snapshot;

pub use eulerian::{eulerian_integrate, eulerian_rhs, ComparisonMonitor, EulerianField, EulerianTrajectory};
pub use lagrangian::{lagrangian_integrate, lagrangian_rhs, LagrangianTrajectory};
pub use maps::{pullback, pushforward, stationary_profile};
pub use residual::{consistency_residual, ResidualReport};
pub use snapshot::write_snapshots;

use crate::error::{QuantError, Result};

/// Default explicit-step safety factor.
pub const DEFAULT_CFL: f64 = 0.4;

/// Time horizon, step safety factor and the times at which fields are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub t_end: f64,
    pub cfl: f64,
    /// Increasing times in [0, t_end]; each is hit exactly.
    pub record_times: Vec<f64>,
}

impl PdeConfig {
    /// Records the initial and final fields only.
    pub fn new(t_end: f64) -> Self {
        PdeConfig { t_end, cfl: DEFAULT_CFL, record_times: vec![0.0, t_end] }
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn with_record_times(mut self, times: Vec<f64>) -> Self {
        self.record_times = times;
        self
    }

    /// `count + 1` equally spaced record times including 0 and t_end.
    pub fn with_record_count(mut self, count: usize) -> Self {
        let count = count.max(1);
        self.record_times = (0..=count).map(|k| self.t_end * k as f64 / count as f64).collect();
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(QuantError::InvalidParameter(format!("invalid PDE configuration t_end={} cfl={}", self.t_end, self.cfl)));
        }
        if self.record_times.windows(2).any(|w| w[1] <= w[0])
            || self.record_times.iter().any(|t| *t < 0.0 || *t > self.t_end)
        {
            return Err(QuantError::Desynchronized);
        }
        Ok(())
    }
}

/// Walks a time axis with a variable step, stopping exactly on record times.
pub(crate) struct Clock<'a> {
    pub t: f64,
    record: &'a [f64],
    next: usize,
    t_end: f64,
}

impl<'a> Clock<'a> {
    pub fn new(cfg: &'a PdeConfig) -> Self {
        Clock { t: 0.0, record: &cfg.record_times, next: 0, t_end: cfg.t_end }
    }

    /// True if the current time is a pending record time (and consumes it).
    pub fn take_record(&mut self) -> bool {
        if self.next < self.record.len() && self.record[self.next] <= self.t {
            self.next += 1;
            true
        } else {
            false
        }
    }

    pub fn done(&self) -> bool {
        self.t >= self.t_end && self.next >= self.record.len()
    }

    /// Clamps a proposed step to the next stop and advances.
    pub fn step(&mut self, proposed: f64) -> f64 {
        let stop = if self.next < self.record.len() { self.record[self.next] } else { self.t_end };
        let remaining = stop - self.t;
        let dt = proposed.min(remaining);
        if dt >= remaining {
            self.t = stop;
        } else {
            self.t += dt;
        }
        dt
    }
}

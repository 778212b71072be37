//! Rescaled N-particle gradient flow x̄^i(t) = x^i(N³t).
//!
//! The velocity field is a trait object so that ρ ≡ 1 can use the closed
//! form (a difference of squared spacings) while general densities go
//! through cell moments with reflected ghosts.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density::Density;
use crate::energy::{check_increasing, discrete_energy, ParticleState};
use crate::error::{QuantError, Result};

/// Rescaled particle velocity ẋ̄ = -N³ ∇F_{N,2}(x̄).
pub trait VelocityField: Send + Sync {
    fn name(&self) -> &str;
    fn velocity(&self, x: &[f64], out: &mut [f64]) -> Result<()>;
}

/// ρ ≡ 1: (N³/4)((x^{i+1} - x^i)² - (x^i - x^{i-1})²).
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformVelocity;

impl VelocityField for UniformVelocity {
    fn name(&self) -> &str {
        "uniform"
    }

    fn velocity(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = x.len();
        let n3 = (n as f64).powi(3);
        for i in 0..n {
            let left = if i == 0 { 2.0 * x[0] } else { x[i] - x[i - 1] };
            let right = if i + 1 == n { 2.0 * (1.0 - x[n - 1]) } else { x[i + 1] - x[i] };
            out[i] = 0.25 * n3 * (right * right - left * left);
        }
        Ok(())
    }
}

/// General ρ: 2N³ ∫_{(x^{i-1}+x^i)/2}^{(x^i+x^{i+1})/2} (z - x^i) ρ(z) dz with reflected ρ.
#[derive(Debug, Clone)]
pub struct GeneralVelocity {
    rho: Density,
}

impl GeneralVelocity {
    pub fn new(rho: Density) -> Self {
        GeneralVelocity { rho }
    }
}

impl VelocityField for GeneralVelocity {
    fn name(&self) -> &str {
        "general"
    }

    fn velocity(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = x.len();
        let n3 = (n as f64).powi(3);
        for i in 0..n {
            let prev = if i == 0 { -x[0] } else { x[i - 1] };
            let next = if i + 1 == n { 2.0 - x[n - 1] } else { x[i + 1] };
            let (_, mo) = self.rho.moments(0.5 * (prev + x[i]), 0.5 * (x[i] + next), x[i])?;
            out[i] = 2.0 * n3 * mo;
        }
        Ok(())
    }
}

/// The closed form for ρ ≡ 1, the quadrature form otherwise.
pub fn velocity_for(rho: &Density) -> Box<dyn VelocityField> {
    if rho.is_uniform() {
        Box::new(UniformVelocity)
    } else {
        Box::new(GeneralVelocity::new(rho.clone()))
    }
}

pub fn rhs_uniform(state: &ParticleState) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.n()];
    UniformVelocity.velocity(state.positions(), &mut out)?;
    Ok(out)
}

pub fn rhs_general(state: &ParticleState, rho: &Density) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.n()];
    GeneralVelocity::new(rho.clone()).velocity(state.positions(), &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticleFlowConfig {
    /// Final rescaled time.
    pub t_end: f64,
    /// Base step is `beta / N²`.
    pub beta: f64,
    /// Smallest allowed N·(x^{i+1} - x^i).
    pub spacing_floor: f64,
    /// Record diagnostics every this many base steps (the final time is always recorded).
    pub record_every: usize,
    /// Maximum number of step halvings on a floor violation.
    pub max_halvings: u32,
}

impl ParticleFlowConfig {
    pub fn new(t_end: f64) -> Self {
        ParticleFlowConfig { t_end, beta: 0.1, spacing_floor: 0.01, record_every: 10, max_halvings: 40 }
    }

    /// Floor at 1% of the smallest scaled initial spacing.
    pub fn with_floor_from(mut self, state: &ParticleState) -> Self {
        self.spacing_floor = 0.01 * scaled_spacing_range(state.positions()).0;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.spacing_floor > 0.0) || !(self.t_end >= 0.0) || self.record_every == 0 {
            return Err(QuantError::InvalidParameter(format!("invalid flow configuration {self:?}")));
        }
        Ok(())
    }
}

/// Diagnostics recorded along a particle trajectory.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub n: usize,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// N · min spacing, ghost gaps 2x¹ and 2(1 - x^N) included.
    pub min_w: Vec<f64>,
    pub max_w: Vec<f64>,
    pub mk1: Vec<Option<f64>>,
    pub l2_ref: Vec<Option<f64>>,
    pub snapshots: Vec<Vec<f64>>,
}

impl FlowTrace {
    pub fn final_state(&self) -> ParticleState {
        ParticleState::new(self.snapshots.last().expect("trace has at least one record").clone())
            .expect("recorded states are valid")
    }

    /// Fills the `mk1` column from each recorded state.
    pub fn attach_mk1<F: Fn(&ParticleState) -> Result<f64>>(&mut self, f: F) -> Result<()> {
        self.mk1 = self
            .snapshots
            .iter()
            .map(|x| f(&ParticleState::new(x.clone())?).map(Some))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Fills the `l2_ref` column with (1/N) Σ (x̄^i - X^i)² against reference samples.
    pub fn attach_reference(&mut self, reference: &[Vec<f64>]) -> Result<()> {
        if reference.len() != self.snapshots.len() {
            return Err(QuantError::Desynchronized);
        }
        self.l2_ref = self
            .snapshots
            .iter()
            .zip(reference)
            .map(|(x, r)| {
                if r.len() != x.len() {
                    return Err(QuantError::LengthMismatch { expected: x.len(), got: r.len() });
                }
                Ok(Some(x.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64))
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time", "energy", "min_w", "max_w", "mk1", "l2_ref"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for k in 0..self.times.len() {
            wr.write_record([
                format!("{:.16e}", self.times[k]),
                format!("{:.16e}", self.energies[k]),
                format!("{:.16e}", self.min_w[k]),
                format!("{:.16e}", self.max_w[k]),
                opt(self.mk1.get(k).copied().flatten()),
                opt(self.l2_ref.get(k).copied().flatten()),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// (min, max) of N·spacing including the ghost gaps.
pub fn scaled_spacing_range(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let nf = n as f64;
    let mut lo = 2.0 * x[0];
    let mut hi = lo;
    let last = 2.0 * (1.0 - x[n - 1]);
    lo = lo.min(last);
    hi = hi.max(last);
    for w in x.windows(2) {
        let d = w[1] - w[0];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (nf * lo, nf * hi)
}

fn rk4_step(v: &dyn VelocityField, x: &[f64], h: f64, scratch: &mut [Vec<f64>; 5], out: &mut [f64]) -> Result<()> {
    let n = x.len();
    let [k1, k2, k3, k4, tmp] = scratch;
    v.velocity(x, k1)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    v.velocity(tmp, k2)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    v.velocity(tmp, k3)?;
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    v.velocity(tmp, k4)?;
    for i in 0..n {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

struct Stepper<'a> {
    v: &'a dyn VelocityField,
    floor: f64,
    max_halvings: u32,
    scratch: [Vec<f64>; 5],
}

impl Stepper<'_> {
    fn admissible(&self, x: &[f64]) -> Option<usize> {
        let n = x.len() as f64;
        if x.iter().any(|v| !v.is_finite()) {
            return Some(usize::MAX);
        }
        if 2.0 * x[0] * n < self.floor {
            return Some(0);
        }
        for (i, w) in x.windows(2).enumerate() {
            if (w[1] - w[0]) * n < self.floor {
                return Some(i + 1);
            }
        }
        if 2.0 * (1.0 - x[x.len() - 1]) * n < self.floor {
            return Some(x.len());
        }
        None
    }

    /// Advances x by h, halving on floor violations.
    fn advance(&mut self, x: &mut Vec<f64>, t: f64, h: f64, depth: u32) -> Result<()> {
        let mut next = vec![0.0; x.len()];
        rk4_step(self.v, x, h, &mut self.scratch, &mut next)?;
        match self.admissible(&next) {
            None => {
                *x = next;
                Ok(())
            }
            Some(index) if depth >= self.max_halvings => {
                if index == usize::MAX {
                    return Err(QuantError::NonFinite { time: t });
                }
                let (lo, _) = scaled_spacing_range(&next);
                Err(QuantError::SpacingCollapse { index, time: t, scaled_spacing: lo })
            }
            Some(_) => {
                self.advance(x, t, 0.5 * h, depth + 1)?;
                self.advance(x, t + 0.5 * h, 0.5 * h, depth + 1)
            }
        }
    }
}

/// Integrates the rescaled flow from `state0` to `cfg.t_end` with RK4, step β/N².
pub fn integrate(state0: &ParticleState, rho: &Density, cfg: &ParticleFlowConfig) -> Result<FlowTrace> {
    rho.check_flow_admissible()?;
    let v = velocity_for(rho);
    let n = state0.n();
    let dt = cfg.beta / (n * n) as f64;
    let steps = (cfg.t_end / dt).ceil() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| if k == steps { cfg.t_end } else { k as f64 * dt }).collect();
    let record: Vec<usize> = (0..=steps).filter(|k| k % cfg.record_every == 0 || *k == steps).collect();
    integrate_recording(state0, rho, v.as_ref(), cfg, &times, &record)
}

/// Integrates and records exactly at the requested (increasing) times.
pub fn integrate_to_times(state0: &ParticleState, rho: &Density, cfg: &ParticleFlowConfig, record_times: &[f64]) -> Result<FlowTrace> {
    rho.check_flow_admissible()?;
    if record_times.windows(2).any(|w| w[1] <= w[0]) || record_times.first().is_some_and(|t| *t < 0.0) {
        return Err(QuantError::Desynchronized);
    }
    let v = velocity_for(rho);
    let n = state0.n();
    let dt = cfg.beta / (n * n) as f64;
    // Step grid refined so that every requested time is a grid point.
    let mut times = vec![0.0];
    let mut record = Vec::new();
    if record_times.first() == Some(&0.0) {
        record.push(0);
    }
    for &target in record_times.iter().filter(|t| **t > 0.0) {
        let from = *times.last().unwrap();
        let k = ((target - from) / dt).ceil().max(1.0) as usize;
        for j in 1..=k {
            times.push(if j == k { target } else { from + (target - from) * j as f64 / k as f64 });
        }
        record.push(times.len() - 1);
    }
    let cfg = ParticleFlowConfig { t_end: *times.last().unwrap(), ..*cfg };
    integrate_recording(state0, rho, v.as_ref(), &cfg, &times, &record)
}

fn integrate_recording(
    state0: &ParticleState,
    rho: &Density,
    v: &dyn VelocityField,
    cfg: &ParticleFlowConfig,
    times: &[f64],
    record: &[usize],
) -> Result<FlowTrace> {
    cfg.validate()?;
    let n = state0.n();
    let mut trace = FlowTrace {
        n,
        times: Vec::new(),
        energies: Vec::new(),
        min_w: Vec::new(),
        max_w: Vec::new(),
        mk1: Vec::new(),
        l2_ref: Vec::new(),
        snapshots: Vec::new(),
    };
    let push = |trace: &mut FlowTrace, t: f64, x: &[f64]| -> Result<()> {
        check_increasing(x)?;
        let (lo, hi) = scaled_spacing_range(x);
        trace.times.push(t);
        trace.energies.push(discrete_energy(&ParticleState::new(x.to_vec())?, rho, 2.0)?.value);
        trace.min_w.push(lo);
        trace.max_w.push(hi);
        trace.mk1.push(None);
        trace.l2_ref.push(None);
        trace.snapshots.push(x.to_vec());
        Ok(())
    };
    let mut stepper = Stepper {
        v,
        floor: cfg.spacing_floor,
        max_halvings: cfg.max_halvings,
        scratch: std::array::from_fn(|_| vec![0.0; n]),
    };
    let mut x = state0.positions().to_vec();
    let mut next_record = record.iter().peekable();
    if next_record.peek() == Some(&&0) {
        push(&mut trace, times[0], &x)?;
        next_record.next();
    }
    for k in 1..times.len() {
        stepper.advance(&mut x, times[k - 1], times[k] - times[k - 1], 0)?;
        if next_record.peek() == Some(&&k) {
            push(&mut trace, times[k], &x)?;
            next_record.next();
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingReport {
    pub pass: bool,
    pub band: (f64, f64),
    pub observed_min: f64,
    pub observed_max: f64,
    /// Indices of recorded times that left the band.
    pub violations: Vec<usize>,
}

/// Checks N·spacing against [c(1-1e-6), C(1+1e-6)] (ρ ≡ 1) or the relaxed [c/2, 2C].
pub fn spacing_monitor(trace: &FlowTrace, c: f64, cap: f64, uniform: bool) -> SpacingReport {
    let band = if uniform { (c * (1.0 - 1e-6), cap * (1.0 + 1e-6)) } else { (0.5 * c, 2.0 * cap) };
    let observed_min = trace.min_w.iter().copied().fold(f64::INFINITY, f64::min);
    let observed_max = trace.max_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violations: Vec<usize> = (0..trace.times.len())
        .filter(|&k| trace.min_w[k] < band.0 || trace.max_w[k] > band.1)
        .collect();
    SpacingReport { pass: violations.is_empty(), band, observed_min, observed_max, violations }
}

/// Midpoint lattice with seeded uniform offsets in [-amplitude/N, amplitude/N].
pub fn perturbed_lattice(n: usize, amplitude: f64, seed: u64) -> Result<ParticleState> {
    if !(0.0..0.5).contains(&amplitude) {
        return Err(QuantError::InvalidParameter(format!("offset amplitude {amplitude} not in [0, 1/2)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let x = (1..=n)
        .map(|i| {
            let off: f64 = if amplitude > 0.0 { rng.gen_range(-amplitude..=amplitude) } else { 0.0 };
            (i as f64 - 0.5 + off) / nf
        })
        .collect();
    ParticleState::new(x)
}

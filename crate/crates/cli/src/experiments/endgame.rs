use quantlab_core::analysis::fit_rate;
use quantlab_core::density::cube_root_normalizer;
use quantlab_core::energy::discrete_energy;
use quantlab_core::field_flow::{eulerian_integrate, stationary_profile, EulerianField, PdeConfig};
use quantlab_core::particle_flow::{
    integrate, perturbed_lattice, scaled_spacing_range, spacing_monitor, FlowTrace, ParticleFlowConfig,
};
use quantlab_core::transport::{mk1, Measure};
use quantlab_core::{Density, ParticleState, Result};

use super::{endgame_time, jitter, member_seed, sample_midpoints, spread, sweep};
use crate::outcome::{Assertion, Outcome, Table};
use crate::registry::Experiment;
use crate::settings::Settings;

/// About `records` diagnostic rows per run.
fn flow_config(n: usize, t_end: f64, start: &ParticleState, records: usize) -> ParticleFlowConfig {
    let mut cfg = ParticleFlowConfig::new(t_end).with_floor_from(start);
    let steps = (t_end * (n * n) as f64 / cfg.beta).ceil() as usize;
    cfg.record_every = (steps / records).max(1);
    cfg
}

fn trace_table(trace: &FlowTrace) -> Table {
    let mut t = Table::new(format!("trace_n{}", trace.n), &["time", "energy", "min_w", "max_w"]);
    for k in 0..trace.times.len() {
        t.push(vec![trace.times[k].into(), trace.energies[k].into(), trace.min_w[k].into(), trace.max_w[k].into()]);
    }
    t
}

fn max_energy_increase(trace: &FlowTrace) -> f64 {
    trace.energies.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

fn cosine_admissible(s: &Settings) -> std::result::Result<(), String> {
    Density::cosine(s.eps).and_then(|r| r.check_flow_admissible()).map_err(|e| e.to_string())
}

/// Fine grid approximation of γρ^{1/3} dx.
fn cube_root_measure(rho: &Density) -> Result<Measure> {
    Ok(Measure::grid(&EulerianField::cube_root_profile(rho, 8192)?))
}

pub struct UniformRate;

struct UniformRun {
    t_end: f64,
    mk1: f64,
    excess: f64,
    violations: usize,
    energy_increase: f64,
    trace: FlowTrace,
}

impl Experiment for UniformRate {
    fn name(&self) -> &'static str {
        "uniform-rate"
    }

    fn claim(&self) -> &'static str {
        "uniform density: MK1(empirical measure, Lebesgue) <= 1/(4N) + C/N^2 after the relaxation time"
    }

    fn details(&self) -> &'static str {
        "Runs the rescaled particle flow for rho = 1 from a seeded perturbed midpoint lattice
(offsets up to 0.2/N) until t = log N / c, c the slowest linearized decay rate (the squared deviation
decays at 2c, so this is t = 2 log N / c' with c' = 2c).

assertions:
  excess_positive    min over N of mk1 - 1/(4N) > 0
  excess_order       fitted decay order of the excess >= 1.9
  spacing_band       number of records with N*spacing outside the initial band = 0
  energy_monotone    largest energy increase between records <= 1e-12

tables:
  endgame.csv        N, t_end, mk1_final, excess, excess_n2
  trace_n<N>.csv     time, energy, min_w, max_w"
    }

    fn defaults(&self) -> Settings {
        Settings { n: vec![8, 16, 32, 64], m: 0, eps: 0.0, deltas: vec![], seed: 7, t_end: None }
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let rho = Density::uniform();
        let runs = sweep(&s.n, |n| {
            let start = perturbed_lattice(n, 0.2, member_seed(s.seed, n))?;
            let t_end = s.t_end.unwrap_or_else(|| endgame_time(n));
            let trace = integrate(&start, &rho, &flow_config(n, t_end, &start, 200))?;
            let m = mk1(&Measure::empirical(&trace.final_state()), &Measure::lebesgue())?;
            let (c, cap) = scaled_spacing_range(start.positions());
            Ok(UniformRun {
                t_end,
                mk1: m,
                excess: m - 0.25 / n as f64,
                violations: spacing_monitor(&trace, c, cap, true).violations.len(),
                energy_increase: max_energy_increase(&trace),
                trace,
            })
        })?;

        let mut table = Table::new("endgame", &["N", "t_end", "mk1_final", "excess", "excess_n2"]);
        for (&n, r) in s.n.iter().zip(&runs) {
            table.push(vec![n.into(), r.t_end.into(), r.mk1.into(), r.excess.into(), (r.excess * (n * n) as f64).into()]);
        }
        let min_excess = runs.iter().map(|r| r.excess).fold(f64::INFINITY, f64::min);
        let mut assertions = vec![Assertion::at_least("excess_positive", min_excess, f64::MIN_POSITIVE)];
        if s.n.len() >= 3 && min_excess > 0.0 {
            let pts: Vec<(f64, f64)> = s.n.iter().zip(&runs).map(|(&n, r)| (n as f64, r.excess)).collect();
            assertions.push(Assertion::at_least("excess_order", fit_rate(&pts)?.order, 1.9));
        }
        let violations: usize = runs.iter().map(|r| r.violations).sum();
        assertions.push(Assertion::at_most("spacing_band", violations as f64, 0.0));
        let inc = runs.iter().map(|r| r.energy_increase).fold(0.0, f64::max);
        assertions.push(Assertion::at_most("energy_monotone", inc, 1e-12));

        let mut tables = vec![table];
        tables.extend(runs.iter().map(|r| trace_table(&r.trace)));
        Ok(Outcome { assertions, tables })
    }
}

pub struct GeneralRate;

impl Experiment for GeneralRate {
    fn name(&self) -> &'static str {
        "general-rate"
    }

    fn claim(&self) -> &'static str {
        "smooth positive density: MK1(empirical measure, gamma rho^(1/3) dx) <= C/N for all late times"
    }

    fn details(&self) -> &'static str {
        "rho = 1 + eps cos(2 pi x). Particles start at the stationary continuum map sampled at
(i - 1/2)/N plus seeded offsets bounded by 1e-3/N^2, and run to log N / c + 1.

assertions:
  k_ratio            max/min over N of K = N * mk1 <= 3
  mk1_order          fitted decay order of mk1 >= 0.9
  spacing_band       records with N*spacing outside [c/2, 2C] = 0

tables:
  endgame.csv        N, t_end, mk1_final, k
  trace_n<N>.csv     time, energy, min_w, max_w"
    }

    fn defaults(&self) -> Settings {
        Settings { n: vec![8, 16, 32], m: 0, eps: 0.02, deltas: vec![], seed: 7, t_end: None }
    }

    fn validate(&self, s: &Settings) -> std::result::Result<(), String> {
        cosine_admissible(s)
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let rho = Density::cosine(s.eps)?;
        let target = cube_root_measure(&rho)?;
        let xbar = stationary_profile(&rho, 2048)?;
        let runs = sweep(&s.n, |n| {
            let start = jitter(sample_midpoints(&xbar, n), 1e-3, member_seed(s.seed, n))?;
            let t_end = s.t_end.unwrap_or_else(|| endgame_time(n) + 1.0);
            let trace = integrate(&start, &rho, &flow_config(n, t_end, &start, 200))?;
            let m = mk1(&Measure::empirical(&trace.final_state()), &target)?;
            let (c, cap) = scaled_spacing_range(start.positions());
            let violations = spacing_monitor(&trace, c, cap, false).violations.len();
            Ok((t_end, m, violations, trace))
        })?;

        let mut table = Table::new("endgame", &["N", "t_end", "mk1_final", "k"]);
        for (&n, (t, m, _, _)) in s.n.iter().zip(&runs) {
            table.push(vec![n.into(), (*t).into(), (*m).into(), (n as f64 * m).into()]);
        }
        let ks: Vec<f64> = s.n.iter().zip(&runs).map(|(&n, r)| n as f64 * r.1).collect();
        let mut assertions = vec![Assertion::at_most("k_ratio", spread(&ks), 3.0)];
        if s.n.len() >= 3 {
            let pts: Vec<(f64, f64)> = s.n.iter().zip(&runs).map(|(&n, r)| (n as f64, r.1)).collect();
            assertions.push(Assertion::at_least("mk1_order", fit_rate(&pts)?.order, 0.9));
        }
        let violations: usize = runs.iter().map(|r| r.2).sum();
        assertions.push(Assertion::at_most("spacing_band", violations as f64, 0.0));

        let mut tables = vec![table];
        tables.extend(runs.iter().map(|r| trace_table(&r.3)));
        Ok(Outcome { assertions, tables })
    }
}

pub struct MinimizerQuality;

impl Experiment for MinimizerQuality {
    fn name(&self) -> &'static str {
        "minimizer-quality"
    }

    fn claim(&self) -> &'static str {
        "long-time flows approximate minimizers: N^2 F_N -> (1/12)(int rho^(1/3))^3 and f(t) -> gamma rho^(1/3)"
    }

    fn details(&self) -> &'static str {
        "rho = 1 + eps cos(2 pi x). Particles start on the midpoint lattice and run to
log N / c + 2; the Eulerian equation starts from 1 + 0.3 cos(2 pi x) on m cells and
runs to t_end (default 4).

assertions:
  energy_gap_order   fitted decay order of |N^2 F_N - (1/12)(int rho^(1/3))^3| >= 1.5
  eulerian_l1        L1 distance of f(t_end) to gamma rho^(1/3) <= 5/m^2 + 1e-6
  eulerian_mass      mass drift <= 1e-12

tables:
  energy.csv         N, t_end, n2_energy, limit, gap
  eulerian.csv       time, l1_to_limit"
    }

    fn defaults(&self) -> Settings {
        Settings { n: vec![8, 16, 32], m: 256, eps: 0.1, deltas: vec![], seed: 7, t_end: Some(4.0) }
    }

    fn validate(&self, s: &Settings) -> std::result::Result<(), String> {
        if s.m < 8 {
            return Err(format!("m = {} is below 8", s.m));
        }
        cosine_admissible(s)
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let rho = Density::cosine(s.eps)?;
        let gamma = cube_root_normalizer(&rho);
        let limit = 1.0 / (12.0 * gamma.powi(3));
        let runs = sweep(&s.n, |n| {
            let start = ParticleState::lattice(n);
            let t_end = endgame_time(n) + 2.0;
            let trace = integrate(&start, &rho, &flow_config(n, t_end, &start, 50))?;
            let e = discrete_energy(&trace.final_state(), &rho, 2.0)?.value * (n * n) as f64;
            Ok((t_end, e))
        })?;
        let mut energy = Table::new("energy", &["N", "t_end", "n2_energy", "limit", "gap"]);
        for (&n, (t, e)) in s.n.iter().zip(&runs) {
            energy.push(vec![n.into(), (*t).into(), (*e).into(), limit.into(), (e - limit).into()]);
        }
        let mut assertions = Vec::new();
        if s.n.len() >= 3 {
            let pts: Vec<(f64, f64)> = s.n.iter().zip(&runs).map(|(&n, r)| (n as f64, (r.1 - limit).abs())).collect();
            assertions.push(Assertion::at_least("energy_gap_order", fit_rate(&pts)?.order, 1.5));
        }

        let t_end = s.t_end.unwrap_or(4.0);
        let f0 = EulerianField::from_fn(s.m, |x| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).cos())?;
        let traj = eulerian_integrate(&f0, &rho, &PdeConfig::new(t_end).with_record_count(40))?;
        let profile = EulerianField::cube_root_profile(&rho, s.m)?;
        let mut eulerian = Table::new("eulerian", &["time", "l1_to_limit"]);
        for (t, f) in traj.times.iter().zip(&traj.fields) {
            eulerian.push(vec![(*t).into(), f.l1_distance(&profile)?.into()]);
        }
        let mf = s.m as f64;
        let l1 = traj.final_field().l1_distance(&profile)?;
        assertions.push(Assertion::at_most("eulerian_l1", l1, 5.0 / (mf * mf) + 1e-6));
        assertions.push(Assertion::at_most("eulerian_mass", traj.mass_drift, 1e-12));
        Ok(Outcome { assertions, tables: vec![energy, eulerian] })
    }
}

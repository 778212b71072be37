use std::f64::consts::PI;

use quantlab_core::analysis::{fit_rate, trajectory_l2_compare, DecayReport};
use quantlab_core::field_flow::{lagrangian_integrate, PdeConfig};
use quantlab_core::particle_flow::{integrate_to_times, ParticleFlowConfig};
use quantlab_core::{Density, LagrangianField, ParticleState, Result};
use rayon::prelude::*;

use super::{jitter, member_seed, sample_midpoints, spread, sweep};
use crate::outcome::{Assertion, Outcome, Table};
use crate::registry::Experiment;
use crate::settings::Settings;

pub struct Closeness;

const RECORDS: usize = 20;

fn initial_map(theta: f64) -> f64 {
    theta + 0.1 * (PI * theta).sin()
}

/// D(t) for each N against one continuum reference.
fn compare(rho: &Density, s: &Settings, t_end: f64, perturb: bool) -> Result<Vec<DecayReport>> {
    let times: Vec<f64> = (0..=RECORDS).map(|k| t_end * k as f64 / RECORDS as f64).collect();
    let field0 = LagrangianField::from_fn(s.m, initial_map)?;
    let reference = lagrangian_integrate(&field0, rho, &PdeConfig::new(t_end).with_record_times(times.clone()))?;
    sweep(&s.n, |n| {
        let exact: Vec<f64> = (1..=n).map(|i| initial_map((i as f64 - 0.5) / n as f64)).collect();
        let start = if perturb { jitter(exact, 1e-3, member_seed(s.seed, n))? } else { ParticleState::new(exact)? };
        let cfg = ParticleFlowConfig::new(t_end).with_floor_from(&start);
        let mut trace = integrate_to_times(&start, rho, &cfg, &times)?;
        let samples: Vec<Vec<f64>> = reference.fields.iter().map(|f| sample_midpoints(f, n)).collect();
        trace.attach_reference(&samples)?;
        trajectory_l2_compare(&trace)
    })
}

impl Experiment for Closeness {
    fn name(&self) -> &'static str {
        "closeness"
    }

    fn claim(&self) -> &'static str {
        "discrete and continuum flows stay O(N^-2) apart: (1/N) sum (x_i - X_i)^2 <= C/N^4 for all times"
    }

    fn details(&self) -> &'static str {
        "Compares the rescaled particle flow with the Lagrangian continuum flow (m cells) sampled
at (i - 1/2)/N, both started from X0 = theta + 0.1 sin(pi theta), for rho = 1 and for
rho = 1 + eps cos(2 pi x). In the cosine case the particles get seeded offsets bounded by
1e-3/N^2. D(t) = (1/N) sum (x_i - X_i)^2 is recorded at 21 equally spaced times up to
t_end (default 1).

assertions:
  plateau_order_uniform   fitted order in N of sup_t D(t), rho = 1, >= 3.5
  plateau_order_cosine    the same for the cosine density
  cosine_k_ratio          max/min over N of N^4 sup_t D(t), cosine density, <= 3

tables:
  distance.csv            density, N, time, d
  plateau.csv             density, N, sup_d, k, rate"
    }

    fn defaults(&self) -> Settings {
        Settings { n: vec![16, 32, 64], m: 512, eps: 0.02, deltas: vec![], seed: 7, t_end: Some(1.0) }
    }

    fn uses_grid(&self) -> bool {
        true
    }

    fn validate(&self, s: &Settings) -> std::result::Result<(), String> {
        Density::cosine(s.eps).and_then(|r| r.check_flow_admissible()).map_err(|e| e.to_string())
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let t_end = s.t_end.unwrap_or(1.0);
        let cases = [("uniform", Density::uniform(), false), ("cosine", Density::cosine(s.eps)?, true)];
        let reports: Vec<Vec<DecayReport>> =
            cases.par_iter().map(|(_, rho, perturb)| compare(rho, s, t_end, *perturb)).collect::<Result<_>>()?;

        let mut distance = Table::new("distance", &["density", "N", "time", "d"]);
        let mut plateau = Table::new("plateau", &["density", "N", "sup_d", "k", "rate"]);
        let mut assertions = Vec::new();
        for ((name, _, _), reps) in cases.iter().zip(&reports) {
            for r in reps {
                for (t, d) in r.times.iter().zip(&r.d) {
                    distance.push(vec![(*name).into(), r.n.into(), (*t).into(), (*d).into()]);
                }
                let k = r.sup * (r.n as f64).powi(4);
                plateau.push(vec![(*name).into(), r.n.into(), r.sup.into(), k.into(), r.rate.into()]);
            }
            if s.n.len() >= 3 {
                let pts: Vec<(f64, f64)> = reps.iter().map(|r| (r.n as f64, r.sup)).collect();
                assertions.push(Assertion::at_least(format!("plateau_order_{name}"), fit_rate(&pts)?.order, 3.5));
            }
        }
        let ks: Vec<f64> = reports[1].iter().map(|r| r.sup * (r.n as f64).powi(4)).collect();
        assertions.push(Assertion::at_most("cosine_k_ratio", spread(&ks), 3.0));
        Ok(Outcome { assertions, tables: vec![distance, plateau] })
    }
}

use std::f64::consts::PI;

use quantlab_core::analysis::fit_rate;
use quantlab_core::field_flow::{
    consistency_residual, eulerian_integrate, lagrangian_integrate, EulerianField, LagrangianTrajectory, PdeConfig,
};
use quantlab_core::{Density, LagrangianField, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::outcome::{Assertion, Outcome, Table};
use crate::registry::Experiment;
use crate::settings::Settings;

fn cosine_admissible(s: &Settings) -> std::result::Result<(), String> {
    Density::cosine(s.eps).and_then(|r| r.check_flow_admissible()).map_err(|e| e.to_string())
}

fn densities(eps: f64) -> Result<[(&'static str, Density); 2]> {
    Ok([("uniform", Density::uniform()), ("cosine", Density::cosine(eps)?)])
}

pub struct ResidualOrder;

impl Experiment for ResidualOrder {
    fn name(&self) -> &'static str {
        "residual-order"
    }

    fn claim(&self) -> &'static str {
        "the continuum solution solves the particle system up to an O(N^-2) residual"
    }

    fn details(&self) -> &'static str {
        "Samples X = theta + 0.1 sin(pi theta), given on m nodes, at (i - 1/2)/N and inserts it
into the rescaled particle velocity, for rho = 1 and rho = 1 + eps cos(2 pi x).

assertions:
  order_uniform      fitted order in N of the sup-norm residual, rho = 1, >= 1.9
  order_cosine       the same for the cosine density

tables:
  residual.csv       density, N, sup_residual"
    }

    fn defaults(&self) -> Settings {
        Settings { n: vec![8, 16, 32, 64], m: 4096, eps: 0.05, deltas: vec![], seed: 7, t_end: None }
    }

    fn uses_grid(&self) -> bool {
        true
    }

    fn validate(&self, s: &Settings) -> std::result::Result<(), String> {
        cosine_admissible(s)
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let field = LagrangianField::from_fn(s.m, |t| t + 0.1 * (PI * t).sin())?;
        let mut table = Table::new("residual", &["density", "N", "sup_residual"]);
        let mut assertions = Vec::new();
        for (name, rho) in densities(s.eps)? {
            let sups: Vec<f64> =
                s.n.par_iter().map(|&n| Ok(consistency_residual(&field, &rho, n)?.sup_norm)).collect::<Result<_>>()?;
            for (&n, v) in s.n.iter().zip(&sups) {
                table.push(vec![name.into(), n.into(), (*v).into()]);
            }
            if s.n.len() >= 3 {
                let pts: Vec<(f64, f64)> = s.n.iter().zip(&sups).map(|(&n, &v)| (n as f64, v)).collect();
                assertions.push(Assertion::at_least(format!("order_{name}"), fit_rate(&pts)?.order, 1.9));
            }
        }
        Ok(Outcome { assertions, tables: vec![table] })
    }
}

pub struct L2Stability;

const STABILITY_RECORDS: usize = 40;

/// h Σ (X₁ - X₂)² at every record.
fn l2_gap(a: &LagrangianTrajectory, b: &LagrangianTrajectory) -> Vec<f64> {
    a.fields
        .iter()
        .zip(&b.fields)
        .map(|(x, y)| {
            let h = 1.0 / x.m() as f64;
            x.values().iter().zip(y.values()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() * h
        })
        .collect()
}

impl Experiment for L2Stability {
    fn name(&self) -> &'static str {
        "l2-stability"
    }

    fn claim(&self) -> &'static str {
        "L2 contraction of the continuum flow: int (X1 - X2)^2 decays like exp(-4 c t) for rho = 1, exponentially for small smooth rho"
    }

    fn details(&self) -> &'static str {
        "Two Lagrangian solutions on m cells from X1 = theta + 0.1 sin(pi theta) and
X2 = theta - 0.05 sin(2 pi theta), up to t_end (default 2), 41 records. c is the smallest
initial slope of either map.

assertions:
  uniform_rate       min over t > 0 of -log(D(t)/D(0))/t >= 0.9 * 4c
  cosine_monotone    largest increase of D between records, rho = 1 + eps cos(2 pi x), <= 0
  cosine_rate        -log(D(t_end)/D(0))/t_end, cosine density, > 0

tables:
  gap.csv            density, time, l2_sq"
    }

    fn defaults(&self) -> Settings {
        Settings { n: vec![1], m: 256, eps: 0.02, deltas: vec![], seed: 7, t_end: Some(2.0) }
    }

    fn validate(&self, s: &Settings) -> std::result::Result<(), String> {
        if s.m < 8 {
            return Err(format!("m = {} is below 8", s.m));
        }
        cosine_admissible(s)
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let t_end = s.t_end.unwrap_or(2.0);
        let x1 = LagrangianField::from_fn(s.m, |t| t + 0.1 * (PI * t).sin())?;
        let x2 = LagrangianField::from_fn(s.m, |t| t - 0.05 * (2.0 * PI * t).sin())?;
        let c = x1.slopes().into_iter().chain(x2.slopes()).fold(f64::INFINITY, f64::min);
        let cfg = PdeConfig::new(t_end).with_record_count(STABILITY_RECORDS);
        let dens = densities(s.eps)?;
        let gaps: Vec<(Vec<f64>, Vec<f64>)> = dens
            .par_iter()
            .map(|(_, rho)| {
                let a = lagrangian_integrate(&x1, rho, &cfg)?;
                let b = lagrangian_integrate(&x2, rho, &cfg)?;
                Ok((a.times.clone(), l2_gap(&a, &b)))
            })
            .collect::<Result<_>>()?;

        let mut table = Table::new("gap", &["density", "time", "l2_sq"]);
        for ((name, _), (times, d)) in dens.iter().zip(&gaps) {
            for (t, v) in times.iter().zip(d) {
                table.push(vec![(*name).into(), (*t).into(), (*v).into()]);
            }
        }
        let (times, d) = &gaps[0];
        let rate = times.iter().zip(d).skip(1).map(|(t, v)| -(v / d[0]).ln() / t).fold(f64::INFINITY, f64::min);
        let (times, d) = &gaps[1];
        let increase = d.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let cos_rate = -(d[d.len() - 1] / d[0]).ln() / times[times.len() - 1];
        let assertions = vec![
            Assertion::at_least("uniform_rate", rate, 0.9 * 4.0 * c),
            Assertion::at_most("cosine_monotone", increase, 0.0),
            Assertion::at_least("cosine_rate", cos_rate, f64::MIN_POSITIVE),
        ];
        Ok(Outcome { assertions, tables: vec![table] })
    }
}

pub struct ComparisonPrinciple;

const CASES: usize = 5;

impl Experiment for ComparisonPrinciple {
    fn name(&self) -> &'static str {
        "comparison-principle"
    }

    fn claim(&self) -> &'static str {
        "comparison principle for the Eulerian equation: int (u - c)_+ and int (u - c)_- are non-increasing, u = f / rho^(1/3)"
    }

    fn details(&self) -> &'static str {
        "Five seeded initial densities 1 + a cos(2 pi k x + phi) (a in [0.1, 0.5], k in 1..3) on
m cells, evolved to t_end (default 0.2) for rho = 1 and rho = 1 + eps cos(2 pi x). Levels
c are min u0 and max u0. The monitored integrals carry the weight rho^(1/3) (which the
scheme contracts exactly); the unweighted integrals are reported.

assertions:
  weighted_uniform   largest single-step increase of any monitored integral, rho = 1, <= 1e-8
  weighted_cosine    the same for the cosine density

tables:
  comparison.csv     density, case, amplitude, mode, max_increase_weighted, max_increase_unweighted"
    }

    fn defaults(&self) -> Settings {
        Settings { n: vec![1], m: 256, eps: 0.1, deltas: vec![], seed: 7, t_end: Some(0.2) }
    }

    fn validate(&self, s: &Settings) -> std::result::Result<(), String> {
        if s.m < 8 {
            return Err(format!("m = {} is below 8", s.m));
        }
        cosine_admissible(s)
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let t_end = s.t_end.unwrap_or(0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let data: Vec<(f64, usize, f64)> =
            (0..CASES).map(|_| (rng.gen_range(0.1..0.5), rng.gen_range(1..=3), rng.gen_range(0.0..2.0 * PI))).collect();
        let cfg = PdeConfig::new(t_end).with_record_count(20);
        let mut table = Table::new(
            "comparison",
            &["density", "case", "amplitude", "mode", "max_increase_weighted", "max_increase_unweighted"],
        );
        let mut assertions = Vec::new();
        for (name, rho) in densities(s.eps)? {
            let results: Vec<(f64, f64)> = data
                .par_iter()
                .map(|&(a, k, phi)| {
                    let f0 = EulerianField::from_fn(s.m, |x| 1.0 + a * (2.0 * PI * k as f64 * x + phi).cos())?;
                    let cm = eulerian_integrate(&f0, &rho, &cfg)?.comparison;
                    Ok((cm.max_increase_weighted, cm.max_increase_unweighted))
                })
                .collect::<Result<_>>()?;
            for (i, ((a, k, _), (w, u))) in data.iter().zip(&results).enumerate() {
                table.push(vec![name.into(), i.into(), (*a).into(), (*k).into(), (*w).into(), (*u).into()]);
            }
            let worst = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
            assertions.push(Assertion::at_most(format!("weighted_{name}"), worst, 1e-8));
        }
        Ok(Outcome { assertions, tables: vec![table] })
    }
}

use quantlab_core::analysis::discrete_poincare_check;
use quantlab_core::convexity::{
    convexity_certificate, counterexample_interior_value, counterexample_limit, counterexample_suite, hessian_form,
    random_probe, second_difference_oracle,
};
use quantlab_core::{Density, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::member_seed;
use crate::outcome::{Assertion, Outcome, Table};
use crate::registry::Experiment;
use crate::settings::Settings;

pub struct Poincare;

const VECTORS: usize = 1000;

impl Experiment for Poincare {
    fn name(&self) -> &'static str {
        "poincare"
    }

    fn claim(&self) -> &'static str {
        "discrete Poincare inequality (1/N) sum u_i^2 <= ((N+1)/(2N)) (1/N) sum N^2 (u_{i+1} - u_i)^2 for u_0 = 0"
    }

    fn details(&self) -> &'static str {
        "For each N, 1000 seeded vectors with u_0 = 0 and entries uniform in [-1, 1], plus the
linear vector u_i = i/N. Whether the constant 1/2 also holds is recorded; it is asserted
only for the random vectors with N >= 4.

assertions:
  corrected_failures     vectors violating the (N+1)/(2N) inequality = 0
  half_failures_n_ge_4   random vectors with N >= 4 violating the 1/2 inequality = 0

tables:
  poincare.csv           N, max_ratio, corrected_constant, half_holds_fraction, linear_half_holds"
    }

    fn defaults(&self) -> Settings {
        Settings { n: (1..=64).collect(), m: 0, eps: 0.0, deltas: vec![], seed: 7, t_end: None }
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let mut table =
            Table::new("poincare", &["N", "max_ratio", "corrected_constant", "half_holds_fraction", "linear_half_holds"]);
        let (mut corrected_failures, mut half_failures) = (0usize, 0usize);
        for &n in &s.n {
            let mut rng = ChaCha8Rng::seed_from_u64(member_seed(s.seed, n));
            let mut max_ratio: f64 = 0.0;
            let mut half = 0usize;
            for _ in 0..VECTORS {
                let mut u: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                u[0] = 0.0;
                let r = discrete_poincare_check(&u, n)?;
                if r.gradient > 0.0 {
                    max_ratio = max_ratio.max(r.lhs / r.gradient);
                }
                corrected_failures += usize::from(!r.pass);
                half += usize::from(r.half_constant_holds);
                if n >= 4 && !r.half_constant_holds {
                    half_failures += 1;
                }
            }
            let linear: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let lin = discrete_poincare_check(&linear, n)?;
            corrected_failures += usize::from(!lin.pass);
            table.push(vec![
                n.into(),
                max_ratio.into(),
                ((n + 1) as f64 / (2 * n) as f64).into(),
                (half as f64 / VECTORS as f64).into(),
                lin.half_constant_holds.into(),
            ]);
        }
        let assertions = vec![
            Assertion::at_most("corrected_failures", corrected_failures as f64, 0.0),
            Assertion::at_most("half_failures_n_ge_4", half_failures as f64, 0.0),
        ];
        Ok(Outcome { assertions, tables: vec![table] })
    }
}

pub struct Hessian;

const PROBES: usize = 30;

impl Experiment for Hessian {
    fn name(&self) -> &'static str {
        "hessian"
    }

    fn claim(&self) -> &'static str {
        "second variation of int rho(X) X_theta^3: positive for small smooth rho, negative along a band probe for a mollified indicator (limit 4 eps - 4)"
    }

    fn details(&self) -> &'static str {
        "Counterexample: rho_delta is the Gaussian mollification (sigma = sqrt(delta)) of the
indicator of [1/2 - eps, 1/2 + eps], X = theta, Y = |theta - 1/2| + 1 inside the band and
1 + eps outside. Its mollified limit including the band-edge terms is 8 eps - 4; dropping
them gives 4 eps - 4. Oracle check: 30 seeded probes (slopes of X in [1/2, 2], Dirichlet
directions) on 256 cells for rho = 1 + 0.1 cos(2 pi x), against the second difference of
the energy with step 1e-3. Certificate: the sufficient condition
6 lambda c > 6 C^2 |rho'| + C^3 |rho''| on the band [1/2, 2].

assertions:
  counterexample_interior_value   |H(smallest delta) - (4 eps - 4)| <= 0.05
  counterexample_edge_limit       |H(smallest delta) - (8 eps - 4)| <= 2 sqrt(delta) + 1e-3
  counterexample_negative         H(smallest delta) < 0
  oracle_agreement                max relative |form - second difference| <= 1e-3
  uniform_certificate             certificate margin for rho = 1 > 0

tables:
  counterexample.csv   eps, delta, hessian_value, exact_limit, interior_value
  oracle.csv           probe, form, second_difference, relative_error
  certificate.csv      density, margin, displayed_margin, pass, sampled_min"
    }

    fn defaults(&self) -> Settings {
        Settings { n: vec![1], m: 256, eps: 0.1, deltas: vec![1e-2, 1e-3, 1e-4], seed: 7, t_end: None }
    }

    fn validate(&self, s: &Settings) -> std::result::Result<(), String> {
        if !(s.eps > 0.0 && s.eps < 0.5) {
            return Err(format!("band half-width eps = {} must lie in (0, 1/2)", s.eps));
        }
        if s.deltas.is_empty() {
            return Err("deltas must not be empty".into());
        }
        if s.m < 16 {
            return Err(format!("m = {} is below 16", s.m));
        }
        Ok(())
    }

    fn run(&self, s: &Settings) -> Result<Outcome> {
        let rows = counterexample_suite(s.eps, &s.deltas)?;
        let mut counter = Table::new("counterexample", &["eps", "delta", "hessian_value", "exact_limit", "interior_value"]);
        for r in &rows {
            counter.push(vec![r.eps.into(), r.delta.into(), r.hessian_value.into(), r.exact_limit.into(), r.interior_value.into()]);
        }
        let last = rows.iter().min_by(|a, b| a.delta.total_cmp(&b.delta)).expect("deltas are nonempty");

        let rho = Density::cosine(0.1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let mut oracle = Table::new("oracle", &["probe", "form", "second_difference", "relative_error"]);
        let mut worst: f64 = 0.0;
        for k in 0..PROBES {
            let p = random_probe(&mut rng, s.m, 0.5, 2.0)?;
            let form = hessian_form(&p, &rho)?;
            let fd = second_difference_oracle(&p, &rho, 1e-3)?;
            let rel = (form - fd).abs() / fd.abs().max(1e-12);
            worst = worst.max(rel);
            oracle.push(vec![k.into(), form.into(), fd.into(), rel.into()]);
        }

        let mut cert = Table::new("certificate", &["density", "margin", "displayed_margin", "pass", "sampled_min"]);
        let mut uniform_margin = 0.0;
        for (name, rho) in [("uniform", Density::uniform()), ("cosine_0.005", Density::cosine(0.005)?), ("cosine_0.1", rho)] {
            let c = convexity_certificate(&rho, 0.5, 2.0, s.seed)?;
            if name == "uniform" {
                uniform_margin = c.margin;
            }
            let sampled = c.sampled_min.map(Into::into).unwrap_or_else(|| "".into());
            cert.push(vec![name.into(), c.margin.into(), c.displayed_margin.into(), c.pass.into(), sampled]);
        }

        let assertions = vec![
            Assertion::within(
                "counterexample_interior_value",
                last.hessian_value,
                counterexample_interior_value(s.eps),
                0.05,
            ),
            Assertion::within(
                "counterexample_edge_limit",
                last.hessian_value,
                counterexample_limit(s.eps),
                2.0 * last.delta.sqrt() + 1e-3,
            ),
            Assertion::at_most("counterexample_negative", last.hessian_value, -f64::MIN_POSITIVE),
            Assertion::at_most("oracle_agreement", worst, 1e-3),
            Assertion::at_least("uniform_certificate", uniform_margin, f64::MIN_POSITIVE),
        ];
        Ok(Outcome { assertions, tables: vec![counter, oracle, cert] })
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stderr so it shows up without `--nocapture`.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use quantlab::{Outcome, Registry, Settings};
use quantlab_core::energy::{discrete_energy, gradient_f_n2, BoundaryConvention};
use quantlab_core::particle_flow::perturbed_lattice;
use quantlab_core::transport::{mk1, quantization_identity_check, Measure};
use quantlab_core::{Density, ParticleState};

/// Criteria that fail for a documented reason (see the README section on known deviations).
/// The suite requires these to fail, so a change in either direction is noticed.
const KNOWN_RED: &[usize] = &[11];

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

fn run(name: &str, tweak: impl FnOnce(&mut Settings)) -> Outcome {
    let registry = Registry::builtin();
    let exp = registry.get(name).expect("registered experiment");
    let mut s = exp.defaults();
    tweak(&mut s);
    s.check(exp.uses_grid()).expect("valid settings");
    exp.validate(&s).expect("valid settings");
    exp.run(&s).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn assertions_pass(o: &Outcome, names: &[&str]) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in names {
        let a = o.assertion(n).unwrap_or_else(|| panic!("missing assertion {n}"));
        pass &= a.pass;
        parts.push(format!("{n}={:.4e} (bound {:.4e})", a.value, a.bound));
    }
    check(pass, parts.join(", "))
}

fn c01_midpoint_mk1() -> Check {
    let mut worst: f64 = 0.0;
    for n in [1usize, 2, 4, 8, 16, 64] {
        let d = mk1(&Measure::empirical(&ParticleState::lattice(n)), &Measure::lebesgue()).unwrap();
        worst = worst.max((d - 0.25 / n as f64).abs());
    }
    check(worst <= 1e-10, format!("max |mk1 - 1/(4N)| = {worst:.3e}"))
}

fn c02_lattice_energy() -> Check {
    let mut worst: f64 = 0.0;
    for n in [1usize, 2, 4, 8, 16, 64] {
        let e = discrete_energy(&ParticleState::lattice(n), &Density::uniform(), 2.0).unwrap().value;
        worst = worst.max(((n * n) as f64 * e - 1.0 / 12.0).abs());
    }
    check(worst <= 1e-10, format!("max |N^2 F - 1/12| = {worst:.3e}"))
}

fn c03_gradient() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for rho in [Density::uniform(), Density::cosine(0.1).unwrap()] {
        for n in [2usize, 5, 16] {
            for seed in 0..50u64 {
                let s = perturbed_lattice(n, 0.3, 1000 + seed).unwrap();
                let g = gradient_f_n2(&s, &rho, BoundaryConvention::Static).unwrap();
                let h = 1e-5 / n as f64;
                let x = s.positions();
                let fd: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut p = x.to_vec();
                        let mut m = x.to_vec();
                        p[i] += h;
                        m[i] -= h;
                        let ep = discrete_energy(&ParticleState::new(p).unwrap(), &rho, 2.0).unwrap().value;
                        let em = discrete_energy(&ParticleState::new(m).unwrap(), &rho, 2.0).unwrap().value;
                        (ep - em) / (2.0 * h)
                    })
                    .collect();
                let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
                let err = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst = worst.max(err / scale);
                count += 1;
            }
        }
    }
    check(worst <= 1e-6, format!("{count} states, max relative error {worst:.3e}"))
}

fn c04_residual_order() -> Check {
    assertions_pass(&run("residual-order", |_| {}), &["order_uniform", "order_cosine"])
}

fn c05_closeness() -> Check {
    assertions_pass(&run("closeness", |_| {}), &["plateau_order_uniform", "plateau_order_cosine", "cosine_k_ratio"])
}

fn c06_uniform_endgame() -> Check {
    assertions_pass(&run("uniform-rate", |_| {}), &["excess_positive", "excess_order"])
}

fn c07_general_endgame() -> Check {
    assertions_pass(&run("general-rate", |_| {}), &["k_ratio"])
}

fn c08_l2_contraction() -> Check {
    assertions_pass(&run("l2-stability", |_| {}), &["uniform_rate", "cosine_monotone", "cosine_rate"])
}

fn c09_comparison() -> Check {
    assertions_pass(&run("comparison-principle", |_| {}), &["weighted_uniform", "weighted_cosine"])
}

fn c10_eulerian_limit() -> Check {
    assertions_pass(&run("minimizer-quality", |_| {}), &["eulerian_l1"])
}

fn c11_hessian() -> Check {
    let o = run("hessian", |s| s.deltas = vec![1e-4]);
    let value = match o.table("counterexample").unwrap().rows[0][2] {
        quantlab::Value::F(v) => v,
        ref other => panic!("unexpected cell {other:?}"),
    };
    let mut c = assertions_pass(&o, &["counterexample_interior_value", "oracle_agreement"]);
    c.detail = format!("H = {value:.5} at delta = 1e-4 (expected -3.6 +- 0.05, edge-corrected limit -3.2); {}", c.detail);
    c
}

fn c12_poincare() -> Check {
    assertions_pass(&run("poincare", |_| {}), &["corrected_failures"])
}

fn c13_quantization_identity() -> Check {
    let mut worst: f64 = 0.0;
    let mut all = true;
    for rho in [Density::uniform(), Density::cosine(0.1).unwrap()] {
        for n in [2usize, 3, 5] {
            for r in [1.0, 2.0] {
                for seed in 0..5u64 {
                    let s = perturbed_lattice(n, 0.3, 77 + seed).unwrap();
                    let rep = quantization_identity_check(&s, &rho, r, seed).unwrap();
                    worst = worst.max(rep.relative_error);
                    all &= rep.masses_optimal;
                }
            }
        }
    }
    check(worst <= 1e-6 && all, format!("max relative error {worst:.3e}, optimal masses beat perturbations: {all}"))
}

fn c14_determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_quantlab");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut files = Vec::new();
    for d in &dirs {
        for exp in ["uniform-rate", "comparison-principle"] {
            let status = Command::new(bin)
                .args(["run", "--experiment", exp, "--seed", "11", "--out"])
                .arg(d.path())
                .output()
                .unwrap()
                .status;
            assert_eq!(status.code(), Some(0), "{exp}");
        }
        let mut listing: Vec<(String, Vec<u8>)> = Vec::new();
        for exp in ["uniform-rate", "comparison-principle"] {
            for entry in std::fs::read_dir(d.path().join(exp)).unwrap() {
                let p = entry.unwrap().path();
                if p.extension().is_some_and(|e| e == "csv") {
                    listing.push((format!("{exp}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap()));
                }
            }
        }
        listing.sort();
        files.push(listing);
    }
    let same = files[0] == files[1] && !files[0].is_empty();
    check(same, format!("{} CSV files compared", files[0].len()))
}

type Criterion = (usize, &'static str, Duration, fn() -> Check);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 14] = [
        (1, "midpoint lattice MK1 = 1/(4N)", Duration::from_secs(1), c01_midpoint_mk1),
        (2, "lattice energy N^2 F = 1/12", Duration::from_secs(1), c02_lattice_energy),
        (3, "gradient matches finite differences", Duration::from_secs(10), c03_gradient),
        (4, "consistency residual order >= 1.9", Duration::from_secs(30), c04_residual_order),
        (5, "closeness plateau order >= 3.5", Duration::from_secs(300), c05_closeness),
        (6, "uniform endgame excess order >= 1.9", Duration::from_secs(300), c06_uniform_endgame),
        (7, "general endgame K/N with stable K", Duration::from_secs(300), c07_general_endgame),
        (8, "L2 contraction rate", Duration::from_secs(60), c08_l2_contraction),
        (9, "comparison principle monitors", Duration::from_secs(60), c09_comparison),
        (10, "Eulerian limit in L1", Duration::from_secs(60), c10_eulerian_limit),
        (11, "Hessian counterexample and oracle", Duration::from_secs(30), c11_hessian),
        (12, "discrete Poincare, corrected constant", Duration::from_secs(1), c12_poincare),
        (13, "quantization identity MK_r = F_{N,r}", Duration::from_secs(30), c13_quantization_identity),
        (14, "deterministic CSV artifacts", Duration::from_secs(300), c14_determinism),
    ];

    let mut err = std::io::stderr();
    let mut unexpected = Vec::new();
    for (id, title, budget, f) in criteria {
        let start = Instant::now();
        let c = f();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = c.pass && in_budget;
        let note = if KNOWN_RED.contains(&id) && !pass { " [known deviation]" } else { "" };
        writeln!(
            err,
            "criterion {id:>2} {} {title} ({:.2}s of {}s){note}: {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            c.detail
        )
        .unwrap();
        if pass == KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    assert!(unexpected.is_empty(), "criteria with unexpected status: {unexpected:?}");
}

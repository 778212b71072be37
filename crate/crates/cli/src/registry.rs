use quantlab_core::Result;

use crate::experiments;
use crate::outcome::Outcome;
use crate::settings::Settings;

/// A named, self-describing numerical experiment.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;

    /// The quantitative claim the experiment checks (written to `paper_anchor`).
    fn claim(&self) -> &'static str;

    /// Assertions and CSV schemas, for `describe`.
    fn details(&self) -> &'static str;

    fn defaults(&self) -> Settings;

    /// Whether `m` is a grid resolution subject to m ≥ 4·max(n).
    fn uses_grid(&self) -> bool {
        false
    }

    /// Experiment-specific parameter checks.
    fn validate(&self, _s: &Settings) -> std::result::Result<(), String> {
        Ok(())
    }

    fn run(&self, s: &Settings) -> Result<Outcome>;

    fn describe(&self) -> String {
        let d = self.defaults();
        let mut text = format!("{}\n\nchecks: {}\n\n{}\n\ndefaults:\n", self.name(), self.claim(), self.details().trim());
        text.push_str(&format!("  n = {:?}\n  m = {}\n  eps = {}\n", d.n, d.m, d.eps));
        if !d.deltas.is_empty() {
            text.push_str(&format!("  deltas = {:?}\n", d.deltas));
        }
        text.push_str(&format!("  seed = {}\n", d.seed));
        if let Some(t) = d.t_end {
            text.push_str(&format!("  t_end = {t}\n"));
        }
        text
    }
}

pub struct Registry {
    entries: Vec<Box<dyn Experiment>>,
}

impl Registry {
    pub fn builtin() -> Self {
        Registry {
            entries: vec![
                Box::new(experiments::UniformRate),
                Box::new(experiments::GeneralRate),
                Box::new(experiments::Closeness),
                Box::new(experiments::ResidualOrder),
                Box::new(experiments::L2Stability),
                Box::new(experiments::ComparisonPrinciple),
                Box::new(experiments::Poincare),
                Box::new(experiments::Hessian),
                Box::new(experiments::MinimizerQuality),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.entries.iter().find(|e| e.name() == name).map(|e| e.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Experiment> {
        self.entries.iter().map(|e| e.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Resolved parameters for one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    /// Particle counts, strictly increasing.
    pub n: Vec<usize>,
    /// Grid resolution of the continuum solvers.
    pub m: usize,
    /// Density parameter (cosine amplitude, or band half-width for `hessian`).
    pub eps: f64,
    /// Mollification parameters (`hessian` only).
    pub deltas: Vec<f64>,
    pub seed: u64,
    /// Overrides the experiment's final time when set.
    pub t_end: Option<f64>,
}

impl Settings {
    pub fn n_max(&self) -> usize {
        self.n.iter().copied().max().unwrap_or(0)
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(n) = &o.n {
            self.n = n.clone();
        }
        if let Some(m) = o.m {
            self.m = m;
        }
        if let Some(eps) = o.eps {
            self.eps = eps;
        }
        if let Some(d) = &o.deltas {
            self.deltas = d.clone();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if o.t_end.is_some() {
            self.t_end = o.t_end;
        }
        self
    }

    /// Checks the shape invariants shared by every experiment.
    pub fn check(&self, uses_grid: bool) -> Result<(), String> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err("n must be a nonempty list of positive integers".into());
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(format!("n must be strictly increasing, got {:?}", self.n));
        }
        if uses_grid && self.m < 4 * self.n_max() {
            return Err(format!("m = {} must be at least 4 * max(n) = {}", self.m, 4 * self.n_max()));
        }
        if !self.eps.is_finite() || self.eps < 0.0 {
            return Err(format!("eps = {} must be finite and nonnegative", self.eps));
        }
        if self.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err("deltas must be positive".into());
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("t_end = {t} must be positive"));
            }
        }
        Ok(())
    }
}

/// Optional parameter overrides, from the command line or a config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub n: Option<Vec<usize>>,
    pub m: Option<usize>,
    pub eps: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub t_end: Option<f64>,
}

/// Flat TOML run file:
///
/// ```toml
/// experiment = "uniform-rate"
/// n = [8, 16, 32]
/// seed = 7
/// out = "results"
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: String,
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub overrides: Overrides,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Settings {
        Settings { n: vec![8, 16], m: 128, eps: 0.1, deltas: vec![], seed: 1, t_end: None }
    }

    #[test]
    fn parses_flat_file() {
        let c = ConfigFile::parse("experiment = \"poincare\"\nn = [1, 2, 4]\nseed = 3\nout = \"o\"\n").unwrap();
        assert_eq!(c.experiment, "poincare");
        assert_eq!(c.overrides.n, Some(vec![1, 2, 4]));
        assert_eq!(c.overrides.seed, Some(3));
        assert_eq!(c.out, Some(PathBuf::from("o")));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ConfigFile::parse("experiment = \"poincare\"\nbogus = 1\n").is_err());
        assert!(ConfigFile::parse("n = [1]\n").is_err());
    }

    #[test]
    fn shape_checks() {
        assert!(base().check(true).is_ok());
        let mut s = base();
        s.n = vec![16, 8];
        assert!(s.check(false).is_err());
        let mut s = base();
        s.m = 60;
        assert!(s.check(true).is_err());
        assert!(s.check(false).is_ok());
    }

    #[test]
    fn overrides_replace_fields() {
        let o = Overrides { n: Some(vec![4]), seed: Some(9), ..Default::default() };
        let s = base().apply(&o);
        assert_eq!((s.n, s.seed, s.m), (vec![4], 9, 128));
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dmft::MomentClosure;
use crate::dynamics::IntegratorOptions;
use crate::error::{Error, Result};
use crate::random_games::DEFAULT_ELEMENT_BUDGET;

/// Value of the top-level `schema` key.
pub const CONFIG_SCHEMA: &str = "qrelab-config-v1";

/// A whole run configuration as read from TOML. Every section is optional
/// and falls back to its defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Worker threads; `None` lets the pool decide.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_budget")]
    pub budget_elements: u64,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub cdf: CdfSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub extinction_map: ExtinctionMapSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub classify: ClassifySection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_budget() -> u64 {
    DEFAULT_ELEMENT_BUDGET
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema: CONFIG_SCHEMA.to_string(),
            seed: 0,
            out_dir: default_out_dir(),
            threads: None,
            budget_elements: default_budget(),
            sweep: SweepSection::default(),
            cdf: CdfSection::default(),
            boundary: BoundarySection::default(),
            extinction_map: ExtinctionMapSection::default(),
            solve: SolveSection::default(),
            classify: ClassifySection::default(),
        }
    }
}

/// `start, start + step, …` up to `stop` inclusive, rounded to 12 digits so
/// that decimal grids print cleanly.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub pairs: Vec<(usize, usize)>,
    pub gamma_hat: Vec<f64>,
    pub t: Vec<f64>,
    pub games_per_cell: usize,
    pub starts_per_game: usize,
    pub dist_tol: f64,
    pub integrator: IntegratorOptions,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            pairs: vec![(2, 50), (3, 12), (5, 4)],
            gamma_hat: grid(0.0, 1.0, 0.1),
            t: grid(0.25, 6.0, 0.25),
            games_per_cell: 40,
            starts_per_game: 100,
            dist_tol: 0.01,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdfSection {
    pub p: usize,
    pub n: Vec<usize>,
    pub gamma_hat: f64,
    pub t: f64,
    pub games_per_size: usize,
    /// Replace every payoff by zero.
    pub zero_payoffs: bool,
    pub integrator: IntegratorOptions,
}

impl Default for CdfSection {
    fn default() -> Self {
        CdfSection {
            p: 2,
            n: vec![80, 160, 320],
            gamma_hat: 0.0,
            t: 1.8,
            games_per_size: 20,
            zero_payoffs: false,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub p: usize,
    pub gamma_hat: Vec<f64>,
    pub tol: f64,
}

impl Default for BoundarySection {
    fn default() -> Self {
        BoundarySection { p: 2, gamma_hat: grid(0.0, 1.0, 0.1), tol: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtinctionMapSection {
    pub p: usize,
    pub gamma_hat: Vec<f64>,
    pub t: Vec<f64>,
    pub tol: f64,
}

impl Default for ExtinctionMapSection {
    fn default() -> Self {
        ExtinctionMapSection { p: 2, gamma_hat: grid(0.0, 1.0, 0.1), t: grid(0.25, 6.0, 0.25), tol: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub p: usize,
    pub gamma_hat: f64,
    pub t: f64,
    pub quad_nodes: usize,
    /// Only used when `gamma_hat = 0`.
    pub closure: MomentClosure,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection { p: 2, gamma_hat: 0.5, t: 3.0, quad_nodes: 200, closure: MomentClosure::Published }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub p: usize,
    pub n: usize,
    pub gamma_hat: f64,
    pub t: f64,
    pub n_starts: usize,
    pub dist_tol: f64,
    pub integrator: IntegratorOptions,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            p: 2,
            n: 50,
            gamma_hat: 0.5,
            t: 3.0,
            n_starts: 100,
            dist_tol: 0.01,
            integrator: IntegratorOptions::default(),
        }
    }
}

fn ascending(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{name} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} must be finite and strictly ascending")));
    }
    Ok(())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!("schema {:?}, expected {CONFIG_SCHEMA:?}", self.schema)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let s = &self.sweep;
        if s.pairs.is_empty() || s.pairs.iter().any(|&(p, n)| p < 2 || n < 2) {
            return Err(Error::Config("sweep.pairs needs entries with p >= 2 and n >= 2".into()));
        }
        ascending("sweep.gamma_hat", &s.gamma_hat)?;
        ascending("sweep.t", &s.t)?;
        if s.t[0] <= 0.0 {
            return Err(Error::Config("sweep.t must be positive".into()));
        }
        if s.games_per_cell == 0 || s.starts_per_game == 0 {
            return Err(Error::Config("sweep.games_per_cell and sweep.starts_per_game must be >= 1".into()));
        }
        s.integrator.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.cdf.n.is_empty() || self.cdf.games_per_size == 0 {
            return Err(Error::Config("cdf.n and cdf.games_per_size must be non-empty".into()));
        }
        ascending("boundary.gamma_hat", &self.boundary.gamma_hat)?;
        ascending("extinction_map.gamma_hat", &self.extinction_map.gamma_hat)?;
        ascending("extinction_map.t", &self.extinction_map.t)?;
        for tol in [self.boundary.tol, self.extinction_map.tol] {
            if !(tol > 0.0) {
                return Err(Error::Config("tol must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        let s = SweepSection::default();
        assert_eq!(s.gamma_hat.len(), 11);
        assert_eq!(s.gamma_hat[3], 0.3);
        assert_eq!(s.t.len(), 24);
        assert_eq!(*s.t.last().unwrap(), 6.0);
    }

    #[test]
    fn minimal_file_parses_and_round_trips() {
        let cfg = Config::from_toml("schema = \"qrelab-config-v1\"\nseed = 9\n[sweep]\nt = [1.0, 2.0]\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sweep.t, vec![1.0, 2.0]);
        assert_eq!(cfg.sweep.games_per_cell, 40);
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "seed = 1",
            "schema = \"qrelab-config-v0\"",
            "schema = \"qrelab-config-v1\"\nbogus = 1",
            "schema = \"qrelab-config-v1\"\n[sweep]\nt = [2.0, 1.0]",
            "schema = \"qrelab-config-v1\"\n[sweep]\ngames_per_cell = 0",
        ] {
            let err = Config::from_toml(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }
}

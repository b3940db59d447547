use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::{unix_time, write_manifest, write_rows};
use crate::dmft::{extinction_rate, solve_fixed_point, stability_check, SolverParams};
use crate::dynamics::{effective_temperature, integrate, sample_initial, IntegratorOptions, Status};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::random_games::{GameParams, PayoffTensor, DEFAULT_ELEMENT_BUDGET};
use crate::seed::{derive, stream};

pub const CDF_SCHEMA: &str = "cdf-v1";
pub const CDF_SAMPLES_HEADER: [&str; 7] = ["schema", "p", "n", "gamma_hat", "t", "rank", "scaled_marginal"];
pub const CDF_SUMMARY_HEADER: [&str; 10] = [
    "schema",
    "p",
    "n",
    "gamma_hat",
    "t",
    "n_games",
    "n_excluded",
    "n_samples",
    "theoretical_extinction",
    "warning",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfOptions {
    pub p: usize,
    pub n_list: Vec<usize>,
    pub gamma_hat: f64,
    pub t: f64,
    pub games_per_size: usize,
    pub master_seed: u64,
    /// Replace every payoff by zero.
    pub zero_payoffs: bool,
    pub integrator: IntegratorOptions,
    pub budget_elements: u64,
    pub out_dir: Option<PathBuf>,
}

impl CdfOptions {
    pub fn new(p: usize, n_list: Vec<usize>, gamma_hat: f64, t: f64, games_per_size: usize, master_seed: u64) -> Self {
        CdfOptions {
            p,
            n_list,
            gamma_hat,
            t,
            games_per_size,
            master_seed,
            zero_payoffs: false,
            integrator: IntegratorOptions::default(),
            budget_elements: DEFAULT_ELEMENT_BUDGET,
            out_dir: None,
        }
    }

    pub fn from_config(cfg: &Config) -> Self {
        let c = &cfg.cdf;
        CdfOptions {
            zero_payoffs: c.zero_payoffs,
            integrator: c.integrator,
            budget_elements: cfg.budget_elements,
            out_dir: Some(cfg.out_dir.clone()),
            ..Self::new(c.p, c.n.clone(), c.gamma_hat, c.t, c.games_per_size, cfg.seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfRunResult {
    pub p: usize,
    pub n: usize,
    pub gamma_hat: f64,
    pub t: f64,
    /// `N x` over every player and action of every converged game, ascending.
    pub samples: Vec<f64>,
    pub n_games: usize,
    /// Games that did not reach a fixed point.
    pub n_excluded: usize,
    /// `1 - Φ(z_crit)`; `None` when the mean-field solve fails.
    pub theoretical_extinction: Option<f64>,
    pub warning: Option<String>,
}

impl CdfRunResult {
    /// Fraction of samples strictly below `level`.
    pub fn mass_below(&self, level: f64) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        self.samples.partition_point(|&s| s < level) as f64 / self.samples.len() as f64
    }
}

/// Theory overlay and a warning when the rate is outside the stable regime.
fn theory(p: usize, gamma_hat: f64, t: f64) -> (Option<f64>, Option<String>) {
    let params = SolverParams::new(p, gamma_hat * (p as f64 - 1.0), t);
    match solve_fixed_point(&params) {
        Ok(sol) => {
            let warn = (!stability_check(&sol, &params).stable)
                .then(|| format!("T = {t} is below the stability boundary; fixed points need not be unique"));
            (Some(extinction_rate(&sol)), warn)
        }
        Err(e) => (None, Some(format!("mean-field solve failed: {e}"))),
    }
}

/// For each `N`, run one trajectory per game to a fixed point and pool the
/// rescaled marginals.
pub fn run_cdf(opts: &CdfOptions) -> Result<Vec<CdfRunResult>> {
    if opts.n_list.is_empty() || opts.games_per_size == 0 {
        return Err(Error::Config("run_cdf needs sizes and at least one game".into()));
    }
    let started = unix_time();
    let (theoretical_extinction, warning) = theory(opts.p, opts.gamma_hat, opts.t);
    let mut out = Vec::new();
    for &n in &opts.n_list {
        let t_eff = effective_temperature(opts.t, n, opts.p);
        let finals: Vec<Option<Vec<f64>>> = (0..opts.games_per_size)
            .into_par_iter()
            .map(|g| -> Result<Option<Vec<f64>>> {
                let idx = [opts.p as u64, n as u64, g as u64];
                let params = GameParams::from_gamma_hat(opts.p, n, opts.gamma_hat, derive(opts.master_seed, "cdf-game", &idx))?;
                let tensor = if opts.zero_payoffs {
                    PayoffTensor::zeros(&params)?
                } else {
                    PayoffTensor::sample_with_budget(&params, opts.budget_elements)?
                };
                let mut rng = stream(derive(opts.master_seed, "cdf-start", &idx));
                let x0 = sample_initial(&mut rng, opts.p, n);
                Ok(match integrate(&x0, &tensor, t_eff, &opts.integrator) {
                    Ok(o) if o.status == Status::FixedPoint => Some(o.final_state.x),
                    _ => None,
                })
            })
            .collect::<Result<_>>()?;
        let n_excluded = finals.iter().filter(|f| f.is_none()).count();
        let mut samples: Vec<f64> = finals.into_iter().flatten().flatten().map(|x| x * n as f64).collect();
        samples.sort_by(f64::total_cmp);
        out.push(CdfRunResult {
            p: opts.p,
            n,
            gamma_hat: opts.gamma_hat,
            t: opts.t,
            samples,
            n_games: opts.games_per_size,
            n_excluded,
            theoretical_extinction,
            warning: warning.clone(),
        });
    }
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        write_cdf_csv(dir, &out)?;
        write_manifest(dir, "cdf", opts, &["cdf_samples.csv", "cdf_summary.csv"], started)?;
    }
    Ok(out)
}

/// `cdf_samples.csv` and `cdf_summary.csv` in `dir`.
pub fn write_cdf_csv(dir: &std::path::Path, results: &[CdfRunResult]) -> Result<()> {
    let samples = results.iter().flat_map(|r| {
        r.samples.iter().enumerate().map(move |(i, &s)| {
            vec![
                CDF_SCHEMA.to_string(),
                r.p.to_string(),
                r.n.to_string(),
                fmt_f64(r.gamma_hat),
                fmt_f64(r.t),
                i.to_string(),
                fmt_f64(s),
            ]
        })
    });
    write_rows(&dir.join("cdf_samples.csv"), &CDF_SAMPLES_HEADER, samples)?;
    let summary = results.iter().map(|r| {
        vec![
            CDF_SCHEMA.to_string(),
            r.p.to_string(),
            r.n.to_string(),
            fmt_f64(r.gamma_hat),
            fmt_f64(r.t),
            r.n_games.to_string(),
            r.n_excluded.to_string(),
            r.samples.len().to_string(),
            r.theoretical_extinction.map_or(String::new(), fmt_f64),
            r.warning.clone().unwrap_or_default(),
        ]
    });
    write_rows(&dir.join("cdf_summary.csv"), &CDF_SUMMARY_HEADER, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_payoffs_give_uniform_marginals() {
        let opts = CdfOptions { zero_payoffs: true, ..CdfOptions::new(2, vec![4, 8], 0.0, 1.8, 3, 1) };
        for r in run_cdf(&opts).unwrap() {
            assert_eq!(r.n_excluded, 0);
            assert_eq!(r.samples.len(), 3 * 2 * r.n);
            assert!(r.samples.iter().all(|s| (s - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn samples_sorted_and_theory_attached() {
        let r = &run_cdf(&CdfOptions::new(2, vec![10], 0.0, 1.8, 2, 3)).unwrap()[0];
        assert!(r.samples.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.samples.iter().all(|&s| s >= 0.0));
        let e = r.theoretical_extinction.unwrap();
        assert!((e - 0.0074).abs() < 1e-3);
    }
}

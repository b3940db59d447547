use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Config;
use super::{unix_time, write_manifest, write_rows};
use crate::dynamics::{classify_game, ClassifyOptions, IntegratorOptions, Label};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::random_games::{GameParams, PayoffTensor};
use crate::seed::derive;

pub const SWEEP_SCHEMA: &str = "sweep-v1";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const SWEEP_HEADER: [&str; 10] = [
    "schema",
    "p",
    "n",
    "gamma_hat",
    "gamma",
    "t",
    "n_unique",
    "n_multiple",
    "n_nonconverged",
    "fraction_unique",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub pairs: Vec<(usize, usize)>,
    pub gamma_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub games_per_cell: usize,
    pub starts_per_game: usize,
    pub dist_tol: f64,
    pub master_seed: u64,
    pub integrator: IntegratorOptions,
    pub budget_elements: u64,
    /// Where the CSV, journal and manifest go; `None` keeps results in memory.
    pub out_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn from_config(cfg: &Config) -> Self {
        let s = &cfg.sweep;
        SweepConfig {
            pairs: s.pairs.clone(),
            gamma_grid: s.gamma_hat.clone(),
            t_grid: s.t.clone(),
            games_per_cell: s.games_per_cell,
            starts_per_game: s.starts_per_game,
            dist_tol: s.dist_tol,
            master_seed: cfg.seed,
            integrator: s.integrator,
            budget_elements: cfg.budget_elements,
            out_dir: Some(cfg.out_dir.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sorted = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if self.pairs.is_empty() || !sorted(&self.gamma_grid) || !sorted(&self.t_grid) {
            return Err(Error::Config("sweep grids must be non-empty and ascending".into()));
        }
        if self.games_per_cell == 0 || self.starts_per_game == 0 {
            return Err(Error::Config("games_per_cell and starts_per_game must be >= 1".into()));
        }
        for &(p, n) in &self.pairs {
            for &g in &self.gamma_grid {
                let params = GameParams::from_gamma_hat(p, n, g, 0)?;
                let needed = params.element_count().unwrap_or(u128::MAX);
                if needed > self.budget_elements as u128 {
                    return Err(Error::ResourceLimit { needed, budget: self.budget_elements });
                }
            }
        }
        Ok(())
    }

    /// Hash of every field that affects results.
    pub fn fingerprint(&self) -> String {
        let view = SweepConfig { out_dir: None, ..self.clone() };
        let json = serde_json::to_string(&(env!("CARGO_PKG_VERSION"), &view)).expect("serializable");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub index: usize,
    pub pair_index: usize,
    pub gamma_index: usize,
    pub t_index: usize,
    pub p: usize,
    pub n: usize,
    pub gamma_hat: f64,
    pub t: f64,
}

/// Cells in pair-major, then `Γ̂`, then `T` order.
pub fn cell_grid(cfg: &SweepConfig) -> Vec<CellKey> {
    let mut out = Vec::new();
    for (pair_index, &(p, n)) in cfg.pairs.iter().enumerate() {
        for (gamma_index, &gamma_hat) in cfg.gamma_grid.iter().enumerate() {
            for (t_index, &t) in cfg.t_grid.iter().enumerate() {
                out.push(CellKey { index: out.len(), pair_index, gamma_index, t_index, p, n, gamma_hat, t });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub p: usize,
    pub n: usize,
    pub gamma_hat: f64,
    pub gamma: f64,
    pub t: f64,
    pub n_unique: usize,
    pub n_multiple: usize,
    pub n_nonconverged: usize,
    /// `n_unique / games_per_cell`; non-converged games stay in the denominator.
    pub fraction_unique: f64,
    /// Seconds; kept in the journal only, so the CSV is reproducible.
    pub wall_time: f64,
}

impl CellResult {
    pub fn games(&self) -> usize {
        self.n_unique + self.n_multiple + self.n_nonconverged
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            SWEEP_SCHEMA.to_string(),
            self.p.to_string(),
            self.n.to_string(),
            fmt_f64(self.gamma_hat),
            fmt_f64(self.gamma),
            fmt_f64(self.t),
            self.n_unique.to_string(),
            self.n_multiple.to_string(),
            self.n_nonconverged.to_string(),
            fmt_f64(self.fraction_unique),
        ]
    }
}

fn run_cell(cfg: &SweepConfig, key: &CellKey) -> Result<CellResult> {
    let start = Instant::now();
    let ids = [key.p as u64, key.n as u64, key.gamma_index as u64, key.t_index as u64];
    let labels: Vec<Label> = (0..cfg.games_per_cell)
        .into_par_iter()
        .map(|g| -> Result<Label> {
            let idx = [ids[0], ids[1], ids[2], ids[3], g as u64];
            let params = GameParams::from_gamma_hat(key.p, key.n, key.gamma_hat, derive(cfg.master_seed, "game", &idx))?;
            let tensor = PayoffTensor::sample_with_budget(&params, cfg.budget_elements)?;
            let opts = ClassifyOptions {
                n_starts: cfg.starts_per_game,
                dist_tol: cfg.dist_tol,
                seed: derive(cfg.master_seed, "starts", &idx),
                integrator: cfg.integrator,
            };
            Ok(classify_game(&tensor, key.t, &opts).label)
        })
        .collect::<Result<_>>()?;
    let count = |l: Label| labels.iter().filter(|&&x| x == l).count();
    let n_unique = count(Label::UniqueFixedPoint);
    Ok(CellResult {
        p: key.p,
        n: key.n,
        gamma_hat: key.gamma_hat,
        gamma: key.gamma_hat * (key.p as f64 - 1.0),
        t: key.t,
        n_unique,
        n_multiple: count(Label::MultipleFixedPoints),
        n_nonconverged: count(Label::NonConverged),
        fraction_unique: n_unique as f64 / cfg.games_per_cell as f64,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize, Deserialize)]
struct JournalHeader {
    schema: String,
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct JournalEntry {
    cell: usize,
    result: CellResult,
}

/// Completed cells recorded in `path`. A final line without its newline
/// is a write interrupted by a kill; it is cut off so appends stay aligned.
pub fn read_journal(path: &Path, fingerprint: &str) -> Result<BTreeMap<usize, CellResult>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    let mut good_len = 0u64;
    let mut first = true;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 || !line.ends_with('\n') {
            break;
        }
        if first {
            let header: JournalHeader = serde_json::from_str(&line)
                .map_err(|e| Error::Config(format!("journal {}: bad header: {e}", path.display())))?;
            if header.fingerprint != fingerprint {
                return Err(Error::Config(format!(
                    "journal {} was written by a different configuration",
                    path.display()
                )));
            }
            first = false;
        } else {
            let entry: JournalEntry = serde_json::from_str(&line)
                .map_err(|e| Error::Config(format!("journal {}: corrupt entry: {e}", path.display())))?;
            done.insert(entry.cell, entry.result);
        }
        good_len += read as u64;
    }
    if first {
        good_len = 0;
    }
    let file = OpenOptions::new().write(true).open(path)?;
    if file.metadata()?.len() != good_len {
        file.set_len(good_len)?;
    }
    Ok(done)
}

fn open_journal(path: &Path, fingerprint: &str) -> Result<File> {
    let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        let header = JournalHeader { schema: "journal-v1".into(), fingerprint: fingerprint.into() };
        writeln!(f, "{}", serde_json::to_string(&header)?)?;
        f.flush()?;
    }
    Ok(f)
}

/// Classify `games_per_cell` fresh games in every cell. With an output
/// directory, each finished cell is appended to the journal and cells
/// already there are skipped, so an interrupted sweep can be rerun with
/// the same configuration to completion.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let started = unix_time();
    let cells = cell_grid(cfg);
    let fingerprint = cfg.fingerprint();
    let (mut done, journal) = match &cfg.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(JOURNAL_FILE);
            let done = read_journal(&path, &fingerprint)?;
            (done, Some(Mutex::new(open_journal(&path, &fingerprint)?)))
        }
        None => (BTreeMap::new(), None),
    };
    let pending: Vec<&CellKey> = cells.iter().filter(|c| !done.contains_key(&c.index)).collect();
    let fresh: Vec<(usize, CellResult)> = pending
        .par_iter()
        .map(|key| -> Result<(usize, CellResult)> {
            let result = run_cell(cfg, key)?;
            if let Some(j) = &journal {
                let line = serde_json::to_string(&JournalEntry { cell: key.index, result: result.clone() })?;
                let mut f = j.lock().unwrap();
                writeln!(f, "{line}")?;
                f.flush()?;
            }
            Ok((key.index, result))
        })
        .collect::<Result<_>>()?;
    done.extend(fresh);
    let results: Vec<CellResult> = done.into_values().collect();
    if let Some(dir) = &cfg.out_dir {
        write_sweep_csv(&dir.join("sweep.csv"), &results)?;
        write_manifest(dir, "sweep", cfg, &["sweep.csv", JOURNAL_FILE], started)?;
    }
    Ok(results)
}

pub fn write_sweep_csv(path: &Path, results: &[CellResult]) -> Result<()> {
    write_rows(path, &SWEEP_HEADER, results.iter().map(CellResult::csv_row))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepConfig {
        SweepConfig {
            pairs: vec![(2, 3)],
            gamma_grid: vec![0.0, 0.5],
            t_grid: vec![2.0, 4.0],
            games_per_cell: 2,
            starts_per_game: 3,
            dist_tol: 0.01,
            master_seed: 5,
            integrator: IntegratorOptions::default(),
            budget_elements: 1000,
            out_dir: None,
        }
    }

    #[test]
    fn grid_order_and_counts() {
        let cells = cell_grid(&tiny());
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[1].gamma_hat, cells[1].t), (0.0, 4.0));
        assert_eq!(cells[2].gamma_index, 1);
        let results = run_sweep(&tiny()).unwrap();
        for r in &results {
            assert_eq!(r.games(), 2);
            assert_eq!(r.fraction_unique, r.n_unique as f64 / 2.0);
        }
    }

    #[test]
    fn budget_is_checked_before_running() {
        let cfg = SweepConfig { budget_elements: 10, ..tiny() };
        assert!(matches!(run_sweep(&cfg), Err(Error::ResourceLimit { needed: 18, budget: 10 })));
    }

    #[test]
    fn fingerprint_ignores_output_location() {
        let a = tiny();
        let b = SweepConfig { out_dir: Some("/elsewhere".into()), ..tiny() };
        let c = SweepConfig { master_seed: 6, ..tiny() };
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{unix_time, write_manifest, write_rows};
use crate::dmft::{critical_temperature, extinction_rate, solve_fixed_point, stability_check, SolverParams};
use crate::error::{Error, Result};
use crate::fmt_f64;

pub const EXTINCTION_SCHEMA: &str = "extinction-map-v1";
pub const EXTINCTION_HEADER: [&str; 9] =
    ["schema", "p", "gamma_hat", "gamma", "t", "t_crit", "extinction", "margin", "status"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    /// `T ≤ T_crit`: the fixed point is not the unique attractor.
    MaskedSubcritical,
    /// `T_crit` could not be bracketed for this `Γ̂`.
    MaskedNoBoundary,
    MaskedSolverFailure,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::MaskedSubcritical => "masked-subcritical",
            CellStatus::MaskedNoBoundary => "masked-no-boundary",
            CellStatus::MaskedSolverFailure => "masked-solver-failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionCell {
    pub p: usize,
    pub gamma_hat: f64,
    pub t: f64,
    pub t_crit: Option<f64>,
    /// Present only for [`CellStatus::Ok`].
    pub extinction: Option<f64>,
    /// Stability margin of the solved point, kept for masked cells too.
    pub margin: Option<f64>,
    pub status: CellStatus,
}

impl ExtinctionCell {
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or(String::new(), fmt_f64);
        vec![
            EXTINCTION_SCHEMA.to_string(),
            self.p.to_string(),
            fmt_f64(self.gamma_hat),
            fmt_f64(self.gamma_hat * (self.p as f64 - 1.0)),
            fmt_f64(self.t),
            opt(self.t_crit),
            opt(self.extinction),
            opt(self.margin),
            self.status.as_str().to_string(),
        ]
    }
}

fn cell(p: usize, gamma_hat: f64, t: f64, t_crit: Option<f64>) -> ExtinctionCell {
    let params = SolverParams::new(p, gamma_hat * (p as f64 - 1.0), t);
    let solved = solve_fixed_point(&params).ok();
    let margin = solved.as_ref().map(|s| stability_check(s, &params).margin);
    let (status, extinction) = match (t_crit, &solved) {
        (None, _) => (CellStatus::MaskedNoBoundary, None),
        (Some(tc), _) if t <= tc => (CellStatus::MaskedSubcritical, None),
        (Some(_), None) => (CellStatus::MaskedSolverFailure, None),
        (Some(_), Some(s)) => (CellStatus::Ok, Some(extinction_rate(s))),
    };
    ExtinctionCell { p, gamma_hat, t, t_crit, extinction, margin, status }
}

#[derive(Serialize)]
struct MapRun<'a> {
    p: usize,
    gamma_hat: &'a [f64],
    t: &'a [f64],
    tol: f64,
}

/// Mean-field extinction rate on a `(Γ̂, T)` grid, rows ordered by `Γ̂`
/// then `T`. Cells at or below the stability boundary are masked.
pub fn run_extinction_map(
    p: usize,
    gamma_hat_grid: &[f64],
    t_grid: &[f64],
    tol: f64,
    out_dir: Option<&Path>,
) -> Result<Vec<ExtinctionCell>> {
    for &gh in gamma_hat_grid {
        SolverParams::new(p, gh * (p as f64 - 1.0), 1.0).validate()?;
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::ParameterDomain("extinction map rates must be positive".into()));
    }
    let started = unix_time();
    let rows: Vec<Vec<ExtinctionCell>> = gamma_hat_grid
        .par_iter()
        .map(|&gh| {
            let t_crit = critical_temperature(gh * (p as f64 - 1.0), p, tol).ok();
            t_grid.par_iter().map(|&t| cell(p, gh, t, t_crit)).collect()
        })
        .collect();
    let cells: Vec<ExtinctionCell> = rows.into_iter().flatten().collect();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_extinction_csv(&dir.join("extinction_map.csv"), &cells)?;
        let run = MapRun { p, gamma_hat: gamma_hat_grid, t: t_grid, tol };
        write_manifest(dir, "extinction-map", &run, &["extinction_map.csv"], started)?;
    }
    Ok(cells)
}

pub fn write_extinction_csv(path: &Path, cells: &[ExtinctionCell]) -> Result<()> {
    write_rows(path, &EXTINCTION_HEADER, cells.iter().map(ExtinctionCell::csv_row))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_and_values() {
        let cells = run_extinction_map(2, &[-0.5, 0.5], &[1.0, 3.0, 5.0], 1e-2, None).unwrap();
        assert_eq!(cells.len(), 6);
        for c in cells.iter().filter(|c| c.gamma_hat < 0.0) {
            assert_eq!(c.status, CellStatus::Ok);
            assert_eq!(c.extinction, Some(0.0));
        }
        let coop: Vec<_> = cells.iter().filter(|c| c.gamma_hat > 0.0).collect();
        assert_eq!(coop[0].status, CellStatus::MaskedSubcritical);
        assert!(coop[0].extinction.is_none());
        assert!(coop[1].extinction.unwrap() > coop[2].extinction.unwrap());
    }

    #[test]
    fn masked_row_has_empty_extinction() {
        let c = ExtinctionCell {
            p: 2,
            gamma_hat: 0.5,
            t: 1.0,
            t_crit: Some(2.4),
            extinction: None,
            margin: Some(-0.3),
            status: CellStatus::MaskedSubcritical,
        };
        let r = c.csv_row();
        assert_eq!(r[6], "");
        assert_eq!(r[8], "masked-subcritical");
        assert_eq!(r[7].parse::<f64>().unwrap(), -0.3);
    }
}

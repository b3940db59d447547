use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{unix_time, write_manifest, write_rows};
use crate::dmft::{critical_temperature, tcrit_large_p};
use crate::error::{Error, Result};
use crate::fmt_f64;

pub const BOUNDARY_SCHEMA: &str = "boundary-v1";
pub const BOUNDARY_HEADER: [&str; 7] =
    ["schema", "p", "gamma_hat", "t_crit", "t_crit_rescaled", "t_crit_large_p", "status"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub p: usize,
    pub gamma_hat: f64,
    /// `None` when bisection could not bracket the boundary.
    pub t_crit: Option<f64>,
    /// `(Γ̂ + 1) √(e(p-1))`.
    pub t_crit_large_p: f64,
    /// `"ok"` or the failure message.
    pub status: String,
}

impl BoundaryRow {
    pub fn scale(&self) -> f64 {
        (std::f64::consts::E * (self.p as f64 - 1.0)).sqrt()
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            BOUNDARY_SCHEMA.to_string(),
            self.p.to_string(),
            fmt_f64(self.gamma_hat),
            self.t_crit.map_or(String::new(), fmt_f64),
            self.t_crit.map_or(String::new(), |t| fmt_f64(t / self.scale())),
            fmt_f64(self.t_crit_large_p),
            self.status.clone(),
        ]
    }
}

#[derive(Serialize)]
struct BoundaryRun<'a> {
    p: usize,
    gamma_hat: &'a [f64],
    tol: f64,
}

/// `T_crit` along a `Γ̂` grid in `[0, 1]`. Points whose bisection fails
/// are reported with an empty `t_crit` and the error as status.
pub fn run_boundary(p: usize, gamma_hat_grid: &[f64], tol: f64, out_dir: Option<&Path>) -> Result<Vec<BoundaryRow>> {
    if gamma_hat_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::ParameterDomain("boundary grid must lie in [0, 1]".into()));
    }
    let started = unix_time();
    let rows: Vec<BoundaryRow> = gamma_hat_grid
        .par_iter()
        .map(|&gh| {
            let (t_crit, status) = match critical_temperature(gh * (p as f64 - 1.0), p, tol) {
                Ok(t) => (Some(t), "ok".to_string()),
                Err(e @ (Error::ParameterDomain(_) | Error::Config(_))) => return Err(e),
                Err(e) => (None, format!("failed: {e}")),
            };
            Ok(BoundaryRow { p, gamma_hat: gh, t_crit, t_crit_large_p: tcrit_large_p(gh, p), status })
        })
        .collect::<Result<_>>()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_boundary_csv(&dir.join("boundary.csv"), &rows)?;
        let run = BoundaryRun { p, gamma_hat: gamma_hat_grid, tol };
        write_manifest(dir, "boundary", &run, &["boundary.csv"], started)?;
    }
    Ok(rows)
}

pub fn write_boundary_csv(path: &Path, rows: &[BoundaryRow]) -> Result<()> {
    write_rows(path, &BOUNDARY_HEADER, rows.iter().map(BoundaryRow::csv_row))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_rows_have_no_number() {
        let row = BoundaryRow { p: 2, gamma_hat: 0.3, t_crit: None, t_crit_large_p: 2.0, status: "failed: x".into() };
        let r = row.csv_row();
        assert_eq!(r[3], "");
        assert_eq!(r[4], "");
        assert_eq!(r[6], "failed: x");
    }

    #[test]
    fn rejects_grid_outside_unit_interval() {
        assert!(run_boundary(2, &[0.0, 1.5], 1e-2, None).is_err());
    }

    #[test]
    fn small_curve_increases() {
        let rows = run_boundary(2, &[0.2, 0.8], 1e-2, None).unwrap();
        assert!(rows.iter().all(|r| r.status == "ok"));
        assert!(rows[0].t_crit.unwrap() < rows[1].t_crit.unwrap());
    }
}

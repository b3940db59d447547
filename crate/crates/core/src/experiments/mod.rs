//! Reproducible runs that tie the simulated dynamics to the mean-field
//! theory. Every runner returns its rows in memory and, given an output
//! directory, writes a CSV whose first column names its schema plus a
//! `manifest.json` describing the run.
//!
//! | runner | CSV | schema |
//! |---|---|---|
//! | [`run_sweep`] | `sweep.csv` | `sweep-v1` |
//! | [`run_cdf`] | `cdf_samples.csv`, `cdf_summary.csv` | `cdf-v1` |
//! | [`run_boundary`] | `boundary.csv` | `boundary-v1` |
//! | [`run_extinction_map`] | `extinction_map.csv` | `extinction-map-v1` |
//!
//! Floats are written with 17 significant digits, so files are
//! byte-identical across runs with the same configuration.

mod boundary;
mod cdf;
pub mod config;
mod extinction_map;
mod sweep;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub use boundary::{run_boundary, write_boundary_csv, BoundaryRow, BOUNDARY_HEADER, BOUNDARY_SCHEMA};
pub use cdf::{run_cdf, write_cdf_csv, CdfOptions, CdfRunResult, CDF_SAMPLES_HEADER, CDF_SCHEMA, CDF_SUMMARY_HEADER};
pub use config::{grid, Config, CONFIG_SCHEMA};
pub use extinction_map::{
    run_extinction_map, write_extinction_csv, CellStatus, ExtinctionCell, EXTINCTION_HEADER, EXTINCTION_SCHEMA,
};
pub use sweep::{
    cell_grid, read_journal, run_sweep, write_sweep_csv, CellKey, CellResult, SweepConfig, JOURNAL_FILE,
    SWEEP_HEADER, SWEEP_SCHEMA,
};

use crate::error::Result;

pub const MANIFEST_SCHEMA: &str = "manifest-v1";

/// Seconds since the Unix epoch.
pub fn unix_time() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub schema: &'static str,
    pub command: &'a str,
    pub version: &'static str,
    pub config: &'a C,
    pub artifacts: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

/// Write `manifest.json` into `dir`.
pub fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    artifacts: &[&str],
    started_unix: f64,
) -> Result<()> {
    let m = Manifest {
        schema: MANIFEST_SCHEMA,
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
        started_unix,
        finished_unix: unix_time(),
    };
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &m)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Write `rows` under `header` to `path`, replacing it atomically.
pub(crate) fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&tmp)?));
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

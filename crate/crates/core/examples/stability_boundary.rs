//! The stability boundary curve and the theoretical extinction map, written
//! as CSV into a directory.
//!
//!     cargo run --release --example stability_boundary -- /tmp/qrelab-maps

use std::path::PathBuf;

use qrelab::experiments::{grid, run_boundary, run_extinction_map, CellStatus};

fn main() -> qrelab::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "maps-out".into()));
    let rows = run_boundary(2, &grid(0.0, 1.0, 0.25), 1e-3, Some(&dir.join("boundary")))?;
    for r in &rows {
        println!("Γ̂={:.2}  T_crit={:?}  ({})", r.gamma_hat, r.t_crit, r.status);
    }
    let cells = run_extinction_map(2, &[0.2, 0.5, 0.8], &grid(1.0, 6.0, 0.5), 1e-3, Some(&dir.join("map")))?;
    for c in cells.iter().filter(|c| c.status == CellStatus::Ok) {
        println!("Γ̂={:.1} T={:.1} extinction={:.3e}", c.gamma_hat, c.t, c.extinction.unwrap());
    }
    Ok(())
}

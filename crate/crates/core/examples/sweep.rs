//! A small resumable sweep. Run it twice: the second run reads every cell
//! from the journal.
//!
//!     cargo run --release --example sweep -- /tmp/qrelab-sweep

use qrelab::dynamics::IntegratorOptions;
use qrelab::experiments::{run_sweep, SweepConfig};

fn main() -> qrelab::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "sweep-out".into());
    let cfg = SweepConfig {
        pairs: vec![(2, 10)],
        gamma_grid: vec![0.0, 0.5, 1.0],
        t_grid: vec![0.5, 2.0, 4.0],
        games_per_cell: 4,
        starts_per_game: 10,
        dist_tol: 0.01,
        master_seed: 1,
        integrator: IntegratorOptions::default(),
        budget_elements: 1_000_000,
        out_dir: Some(dir.clone().into()),
    };
    let start = std::time::Instant::now();
    for c in run_sweep(&cfg)? {
        println!("Γ̂={:.1} T={:.1} unique={:.2}", c.gamma_hat, c.t, c.fraction_unique);
    }
    println!("{:?}; results in {dir}", start.elapsed());
    Ok(())
}

//! Empirical distribution of rescaled strategy weights at fixed points for
//! growing `N`, with the mean-field extinction rate for comparison.

use qrelab::experiments::{run_cdf, CdfOptions};

fn main() -> qrelab::Result<()> {
    let opts = CdfOptions::new(2, vec![40, 160, 320], 0.0, 1.8, 8, 1);
    for r in run_cdf(&opts)? {
        println!(
            "N={:>4}  mass below 0.1: {:.4}%  excluded {}  theory {:.4}%",
            r.n,
            100.0 * r.mass_below(0.1),
            r.n_excluded,
            100.0 * r.theoretical_extinction.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

//! Label a single game by integrating from many starts, at a low and a
//! high exploration rate.
//!
//!     cargo run --release --example classify_game

use qrelab::dynamics::{classify_game, ClassifyOptions};
use qrelab::random_games::{GameParams, PayoffTensor};

fn main() -> qrelab::Result<()> {
    let params = GameParams::from_gamma_hat(2, 50, 0.5, 3)?;
    let tensor = PayoffTensor::sample(&params)?;
    let opts = ClassifyOptions { n_starts: 20, ..Default::default() };
    for t in [0.5, 4.0] {
        let c = classify_game(&tensor, t, &opts);
        println!(
            "T={t}: {:?} ({}/{} converged, max relative distance {:.3e})",
            c.label, c.n_converged, c.n_starts, c.max_pairwise_reldist
        );
    }

    let null = PayoffTensor::zeros(&params)?;
    println!("null game at T=1: {:?}", classify_game(&null, 1.0, &opts).label);
    Ok(())
}

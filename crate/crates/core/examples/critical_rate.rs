//! Critical exploration rate, raw and rescaled by `√(e(p-1))`, against the
//! large-`p` line `1 + Γ̂`.
//!
//!     cargo run --release --example critical_rate -- 50

use qrelab::dmft::{critical_temperature, tcrit_large_p};

fn main() -> qrelab::Result<()> {
    let p: usize = std::env::args().nth(1).map_or(2, |s| s.parse().unwrap());
    let scale = (std::f64::consts::E * (p as f64 - 1.0)).sqrt();
    for gh in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let tc = critical_temperature(gh * (p as f64 - 1.0), p, 1e-3)?;
        println!("Γ̂={gh:.2}  T_crit={tc:.4}  rescaled={:.4}  large-p={:.4}", tc / scale, tcrit_large_p(gh, p) / scale);
    }
    Ok(())
}

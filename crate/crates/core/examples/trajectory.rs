//! Integrate continuous Q-learning from one random start and write the
//! sampled path as CSV on stdout.
//!
//!     cargo run --example trajectory -- 2.5 > path.csv

use qrelab::dynamics::{effective_temperature, integrate, sample_initial, IntegratorOptions};
use qrelab::random_games::{GameParams, PayoffTensor};
use qrelab::seed;

fn main() -> qrelab::Result<()> {
    let t: f64 = std::env::args().nth(1).map_or(2.5, |s| s.parse().unwrap());
    let (p, n) = (2, 10);
    let tensor = PayoffTensor::sample(&GameParams::from_gamma_hat(p, n, 0.5, 7)?)?;
    let t_eff = effective_temperature(t, n, p);
    let x0 = sample_initial(&mut seed::stream(1), p, n);
    let opts = IntegratorOptions { record_every: Some(1.0), ..Default::default() };
    let out = integrate(&x0, &tensor, t_eff, &opts)?;
    eprintln!("{:?} at t={:.3} after {} steps", out.status, out.t_end, out.steps);
    out.write_path_csv(std::io::stdout().lock())
}

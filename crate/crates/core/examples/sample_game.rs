//! Sample a correlated payoff tensor, check its covariance, and round-trip
//! it through the binary dump format.
//!
//!     cargo run --example sample_game -- 3 8 0.5

use std::io::Cursor;

use qrelab::random_games::{build_covariance, empirical_covariance, GameParams, PayoffTensor};

fn main() -> qrelab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p: usize = args.first().map_or(3, |s| s.parse().unwrap());
    let n: usize = args.get(1).map_or(8, |s| s.parse().unwrap());
    let gamma_hat: f64 = args.get(2).map_or(0.5, |s| s.parse().unwrap());

    let params = GameParams::from_gamma_hat(p, n, gamma_hat, 42)?;
    let tensor = PayoffTensor::sample(&params)?;
    println!("p={p} n={n} gamma={} elements={}", params.gamma, tensor.values().len());

    println!("target covariance:\n{}", build_covariance(p, params.gamma)?);
    println!("empirical covariance over {} profiles:\n{}", tensor.profiles(), empirical_covariance(&tensor));

    let mut buf = Vec::new();
    tensor.write_dump(&mut buf)?;
    let back = PayoffTensor::read_dump(Cursor::new(&buf))?;
    println!("dump: {} bytes, identical after reload: {}", buf.len(), back.values() == tensor.values());
    Ok(())
}

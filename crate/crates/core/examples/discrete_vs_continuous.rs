//! Discrete Q-learning with step size α tracks the continuous flow; the gap
//! shrinks as α is halved.

use qrelab::dynamics::{discrete_orbit, effective_temperature, flow, sample_initial, IntegratorOptions};
use qrelab::random_games::{GameParams, PayoffTensor};
use qrelab::seed;

fn main() -> qrelab::Result<()> {
    let (p, n) = (2, 5);
    let tensor = PayoffTensor::sample(&GameParams::from_gamma_hat(p, n, 0.5, 11)?)?;
    let t_eff = effective_temperature(1.0, n, p);
    let x0 = sample_initial(&mut seed::stream(2), p, n);
    let horizon = 5.0;
    let opts = IntegratorOptions { rel_tol: 1e-10, abs_tol: 1e-13, ..Default::default() };
    let exact = flow(&x0, &tensor, t_eff, horizon, &opts)?;
    for alpha in [4e-3, 2e-3, 1e-3] {
        let x = discrete_orbit(&tensor, &x0, alpha, t_eff, horizon)?;
        let err = x.x.iter().zip(&exact.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("alpha={alpha:.0e}  sup error {err:.3e}");
    }
    Ok(())
}

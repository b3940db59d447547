//! The fixed-point strategy weight `x(z)` as a function of the Gaussian
//! field, up to the truncation point.

use qrelab::dmft::{solve_fixed_point, x_of_z, SolverParams};

fn main() -> qrelab::Result<()> {
    let sol = solve_fixed_point(&SolverParams::new(2, 0.5, 2.6))?;
    println!("z_crit = {:.6}", sol.z_crit);
    let mut z = -3.0;
    while z < sol.z_crit {
        println!("{z:>6.2}  {:.6}", x_of_z(&sol, z)?);
        z += 0.5;
    }
    Ok(())
}

//! Solve the mean-field fixed point over a range of exploration rates and
//! report its extinction rate and stability margin.

use qrelab::dmft::{extinction_rate, stability_check, Continuation, SolverParams};

fn main() -> qrelab::Result<()> {
    let base = SolverParams::new(2, 0.5, 1.0);
    let mut branch = Continuation::new(&base)?;
    println!("{:>6} {:>10} {:>10} {:>12} {:>10}", "T", "q", "z_crit", "extinction", "margin");
    for t in [6.0, 5.0, 4.0, 3.0, 2.6, 2.44] {
        let sol = branch.solve_at(t)?;
        let params = SolverParams { t, ..base };
        let margin = stability_check(&sol, &params).margin;
        println!(
            "{t:>6.2} {:>10.6} {:>10.4} {:>12.3e} {:>10.4}",
            sol.q,
            sol.z_crit,
            extinction_rate(&sol),
            margin
        );
    }
    Ok(())
}

//! Uncorrelated games: the switch from the interior solution to a truncated
//! one as the exploration rate falls below `√(3e(p-1)/2)`.

use qrelab::dmft::{extinction_rate, gamma_zero_solve, gamma_zero_threshold, SolverParams};

fn main() -> qrelab::Result<()> {
    println!("threshold p=2: {:.6}", gamma_zero_threshold(2));
    for t in [2.5, 2.2, 2.0, 1.8, 1.6] {
        let s = gamma_zero_solve(&SolverParams::new(2, 0.0, t))?;
        println!("T={t:.1} {:?} extinction {:.4}%", s.regime, 100.0 * extinction_rate(&s));
    }
    Ok(())
}

//! Critical exploration rate.
//!
//! A rate `T` counts as supercritical when the fixed point reached by
//! continuation from high `T` exists and is linearly stable, and (for
//! `Γ > 0`) no other self-consistent solution is also stable. The second
//! condition matters at large `p`, where a high-response branch remains
//! stable for a while after the low-response branch has become stable, so
//! the fixed point is not yet unique. Competing solutions in which most
//! actions are extinct (`φ < 1/2`) are not counted: at `p = 2` such a
//! branch turns stable at rates where the dynamics is a contraction, so it
//! cannot describe a fixed point of the learning dynamics. `T_crit` is
//! located by bisection on this predicate.

use serde::{Deserialize, Serialize};

use super::gamma_zero::{gamma_zero_solve_with, MomentClosure};
use super::solver::{enumerate_fixed_points, same_point, Continuation};
use super::stability::stability_check;
use super::SolverParams;
use crate::error::{Error, Result};

/// Smallest survival fraction for a competing solution to count.
pub const MIN_COMPETING_SURVIVAL: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalOptions {
    pub tol: f64,
    pub quad_nodes: usize,
    /// Search for competing stable solutions when `Γ > 0`.
    pub check_other_branches: bool,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions { tol: 1e-3, quad_nodes: 200, check_other_branches: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub t: f64,
    /// Stability margin of the continued solution; `None` if it was not found.
    pub margin: Option<f64>,
    /// Number of other stable solutions found.
    pub other_stable: usize,
    pub supercritical: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub p: usize,
    pub gamma: f64,
    pub t_crit: f64,
    pub lo: f64,
    pub hi: f64,
    pub probes: Vec<Probe>,
}

/// `T_crit` within `tol`.
pub fn critical_temperature(gamma: f64, p: usize, tol: f64) -> Result<f64> {
    let opts = CriticalOptions { tol, ..Default::default() };
    Ok(critical_temperature_with(gamma, p, &opts)?.t_crit)
}

pub fn critical_temperature_with(gamma: f64, p: usize, opts: &CriticalOptions) -> Result<CriticalReport> {
    let base = SolverParams { quad_nodes: opts.quad_nodes, ..SolverParams::new(p, gamma, 1.0) };
    base.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::ParameterDomain("tol must be positive".into()));
    }
    let gamma_hat = base.gamma_hat();
    let scale = (std::f64::consts::E * (p as f64 - 1.0)).sqrt();
    let mut lo = 0.1;
    let mut hi = 4.0 * (gamma_hat + 1.0).max(0.25) * scale;

    let mut branch = if gamma != 0.0 { Some(Continuation::new(&base)?) } else { None };
    let mut probes = Vec::new();
    let mut probe = |t: f64| -> Probe {
        let params = SolverParams { t, ..base };
        let sol = match branch.as_mut() {
            Some(c) => c.solve_at(t),
            None => gamma_zero_solve_with(&params, MomentClosure::Exact),
        };
        let Ok(sol) = sol else {
            return Probe { t, margin: None, other_stable: 0, supercritical: false };
        };
        let margin = stability_check(&sol, &params).margin;
        let mut other_stable = 0;
        if margin > 0.0 && gamma > 0.0 && opts.check_other_branches {
            if let Ok(all) = enumerate_fixed_points(&params) {
                other_stable = all
                    .iter()
                    .filter(|s| s.phi >= MIN_COMPETING_SURVIVAL && !same_point(s, &sol))
                    .filter(|s| stability_check(s, &params).stable)
                    .count();
            }
        }
        Probe { t, margin: Some(margin), other_stable, supercritical: margin > 0.0 && other_stable == 0 }
    };

    let top = probe(hi);
    let bottom = probe(lo);
    let ok = top.supercritical && !bottom.supercritical;
    probes.push(top.clone());
    probes.push(bottom.clone());
    if !ok {
        return Err(Error::Bracketing {
            lo,
            hi,
            detail: format!("margin at lo {:?}, at hi {:?}", bottom.margin, top.margin),
        });
    }
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        let pr = probe(mid);
        if pr.supercritical {
            hi = mid;
        } else {
            lo = mid;
        }
        probes.push(pr);
    }
    Ok(CriticalReport { p, gamma, t_crit: 0.5 * (lo + hi), lo, hi, probes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncorrelated_matches_closed_form() {
        let t = critical_temperature(0.0, 2, 1e-4).unwrap();
        assert!((t - std::f64::consts::E.sqrt()).abs() < 1e-4, "{t}");
    }
}

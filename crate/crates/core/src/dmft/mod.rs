//! Stationary mean-field theory of Q-learning on random games.
//!
//! In the large-`N` limit a single action's probability (rescaled by `N`)
//! settles at `x(z) = K e^{bz + ax}`, where `z` is a standard Gaussian
//! realisation of the static noise. Self-consistency fixes `(K, a, b)`:
//!
//! ```text
//! q  = (bT)^{2/(p-1)}          χ = aT / (Γ q^{p-2})
//! L1 = q^{(p-1)/2} χ - ⟨dx/dz⟩
//! L2 = q - ⟨x²⟩
//! L3 = 1 - ⟨x⟩
//! ```
//!
//! For `Γ > 0` the profile only exists up to `z_crit = -(1 + ln aK)/b`;
//! beyond it the action is extinct. The fixed point is linearly stable when
//! `φ ⟨|T/x - aT|^{-2}⟩ < 1 / ((p-1) q^{p-2})` with the average restricted to
//! the surviving region.

mod critical;
mod gamma_zero;
pub mod lambert;
pub mod quadrature;
mod solver;
mod stability;

pub use critical::{critical_temperature, critical_temperature_with, CriticalOptions, CriticalReport};
pub use gamma_zero::{gamma_zero_solve, gamma_zero_solve_with, gamma_zero_threshold, MomentClosure};
pub use quadrature::{gauss_expect, Rule};
pub use solver::{enumerate_fixed_points, losses, solve_fixed_point, Continuation};
pub use stability::{stability_check, StabilityReport};

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schema tag written with every serialized solution.
pub const SCHEMA: &str = "dmft-v1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub p: usize,
    pub gamma: f64,
    pub t: f64,
    pub quad_nodes: usize,
    /// Bound on the sum of squared losses.
    pub newton_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            p: 2,
            gamma: 0.0,
            t: 1.0,
            quad_nodes: 200,
            newton_tol: 1e-12,
            max_iter: 200,
        }
    }
}

impl SolverParams {
    pub fn new(p: usize, gamma: f64, t: f64) -> Self {
        SolverParams { p, gamma, t, ..Default::default() }
    }

    pub fn gamma_hat(&self) -> f64 {
        self.gamma / (self.p as f64 - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::ParameterDomain(format!("need p >= 2, got {}", self.p)));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::ParameterDomain(format!("need T > 0, got {}", self.t)));
        }
        if self.quad_nodes < 40 || self.quad_nodes % 2 != 0 {
            return Err(Error::ParameterDomain(format!(
                "quad_nodes must be even and >= 40, got {}",
                self.quad_nodes
            )));
        }
        let hi = self.p as f64 - 1.0;
        if !(self.gamma.is_finite() && (-1.0..=hi).contains(&self.gamma)) {
            return Err(Error::ParameterDomain(format!("gamma = {} outside [-1, {hi}]", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Interior,
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution {
    pub p: usize,
    pub gamma: f64,
    pub t: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub chi: f64,
    /// `+∞` in the interior regime.
    pub z_crit: f64,
    pub phi: f64,
    pub regime: Regime,
    /// Sum of squared self-consistency losses at the returned point.
    pub residual: f64,
    pub closure: MomentClosure,
    pub quad_nodes: usize,
}

impl FixedPointSolution {
    /// Quadrature rule matching this solution's support.
    pub fn rule(&self, n: usize) -> Rule {
        Rule::truncated(n, self.z_crit)
    }

    /// `x(z)` at a rule node, with `1 - a x` returned alongside.
    pub(crate) fn node(&self, z: f64, gap: f64) -> (f64, f64) {
        profile_at(self.k, self.a, self.b, z, gap)
    }

    pub fn record(&self) -> SolutionRecord {
        SolutionRecord {
            schema: SCHEMA.to_string(),
            p: self.p,
            gamma: self.gamma,
            t: self.t,
            k: self.k,
            a: self.a,
            b: self.b,
            q: self.q,
            chi: self.chi,
            z_crit: self.z_crit.is_finite().then_some(self.z_crit),
            phi: self.phi,
            extinction: extinction_rate(self),
            regime: self.regime,
            residual: self.residual,
            closure: self.closure,
        }
    }
}

/// Flat serialized form of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub schema: String,
    pub p: usize,
    pub gamma: f64,
    pub t: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub chi: f64,
    /// Absent in the interior regime.
    pub z_crit: Option<f64>,
    pub phi: f64,
    pub extinction: f64,
    pub regime: Regime,
    pub residual: f64,
    pub closure: MomentClosure,
}

impl SolutionRecord {
    pub const CSV_HEADER: [&'static str; 16] = [
        "schema", "p", "gamma", "t", "k", "a", "b", "q", "chi", "z_crit", "phi", "extinction", "regime",
        "residual", "closure", "stable",
    ];

    /// CSV fields in [`Self::CSV_HEADER`] order; `stable` is supplied by the caller.
    pub fn csv_row(&self, stable: Option<bool>) -> Vec<String> {
        use crate::fmt_f64 as f;
        vec![
            self.schema.clone(),
            self.p.to_string(),
            f(self.gamma),
            f(self.t),
            f(self.k),
            f(self.a),
            f(self.b),
            f(self.q),
            f(self.chi),
            f(self.z_crit.unwrap_or(f64::INFINITY)),
            f(self.phi),
            f(self.extinction),
            format!("{:?}", self.regime),
            f(self.residual),
            format!("{:?}", self.closure),
            stable.map_or(String::new(), |s| s.to_string()),
        ]
    }
}

/// `z_crit = -(1 + ln aK)/b` for `a > 0`, `+∞` otherwise.
pub fn z_crit_of(k: f64, a: f64, b: f64) -> f64 {
    if a > 0.0 {
        -(1.0 + (a * k).ln()) / b
    } else {
        f64::INFINITY
    }
}

/// Profile value and `1 - a x` at `z`, given `gap = z_crit - z`.
pub(crate) fn profile_at(k: f64, a: f64, b: f64, z: f64, gap: f64) -> (f64, f64) {
    if a > 0.0 {
        if !(gap > 0.0) {
            return (0.0, 1.0);
        }
        let (y, eps) = lambert::fold_branch(-b * gap);
        (y / a, eps)
    } else if a == 0.0 {
        (k * (b * z).exp(), 1.0)
    } else {
        let alpha = -a;
        let w = lambert::w0_from_log(alpha.ln() + k.ln() + b * z);
        (w / alpha, 1.0 + w)
    }
}

/// Solve `x = K e^{bz + ax}` on the lower branch; zero past `z_crit`.
pub fn x_of_z(sol: &FixedPointSolution, z: f64) -> Result<f64> {
    let (k, a, b) = (sol.k, sol.a, sol.b);
    if !(k > 0.0 && b > 0.0 && a.is_finite()) {
        return Err(Error::NumericDomain(format!("ansatz (K={k}, a={a}, b={b})")));
    }
    let zc = z_crit_of(k, a, b);
    if z >= zc {
        return Ok(0.0);
    }
    let (mut x, _) = profile_at(k, a, b, z, zc - z);
    let resid = |x: f64| x - k * (b * z + a * x).exp();
    let tol = |x: f64| 1e-12 * x.max(1.0);
    if !(resid(x).abs() < tol(x)) {
        let (mut lo, mut hi) = if a > 0.0 { (0.0, 1.0 / a) } else { (0.0, f64::INFINITY) };
        if !x.is_finite() || x < lo || x > hi {
            x = if a > 0.0 { 0.5 / a } else { k * (b * z).exp() };
        }
        for _ in 0..200 {
            let r = resid(x);
            if r.abs() < tol(x) {
                break;
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = 1.0 - a * (x - r);
            let mut next = x - r / d;
            if !(next > lo && next < hi) {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1e-300) };
            }
            x = next;
        }
    }
    if !x.is_finite() || !(resid(x).abs() < tol(x)) {
        return Err(Error::NumericDomain(format!("x_of_z at z = {z}")));
    }
    Ok(x)
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Fraction of actions that go extinct, `1 - Φ(z_crit)`.
pub fn extinction_rate(sol: &FixedPointSolution) -> f64 {
    if sol.z_crit.is_finite() {
        normal_cdf(-sol.z_crit)
    } else {
        0.0
    }
}

/// Large-`p` estimate `(Γ̂ + 1) √(e(p-1))` of the critical exploration rate.
pub fn tcrit_large_p(gamma_hat: f64, p: usize) -> f64 {
    (gamma_hat + 1.0) * (E * (p as f64 - 1.0)).sqrt()
}

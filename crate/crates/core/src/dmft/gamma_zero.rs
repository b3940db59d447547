//! Uncorrelated games (`Γ = 0`): `a = 0` and `x = K e^{bz}` on `z < z_crit`.
//!
//! Gaussian moments are closed form: `⟨x⟩ = K e^{b²/2} Φ(z_c - b)` and
//! `⟨x²⟩ = K² e^{2b²} Φ(z_c - 2b)`. Two closures of the second-moment
//! equation are offered. [`MomentClosure::Exact`] uses `q = ⟨x²⟩`.
//! [`MomentClosure::Published`] uses `q = ⟨x²⟩ / K`, the form whose
//! interior threshold is `√(3e(p-1)/2)` and whose extinction rate at
//! `p = 2, T = 1.8` is 0.74%. The published form is the default because
//! those two numbers are the reference values the rest of the toolkit is
//! checked against.
//!
//! Below the interior threshold the truncation point is the largest `z_c`
//! for which the reduced equation `T² = q^{p-1}/b²` still has a root in `b`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use super::quadrature::Rule;
use super::solver::newton;
use super::{normal_cdf, FixedPointSolution, Regime, SolverParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentClosure {
    Exact,
    Published,
}

impl MomentClosure {
    /// Power of `K` in `q`: `q = K^c e^{2b²} Φ(z_c - 2b)`.
    fn k_power(self) -> i32 {
        match self {
            MomentClosure::Exact => 2,
            MomentClosure::Published => 1,
        }
    }

    /// `ln q` per unit `b²` at `z_c = ∞` once `K = e^{-b²/2}` is substituted.
    fn interior_slope(self) -> f64 {
        2.0 - 0.5 * self.k_power() as f64
    }
}

/// `√(3e(p-1)/2)`: interior fixed point exists at or above this rate.
pub fn gamma_zero_threshold(p: usize) -> f64 {
    (1.5 * E * (p as f64 - 1.0)).sqrt()
}

fn interior_threshold(p: usize, closure: MomentClosure) -> f64 {
    (closure.interior_slope() * E * (p as f64 - 1.0)).sqrt()
}

/// Solve with the default (published) closure.
pub fn gamma_zero_solve(params: &SolverParams) -> Result<FixedPointSolution> {
    gamma_zero_solve_with(params, MomentClosure::Published)
}

pub fn gamma_zero_solve_with(params: &SolverParams, closure: MomentClosure) -> Result<FixedPointSolution> {
    params.validate()?;
    if params.gamma != 0.0 {
        return Err(Error::ParameterDomain("gamma_zero_solve needs gamma = 0".into()));
    }
    let p = params.p as f64;
    let t = params.t;
    let (k0, b0, zc) = if t >= interior_threshold(params.p, closure) {
        // Smaller root of c (p-1) s = ln s + 2 ln T with s = b².
        let c = closure.interior_slope();
        let s_star = 1.0 / ((p - 1.0) * c);
        let g = |ls: f64| c * (p - 1.0) * ls.exp() - ls - 2.0 * t.ln();
        let ls = bisect(g, s_star.ln() - 80.0, s_star.ln(), 200);
        let s = ls.exp();
        ((-0.5 * s).exp(), s.sqrt(), f64::INFINITY)
    } else {
        boundary_point(params, closure)?
    };

    // Newton on (L2, L3) in (K, b) at fixed z_c.
    let f = |v: &[f64; 2]| -> Result<[f64; 2]> {
        let [_, l2, l3] = closure_losses(v[0], v[1], zc, params, closure);
        Ok([l2, l3])
    };
    let out = newton(f, |v| v[0] > 0.0 && v[1] > 0.0, [k0, b0], params.max_iter)?;
    let [k, b] = out.x;
    if out.residual > params.newton_tol {
        return Err(Error::SolverFailure { best: [k, 0.0, b], residual: out.residual, iterations: out.iterations });
    }
    let q = (b * t).powf(2.0 / (p - 1.0));
    let (phi, regime) = if zc.is_finite() { (normal_cdf(zc), Regime::Boundary) } else { (1.0, Regime::Interior) };
    Ok(FixedPointSolution {
        p: params.p,
        gamma: 0.0,
        t,
        k,
        a: 0.0,
        b,
        q,
        chi: 1.0 / t,
        z_crit: zc,
        phi,
        regime,
        residual: out.residual,
        closure,
        quad_nodes: params.quad_nodes,
    })
}

/// `(0, L2, L3)` by quadrature at fixed truncation point.
pub(crate) fn closure_losses(k: f64, b: f64, zc: f64, params: &SolverParams, closure: MomentClosure) -> [f64; 3] {
    let rule = Rule::truncated(params.quad_nodes, zc);
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..rule.len() {
        let x = k * (b * rule.z[i]).exp();
        m1 += rule.w[i] * x;
        m2 += rule.w[i] * x * x;
    }
    let q = (b * params.t).powf(2.0 / (params.p as f64 - 1.0));
    let second = match closure {
        MomentClosure::Exact => m2,
        MomentClosure::Published => m2 / k,
    };
    [0.0, q - second, 1.0 - m1]
}

/// `ln(q^{p-1}/b²)` with `K` eliminated by `⟨x⟩ = 1`.
fn log_f(lb: f64, zc: f64, p: f64, closure: MomentClosure) -> f64 {
    let b = lb.exp();
    let ln_k = -0.5 * b * b - normal_cdf(zc - b).ln();
    let ln_q = closure.k_power() as f64 * ln_k + 2.0 * b * b + normal_cdf(zc - 2.0 * b).ln();
    (p - 1.0) * ln_q - 2.0 * lb
}

/// `min_b ln F(b; z_c)` and its minimizer `ln b`.
fn min_log_f(zc: f64, p: f64, closure: MomentClosure) -> (f64, f64) {
    let (lo, hi) = (1e-4f64.ln(), 8f64.ln());
    let n = 120;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=n {
        let lb = lo + (hi - lo) * i as f64 / n as f64;
        let v = log_f(lb, zc, p, closure);
        if v < best.0 {
            best = (v, lb);
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (log_f(c, zc, p, closure), log_f(d, zc, p, closure));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = log_f(c, zc, p, closure);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = log_f(d, zc, p, closure);
        }
    }
    let lb = 0.5 * (a + b);
    (log_f(lb, zc, p, closure), lb)
}

/// Largest `z_c` with `min_b F = T²`, and the matching `(K, b)`.
fn boundary_point(params: &SolverParams, closure: MomentClosure) -> Result<(f64, f64, f64)> {
    let p = params.p as f64;
    let target = 2.0 * params.t.ln();
    let g = |zc: f64| min_log_f(zc, p, closure).0 - target;
    let mut hi = 40.0;
    let mut g_hi = g(hi);
    let mut lo = hi;
    loop {
        lo -= 0.25;
        if lo < -6.0 {
            let (_, lb) = min_log_f(-6.0, p, closure);
            return Err(Error::SolverFailure { best: [f64::NAN, 0.0, lb.exp()], residual: f64::INFINITY, iterations: 0 });
        }
        let g_lo = g(lo);
        if (g_lo <= 0.0) != (g_hi <= 0.0) {
            break;
        }
        hi = lo;
        g_hi = g_lo;
    }
    let zc = bisect(g, lo, hi, 200);
    let (_, lb) = min_log_f(zc, p, closure);
    let b = lb.exp();
    let k = 1.0 / ((0.5 * b * b).exp() * normal_cdf(zc - b));
    Ok((k, b, zc))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let f_lo_pos = f(lo) > 0.0;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (f(mid) > 0.0) == f_lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmft::extinction_rate;

    #[test]
    fn threshold_values() {
        assert!((gamma_zero_threshold(2) - 2.019_262_920_644_205_6).abs() < 1e-12);
        assert!((gamma_zero_threshold(3) / gamma_zero_threshold(2) - 2f64.sqrt()).abs() < 1e-14);
        assert!((gamma_zero_threshold(5) / gamma_zero_threshold(2) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn regime_switch() {
        let hi = gamma_zero_solve(&SolverParams::new(2, 0.0, 2.2)).unwrap();
        assert_eq!(hi.regime, Regime::Interior);
        assert_eq!(hi.phi, 1.0);
        let lo = gamma_zero_solve(&SolverParams::new(2, 0.0, 1.79)).unwrap();
        assert_eq!(lo.regime, Regime::Boundary);
        assert!(lo.z_crit.is_finite() && lo.phi < 1.0);
    }

    #[test]
    fn interior_moment_identities() {
        for closure in [MomentClosure::Exact, MomentClosure::Published] {
            let s = gamma_zero_solve_with(&SolverParams::new(2, 0.0, 2.5), closure).unwrap();
            let r = Rule::full(200);
            let m1 = r.expect(|z| s.k * (s.b * z).exp());
            let m2 = r.expect(|z| (s.k * (s.b * z).exp()).powi(2));
            assert!((m1 - s.k * (s.b * s.b / 2.0).exp()).abs() < 1e-10);
            assert!((m2 - s.k * s.k * (2.0 * s.b * s.b).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_closure_second_moment_is_q() {
        let s = gamma_zero_solve_with(&SolverParams::new(3, 0.0, 5.0), MomentClosure::Exact).unwrap();
        let m2 = Rule::full(200).expect(|z| (s.k * (s.b * z).exp()).powi(2));
        assert!((m2 - s.q).abs() < 1e-8);
    }

    #[test]
    fn reference_extinction() {
        let s = gamma_zero_solve(&SolverParams::new(2, 0.0, 1.8)).unwrap();
        let e = extinction_rate(&s);
        assert!((e - 0.0074).abs() < 0.001, "extinction {e}");
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn exact_closure_below_threshold_is_truncated_and_unstable() {
        let params = SolverParams::new(2, 0.0, 1.5);
        let s = gamma_zero_solve_with(&params, MomentClosure::Exact).unwrap();
        assert_eq!(s.regime, Regime::Boundary);
        assert!(!crate::dmft::stability_check(&s, &params).stable);
    }
}

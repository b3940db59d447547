use serde::{Deserialize, Serialize};

use super::{FixedPointSolution, SolverParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `φ ∫_{z<z_c} |T/x - Γ q^{p-2} χ|^{-2} Dz`.
    pub lhs: f64,
    /// The same integral without the `φ` prefactor; equal to `φ` times the
    /// average conditioned on survival.
    pub lhs_without_phi: f64,
    pub rhs: f64,
    pub stable: bool,
    pub margin: f64,
}

/// Linear stability of the zero mode around a fixed point.
///
/// `Γ q^{p-2} χ = aT`, so the integrand is `x² / (T² (1 - a x)²)`. Near
/// `z_crit` with `a > 0` it diverges like `1/(z_c - z)`; the truncated
/// rule's fixed window assigns that edge a finite, node-count independent
/// value.
pub fn stability_check(sol: &FixedPointSolution, params: &SolverParams) -> StabilityReport {
    let p = sol.p as f64;
    let rhs = 1.0 / ((p - 1.0) * sol.q.powf(p - 2.0));
    let rule = sol.rule(params.quad_nodes);
    let mut restricted = 0.0;
    for i in 0..rule.len() {
        let (x, eps) = sol.node(rule.z[i], rule.gap[i]);
        if eps <= 0.0 {
            return StabilityReport {
                lhs: f64::INFINITY,
                lhs_without_phi: f64::INFINITY,
                rhs,
                stable: false,
                margin: f64::NEG_INFINITY,
            };
        }
        let r = x / (sol.t * eps);
        restricted += rule.w[i] * r * r;
    }
    let lhs = sol.phi * restricted;
    let margin = rhs - lhs;
    StabilityReport { lhs, lhs_without_phi: restricted, rhs, stable: margin > 0.0, margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmft::solve_fixed_point;

    #[test]
    fn competitive_case_has_no_phi_factor() {
        let params = SolverParams::new(2, -0.5, 2.0);
        let s = solve_fixed_point(&params).unwrap();
        let r = stability_check(&s, &params);
        assert_eq!(s.phi, 1.0);
        assert!(((r.lhs - r.lhs_without_phi) / r.lhs).abs() < 1e-10);
    }

    #[test]
    fn stable_at_high_and_moderate_temperature() {
        for t in [3.0, 20.0] {
            let params = SolverParams::new(2, 0.5, t);
            let s = solve_fixed_point(&params).unwrap();
            let r = stability_check(&s, &params);
            assert!(r.stable && r.margin > 0.0, "T={t}: {r:?}");
        }
    }

    #[test]
    fn large_temperature_asymptote() {
        let params = SolverParams::new(3, 0.6, 40.0);
        let s = solve_fixed_point(&params).unwrap();
        let r = stability_check(&s, &params);
        let approx = s.phi / (s.t - s.a * s.t).powi(2);
        assert!((r.lhs / approx - 1.0).abs() < 0.05);
    }
}

use nalgebra::{DMatrix, DVector};

use super::gamma_zero::{gamma_zero_solve, MomentClosure};
use super::quadrature::{Rule, Z_LO};
use super::{normal_cdf, profile_at, z_crit_of, FixedPointSolution, Regime, SolverParams};
use crate::error::{Error, Result};

/// Residual below which Newton stops early.
const TIGHT: f64 = 1e-28;

/// `(⟨x⟩, ⟨x²⟩, ⟨dx/dz⟩)` of the ansatz under an `n`-node rule.
pub(crate) fn moments(k: f64, a: f64, b: f64, n: usize) -> Result<[f64; 3]> {
    let zc = z_crit_of(k, a, b);
    let rule = Rule::truncated(n, zc);
    let mut m = [0.0; 3];
    for i in 0..rule.len() {
        let (x, eps) = profile_at(k, a, b, rule.z[i], rule.gap[i]);
        if eps <= 0.0 {
            return Err(Error::SingularDerivative { z: rule.z[i] });
        }
        let w = rule.w[i];
        m[0] += w * x;
        m[1] += w * x * x;
        m[2] += w * b * x / eps;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericDomain("ansatz moments".into()));
    }
    Ok(m)
}

/// The three self-consistency losses at `(k, a, b)`. For `Γ = 0` the
/// response loss is vacuous and reported as zero.
pub fn losses(k: f64, a: f64, b: f64, params: &SolverParams) -> Result<[f64; 3]> {
    if !(k > 0.0 && b > 0.0 && a.is_finite()) {
        return Err(Error::ParameterDomain(format!("losses need k > 0, b > 0 (k={k}, b={b})")));
    }
    let p = params.p as f64;
    let bt = b * params.t;
    let q = bt.powf(2.0 / (p - 1.0));
    let [m1, m2, mdx] = moments(k, a, b, params.quad_nodes)?;
    let l1 = if params.gamma == 0.0 {
        0.0
    } else {
        let chi = a * params.t / (params.gamma * q.powf(p - 2.0));
        bt * chi - mdx
    };
    Ok([l1, q - m2, 1.0 - m1])
}

fn sumsq<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) struct NewtonOutcome<const D: usize> {
    pub x: [f64; D],
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Newton with a central-difference Jacobian and up to 30 step
/// halvings. Returns the best iterate found.
pub(crate) fn newton<const D: usize>(
    f: impl Fn(&[f64; D]) -> Result<[f64; D]>,
    valid: impl Fn(&[f64; D]) -> bool,
    x0: [f64; D],
    max_iter: usize,
) -> Result<NewtonOutcome<D>> {
    let mut x = x0;
    let mut fx = f(&x)?;
    let mut r = sumsq(&fx);
    let mut it = 0;
    while it < max_iter && r > TIGHT {
        it += 1;
        let mut jac = DMatrix::<f64>::zeros(D, D);
        for j in 0..D {
            let h = 1e-6 * x[j].abs().max(1e-6);
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm, span) = match (f(&xp), f(&xm)) {
                (Ok(fp), Ok(fm)) if valid(&xp) && valid(&xm) => (fp, fm, 2.0 * h),
                (Ok(fp), _) if valid(&xp) => (fp, fx, h),
                (_, Ok(fm)) if valid(&xm) => (fx, fm, h),
                _ => return Err(Error::NumericDomain("Jacobian stencil".into())),
            };
            for i in 0..D {
                jac[(i, j)] = (fp[i] - fm[i]) / span;
            }
        }
        let rhs = -DVector::<f64>::from_column_slice(&fx);
        let Some(step) = jac.lu().solve(&rhs) else { break };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let mut xn = x;
            for j in 0..D {
                xn[j] += lambda * step[j];
            }
            if valid(&xn) {
                if let Ok(fnew) = f(&xn) {
                    let rn = sumsq(&fnew);
                    if rn < r {
                        x = xn;
                        fx = fnew;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(NewtonOutcome { x, residual: r, iterations: it })
}

fn valid_for(gamma: f64) -> impl Fn(&[f64; 3]) -> bool {
    move |v: &[f64; 3]| {
        let [k, a, b] = *v;
        let sign_ok = if gamma > 0.0 { a > 0.0 } else { a < 0.0 };
        k > 0.0 && b > 0.0 && sign_ok && k.is_finite() && b.is_finite() && z_crit_of(k, a, b) > Z_LO + 4.0
    }
}

/// Newton on the three losses from `v0`.
fn polish(v0: [f64; 3], params: &SolverParams) -> Result<NewtonOutcome<3>> {
    newton(
        |v| losses(v[0], v[1], v[2], params),
        valid_for(params.gamma),
        v0,
        params.max_iter,
    )
}

pub(crate) fn build_solution(v: [f64; 3], residual: f64, params: &SolverParams) -> FixedPointSolution {
    let [k, a, b] = v;
    let p = params.p as f64;
    let q = (b * params.t).powf(2.0 / (p - 1.0));
    let chi = a * params.t / (params.gamma * q.powf(p - 2.0));
    let z_crit = z_crit_of(k, a, b);
    let (phi, regime) = if z_crit.is_finite() {
        (normal_cdf(z_crit), Regime::Boundary)
    } else {
        (1.0, Regime::Interior)
    };
    FixedPointSolution {
        p: params.p,
        gamma: params.gamma,
        t: params.t,
        k,
        a,
        b,
        q,
        chi,
        z_crit,
        phi,
        regime,
        residual,
        closure: MomentClosure::Exact,
        quad_nodes: params.quad_nodes,
    }
}

/// Solve the self-consistency system for `Γ ≠ 0` by continuation from
/// high exploration rate; `Γ = 0` is routed to [`gamma_zero_solve`].
pub fn solve_fixed_point(params: &SolverParams) -> Result<FixedPointSolution> {
    params.validate()?;
    if params.gamma == 0.0 {
        return gamma_zero_solve(params);
    }
    Continuation::new(params)?.solve_at(params.t)
}

/// A branch of solutions in `T` at fixed `(p, Γ)`, grown by warm-started
/// Newton solves. Probing a new `T` continues from the nearest solved point.
#[derive(Clone, Debug)]
pub struct Continuation {
    base: SolverParams,
    /// Solved points `(T, [k, a, b])`, sorted by `T`.
    points: Vec<(f64, [f64; 3])>,
}

impl Continuation {
    pub fn new(params: &SolverParams) -> Result<Self> {
        params.validate()?;
        if params.gamma == 0.0 {
            return Err(Error::ParameterDomain("continuation needs gamma != 0".into()));
        }
        Ok(Continuation { base: *params, points: Vec::new() })
    }

    /// Starting temperature: far enough above any critical point that
    /// `q ≈ 1, a ≈ Γ/T², b ≈ 1/T` is a good guess.
    pub fn start_temperature(&self) -> f64 {
        4.0 * (self.base.gamma_hat().abs() + 1.0) * (std::f64::consts::E * (self.base.p as f64 - 1.0)).sqrt()
    }

    fn at(&self, t: f64) -> SolverParams {
        SolverParams { t, ..self.base }
    }

    fn insert(&mut self, t: f64, v: [f64; 3]) {
        let pos = self.points.partition_point(|(s, _)| *s < t);
        if self.points.get(pos).is_some_and(|(s, _)| *s == t) {
            self.points[pos].1 = v;
        } else {
            self.points.insert(pos, (t, v));
        }
    }

    fn seed(&mut self) -> Result<()> {
        if !self.points.is_empty() {
            return Ok(());
        }
        let t0 = self.start_temperature();
        let g = self.base.gamma;
        let b0 = 1.0 / t0;
        let v0 = [(-0.5 * b0 * b0).exp(), g / (t0 * t0), b0];
        let out = polish(v0, &self.at(t0))?;
        if out.residual > self.base.newton_tol {
            return Err(Error::SolverFailure { best: out.x, residual: out.residual, iterations: out.iterations });
        }
        self.insert(t0, out.x);
        Ok(())
    }

    /// Solution on this branch at exploration rate `t`.
    pub fn solve_at(&mut self, t: f64) -> Result<FixedPointSolution> {
        self.seed()?;
        let params = self.at(t);
        params.validate()?;
        // Nearest solved point and its neighbour on the far side, for a secant predictor.
        let idx = (0..self.points.len())
            .min_by(|&i, &j| (self.points[i].0 - t).abs().total_cmp(&(self.points[j].0 - t).abs()))
            .unwrap();
        let (mut t_cur, mut v_cur) = self.points[idx];
        let dir = if t < t_cur { -1.0 } else { 1.0 };
        let mut prev: Option<(f64, [f64; 3])> = {
            let j = if dir < 0.0 { idx + 1 } else { idx.wrapping_sub(1) };
            self.points.get(j).copied()
        };
        let mut h = (0.08 * t_cur).max(0.25).min((t - t_cur).abs());
        let mut best_fail = None;
        while t_cur != t {
            if (t - t_cur).abs() <= h * (1.0 + 1e-12) {
                h = (t - t_cur).abs();
            }
            let t_next = if (t - t_cur).abs() == h { t } else { t_cur + dir * h };
            let guess = match prev {
                Some((tp, vp)) => {
                    let s = (t_next - t_cur) / (t_cur - tp);
                    let g = [0, 1, 2].map(|i| v_cur[i] + s * (v_cur[i] - vp[i]));
                    if valid_for(self.base.gamma)(&g) { g } else { v_cur }
                }
                None => v_cur,
            };
            let pn = self.at(t_next);
            let attempt = polish(guess, &pn);
            let ok = match &attempt {
                Ok(o) if o.residual <= self.base.newton_tol => {
                    let q_old = (v_cur[2] * t_cur).ln();
                    let q_new = (o.x[2] * t_next).ln();
                    let da = (o.x[1] - v_cur[1]).abs();
                    (q_new - q_old).abs() < 0.1 && da < 0.2 * v_cur[1].abs() + 0.02
                }
                _ => false,
            };
            if ok {
                let o = attempt.unwrap();
                prev = Some((t_cur, v_cur));
                t_cur = t_next;
                v_cur = o.x;
                self.insert(t_cur, v_cur);
                h = (h * 1.5).min((0.08 * t_cur).max(0.25));
            } else {
                if let Ok(o) = attempt {
                    best_fail = Some((o.x, o.residual, o.iterations));
                }
                h *= 0.5;
                if h < 1e-4 * t_cur.max(1.0) {
                    let (best, residual, iterations) = best_fail.unwrap_or((v_cur, f64::INFINITY, 0));
                    return Err(Error::SolverFailure { best, residual, iterations });
                }
            }
        }
        let fin = polish(v_cur, &params)?;
        Ok(build_solution(fin.x, fin.residual, &params))
    }
}

/// Residuals of the system reduced to `(ln b, z_crit)` for `Γ > 0`.
///
/// On the lower branch `y = a x` depends on `z` only through
/// `u = b (z - z_crit)`, so `⟨x⟩ = 1` fixes `a = ⟨y⟩` and
/// `q = ⟨y²⟩/⟨y⟩²`; what remains is `bT = q^{(p-1)/2}` and the response
/// equation, written here in scale-free form.
fn reduced(lb: f64, zc: f64, params: &SolverParams) -> Result<[f64; 2]> {
    let b = lb.exp();
    let rule = Rule::truncated(params.quad_nodes, zc);
    let (mut m1, mut m2, mut md) = (0.0, 0.0, 0.0);
    for i in 0..rule.len() {
        let (y, eps) = super::lambert::fold_branch(-b * rule.gap[i]);
        if eps <= 0.0 {
            return Err(Error::SingularDerivative { z: rule.z[i] });
        }
        m1 += rule.w[i] * y;
        m2 += rule.w[i] * y * y;
        md += rule.w[i] * y / eps;
    }
    if !(m1 > 0.0 && md > 0.0) {
        return Err(Error::NumericDomain("reduced moments".into()));
    }
    let p = params.p as f64;
    let t = params.t;
    let q = m2 / (m1 * m1);
    let e1 = lb + t.ln() - 0.5 * (p - 1.0) * q.ln();
    let e2 = m1 * m1 * t * t / (params.gamma * q.powf(p - 2.0) * md) - 1.0;
    Ok([e1, e2])
}

fn from_reduced(lb: f64, zc: f64, params: &SolverParams) -> Option<[f64; 3]> {
    let b = lb.exp();
    let rule = Rule::truncated(params.quad_nodes, zc);
    let a: f64 = (0..rule.len())
        .map(|i| rule.w[i] * super::lambert::fold_branch(-b * rule.gap[i]).0)
        .sum();
    let k = (-1.0 - b * zc).exp() / a;
    (a > 0.0 && k > 0.0 && k.is_finite()).then_some([k, a, b])
}

/// All fixed points found by a sign-change scan of the reduced system over
/// `z_crit ∈ [-3, 10]` and `bT ∈ [0.2, 40]`, each polished on the full
/// system. Only meaningful for `Γ > 0`; other cases return the
/// continuation solution alone.
pub fn enumerate_fixed_points(params: &SolverParams) -> Result<Vec<FixedPointSolution>> {
    params.validate()?;
    if params.gamma <= 0.0 {
        return Ok(vec![solve_fixed_point(params)?]);
    }
    const NZ: usize = 53;
    const NB: usize = 49;
    let zs: Vec<f64> = (0..NZ).map(|i| -3.0 + 0.25 * i as f64).collect();
    let (lbt_lo, lbt_hi) = (0.2f64.ln(), 40f64.ln());
    let lbs: Vec<f64> = (0..NB)
        .map(|j| lbt_lo + (lbt_hi - lbt_lo) * j as f64 / (NB - 1) as f64 - params.t.ln())
        .collect();
    let mut grid = vec![[f64::NAN; 2]; NZ * NB];
    for (i, &zc) in zs.iter().enumerate() {
        for (j, &lb) in lbs.iter().enumerate() {
            if let Ok(e) = reduced(lb, zc, params) {
                grid[i * NB + j] = e;
            }
        }
    }
    let mut found: Vec<FixedPointSolution> = Vec::new();
    for i in 0..NZ - 1 {
        for j in 0..NB - 1 {
            let corners = [grid[i * NB + j], grid[i * NB + j + 1], grid[(i + 1) * NB + j], grid[(i + 1) * NB + j + 1]];
            if corners.iter().any(|c| c[0].is_nan() || c[1].is_nan()) {
                continue;
            }
            let changes = |m: usize| {
                let pos = corners.iter().any(|c| c[m] > 0.0);
                let neg = corners.iter().any(|c| c[m] <= 0.0);
                pos && neg
            };
            if !(changes(0) && changes(1)) {
                continue;
            }
            let seed = [0.5 * (lbs[j] + lbs[j + 1]), 0.5 * (zs[i] + zs[i + 1])];
            let Ok(red) = newton(|v| reduced(v[0], v[1], params), |v| v[1] > Z_LO + 4.0 && v[1] < 60.0, seed, 60)
            else {
                continue;
            };
            if red.residual > 1e-16 {
                continue;
            }
            let Some(v0) = from_reduced(red.x[0], red.x[1], params) else { continue };
            let Ok(fin) = polish(v0, params) else { continue };
            if fin.residual > params.newton_tol {
                continue;
            }
            let sol = build_solution(fin.x, fin.residual, params);
            if !found.iter().any(|s| same_point(s, &sol)) {
                found.push(sol);
            }
        }
    }
    found.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(found)
}

pub(crate) fn same_point(x: &FixedPointSolution, y: &FixedPointSolution) -> bool {
    let close = |u: f64, v: f64| (u - v).abs() <= 1e-6 * u.abs().max(v.abs()).max(1e-12);
    close(x.a, y.a) && close(x.b, y.b) && close(x.k, y.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmft::Rule;

    #[test]
    fn normalization_at_a_zero() {
        let b: f64 = 0.7;
        let params = SolverParams { gamma: 0.3, ..SolverParams::new(2, 0.3, 1.0 / b) };
        let l = losses((-0.5 * b * b).exp(), 0.0, b, &params).unwrap();
        assert!(l[2].abs() < 1e-13);
    }

    #[test]
    fn competitive_solution() {
        let s = solve_fixed_point(&SolverParams::new(2, -0.2, 2.0)).unwrap();
        assert!(s.a < 0.0);
        assert_eq!(s.phi, 1.0);
        assert_eq!(s.regime, Regime::Interior);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn cooperative_solution_certificate() {
        let params = SolverParams::new(2, 0.5, 3.0);
        let s = solve_fixed_point(&params).unwrap();
        assert!(s.a > 0.0);
        assert_eq!(s.regime, Regime::Boundary);
        let l = losses(s.k, s.a, s.b, &params).unwrap();
        assert!(l.iter().all(|v| v.abs() < 1e-12), "{l:?}");
        let r = Rule::truncated(200, s.z_crit);
        let m1: f64 = (0..r.len()).map(|i| r.w[i] * s.node(r.z[i], r.gap[i]).0).sum();
        assert!((m1 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn high_temperature_is_uniform() {
        for g in [-0.7, 0.4] {
            let s = solve_fixed_point(&SolverParams::new(3, g, 50.0)).unwrap();
            assert!((s.q - 1.0).abs() < 1e-2);
            assert!(s.b < 0.05);
            let r = s.rule(200);
            let m1: f64 = (0..r.len()).map(|i| r.w[i] * s.node(r.z[i], r.gap[i]).0).sum();
            assert!((m1 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn reduced_system_agrees_with_full() {
        let params = SolverParams::new(2, 0.5, 3.0);
        let s = solve_fixed_point(&params).unwrap();
        let e = reduced(s.b.ln(), s.z_crit, &params).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-9), "{e:?}");
    }
}

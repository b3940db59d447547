//! Continuous Q-learning on a fixed payoff tensor.
//!
//! The flow is `ẋ_a^i = x_a^i [R(a, x^{-i})^i - T ln x_a^i - ρ^i]` on a product
//! of simplices. Strategies live on the raw simplex; the exploration rate is
//! rescaled by [`effective_temperature`] instead of the payoffs.

mod classify;
mod discrete;
mod integrator;

pub use classify::{classify_game, max_pairwise_reldist, ClassifyOptions, GameClassification, Label};
pub use discrete::{discrete_orbit, discrete_step, QState};
pub use integrator::{flow, integrate, IntegratorOptions, Status, TrajectoryOutcome};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random_games::PayoffTensor;

/// Floor applied before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// One mixed strategy per player, stored player-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub p: usize,
    pub n: usize,
    pub x: Vec<f64>,
}

impl StrategyProfile {
    pub fn uniform(p: usize, n: usize) -> Self {
        StrategyProfile {
            p,
            n,
            x: vec![1.0 / n as f64; p * n],
        }
    }

    pub fn from_players(players: &[Vec<f64>]) -> Result<Self> {
        let p = players.len();
        let n = players.first().map_or(0, Vec::len);
        if p == 0 || n == 0 || players.iter().any(|v| v.len() != n) {
            return Err(Error::ParameterDomain("ragged or empty strategy profile".into()));
        }
        let s = StrategyProfile {
            p,
            n,
            x: players.concat(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn player(&self, i: usize) -> &[f64] {
        &self.x[i * self.n..(i + 1) * self.n]
    }

    /// Every vector sums to one within `1e-8` and has no negative entry.
    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.p * self.n {
            return Err(Error::ParameterDomain("profile length mismatch".into()));
        }
        for i in 0..self.p {
            let v = self.player(i);
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-8 || v.iter().any(|&e| !(e >= 0.0)) {
                return Err(Error::ParameterDomain(format!(
                    "player {i} is off the simplex (sum {s})"
                )));
            }
        }
        Ok(())
    }

    /// Relabel actions: `perms[j][a]` is the new label of player `j`'s action `a`.
    pub fn permute_actions(&self, perms: &[Vec<usize>]) -> Self {
        let mut x = vec![0.0; self.x.len()];
        for j in 0..self.p {
            for a in 0..self.n {
                x[j * self.n + perms[j][a]] = self.x[j * self.n + a];
            }
        }
        StrategyProfile { x, ..*self }
    }
}

pub(crate) fn renormalize(x: &mut [f64], n: usize) {
    for v in x.chunks_mut(n) {
        for e in v.iter_mut() {
            if !(*e >= LOG_FLOOR) {
                *e = LOG_FLOOR;
            }
        }
        let s: f64 = v.iter().sum();
        for e in v.iter_mut() {
            *e /= s;
        }
    }
}

/// `T_eff = T / √(N^{p-1})`.
pub fn effective_temperature(t_scaled: f64, n: usize, p: usize) -> f64 {
    t_scaled / (n as f64).powf((p as f64 - 1.0) / 2.0)
}

/// Flat Dirichlet draw for every player.
pub fn sample_initial<R: Rng + ?Sized>(rng: &mut R, p: usize, n: usize) -> StrategyProfile {
    let mut x = Vec::with_capacity(p * n);
    for _ in 0..p {
        let start = x.len();
        for _ in 0..n {
            let e: f64 = rng.sample(Exp1);
            x.push(e.max(f64::MIN_POSITIVE));
        }
        let s: f64 = x[start..].iter().sum();
        for e in &mut x[start..] {
            *e /= s;
        }
    }
    StrategyProfile { p, n, x }
}

/// Scratch buffers for tensor contractions.
#[derive(Default)]
pub(crate) struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
}

/// `R(a, x^{-i})^i` for every action `a` of player `i`.
pub fn expected_rewards(tensor: &PayoffTensor, profile: &StrategyProfile, i: usize) -> Vec<f64> {
    let mut ws = Workspace::default();
    let mut out = vec![0.0; tensor.n()];
    rewards_into(tensor, &profile.x, i, &mut ws, &mut out);
    out
}

/// Contract player `i`'s slice against every other player's strategy:
/// trailing axes first (stride-1 over the last player's actions), then
/// leading axes.
pub(crate) fn rewards_into(
    tensor: &PayoffTensor,
    x: &[f64],
    i: usize,
    ws: &mut Workspace,
    out: &mut [f64],
) {
    let (p, n) = (tensor.p(), tensor.n());
    let slice = tensor.slice(i);
    let Workspace { a, b, .. } = ws;
    a.resize(slice.len() / n, 0.0);
    b.resize(slice.len() / n, 0.0);

    let axes = (i + 1..p).rev().map(|k| (k, true)).chain((0..i).map(|k| (k, false)));
    let mut len = slice.len();
    let mut from_slice = true;
    let mut cur_in_a = false;
    for (k, trailing) in axes {
        let xk = &x[k * n..(k + 1) * n];
        let new_len = len / n;
        let (src, dst): (&[f64], &mut [f64]) = if from_slice {
            (slice, &mut a[..new_len])
        } else if cur_in_a {
            (&a[..len], &mut b[..new_len])
        } else {
            (&b[..len], &mut a[..new_len])
        };
        if trailing {
            for (r, d) in dst.iter_mut().enumerate() {
                let row = &src[r * n..(r + 1) * n];
                *d = row.iter().zip(xk).map(|(u, v)| u * v).sum();
            }
        } else {
            dst.fill(0.0);
            for (av, xa) in xk.iter().enumerate() {
                let block = &src[av * new_len..(av + 1) * new_len];
                for (d, s) in dst.iter_mut().zip(block) {
                    *d += xa * s;
                }
            }
        }
        cur_in_a = from_slice || !cur_in_a;
        from_slice = false;
        len = new_len;
    }
    out.copy_from_slice(if cur_in_a { &a[..n] } else { &b[..n] });
}

/// Right-hand side of the continuous Q-learning flow.
pub fn ql_rhs(profile: &StrategyProfile, tensor: &PayoffTensor, t_eff: f64) -> Vec<f64> {
    let mut ws = Workspace::default();
    let mut out = vec![0.0; profile.x.len()];
    rhs_into(tensor, &profile.x, t_eff, &mut ws, &mut out);
    out
}

pub(crate) fn rhs_into(
    tensor: &PayoffTensor,
    x: &[f64],
    t_eff: f64,
    ws: &mut Workspace,
    out: &mut [f64],
) {
    let (p, n) = (tensor.p(), tensor.n());
    let mut r = std::mem::take(&mut ws.r);
    r.resize(n, 0.0);
    for i in 0..p {
        rewards_into(tensor, x, i, ws, &mut r);
        let xi = &x[i * n..(i + 1) * n];
        let mut rho = 0.0;
        for a in 0..n {
            let l = xi[a].max(LOG_FLOOR).ln();
            rho += xi[a] * (r[a] - t_eff * l);
        }
        let oi = &mut out[i * n..(i + 1) * n];
        for a in 0..n {
            let l = xi[a].max(LOG_FLOOR).ln();
            oi[a] = xi[a] * (r[a] - t_eff * l - rho);
        }
    }
    ws.r = r;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_games::GameParams;
    use crate::seed;

    fn brute_rewards(t: &PayoffTensor, x: &StrategyProfile, i: usize) -> Vec<f64> {
        let (p, n) = (t.p(), t.n());
        let mut out = vec![0.0; n];
        let mut acts = vec![0usize; p];
        for idx in 0..t.profiles() {
            let mut r = idx;
            for j in (0..p).rev() {
                acts[j] = r % n;
                r /= n;
            }
            let w: f64 = (0..p).filter(|&j| j != i).map(|j| x.player(j)[acts[j]]).product();
            out[acts[i]] += w * t.get(i, &acts);
        }
        out
    }

    #[test]
    fn hand_enumerated_two_by_two() {
        let g = GameParams::new(2, 2, 0.0, 0).unwrap();
        let t = PayoffTensor::from_values(&g, vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let x = StrategyProfile::from_players(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        assert_eq!(expected_rewards(&t, &x, 0), vec![1.75, 3.75]);
    }

    #[test]
    fn contraction_matches_enumeration() {
        for (p, n) in [(2, 4), (3, 3), (4, 2), (5, 3)] {
            let g = GameParams::new(p, n, 0.3, 5).unwrap();
            let t = PayoffTensor::sample(&g).unwrap();
            let x = sample_initial(&mut seed::stream(9), p, n);
            for i in 0..p {
                let fast = expected_rewards(&t, &x, i);
                let slow = brute_rewards(&t, &x, i);
                for (u, v) in fast.iter().zip(&slow) {
                    assert!((u - v).abs() < 1e-12, "p={p} i={i}: {u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn pure_opponents_read_a_column() {
        let g = GameParams::new(3, 3, 0.0, 2).unwrap();
        let t = PayoffTensor::sample(&g).unwrap();
        let mut players = vec![vec![0.0; 3]; 3];
        players[0] = vec![0.2, 0.3, 0.5];
        players[1][2] = 1.0;
        players[2][0] = 1.0;
        let x = StrategyProfile::from_players(&players).unwrap();
        let r = expected_rewards(&t, &x, 0);
        for a in 0..3 {
            assert_eq!(r[a], t.get(0, &[a, 2, 0]));
        }
    }

    #[test]
    fn null_game_rewards_vanish() {
        let g = GameParams::new(3, 4, 0.0, 0).unwrap();
        let t = PayoffTensor::zeros(&g).unwrap();
        let x = sample_initial(&mut seed::stream(1), 3, 4);
        assert!(expected_rewards(&t, &x, 1).iter().all(|&v| v == 0.0));
        let u = StrategyProfile::uniform(3, 4);
        assert!(ql_rhs(&u, &t, 0.7).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn entropy_flow_points_to_uniform() {
        let g = GameParams::new(2, 2, 0.0, 0).unwrap();
        let t = PayoffTensor::zeros(&g).unwrap();
        let x = StrategyProfile::from_players(&[vec![0.8, 0.2], vec![0.1, 0.9]]).unwrap();
        let d = ql_rhs(&x, &t, 1.0);
        for (dx, xa) in d.iter().zip(&x.x) {
            assert_eq!(dx.signum(), (0.5 - xa).signum());
        }
    }

    #[test]
    fn derivative_sums_vanish() {
        let g = GameParams::new(2, 3, 0.4, 8).unwrap();
        let t = PayoffTensor::sample(&g).unwrap();
        let mut rng = seed::stream(3);
        for _ in 0..100 {
            let x = sample_initial(&mut rng, 2, 3);
            let d = ql_rhs(&x, &t, 0.6);
            for i in 0..2 {
                assert!(d[i * 3..(i + 1) * 3].iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn temperature_rescaling() {
        assert_eq!(effective_temperature(2.0, 1, 3), 2.0);
        assert_eq!(effective_temperature(2.0, 4, 2), 1.0);
        assert!((effective_temperature(1.8, 50, 2) - 0.254_558_441_227_157).abs() < 1e-12);
    }

    #[test]
    fn initial_draws() {
        let mut rng = seed::stream(0);
        assert_eq!(sample_initial(&mut rng, 2, 1).x, vec![1.0, 1.0]);
        let mut mean = [0.0; 3];
        let draws = 10_000;
        for _ in 0..draws {
            let s = sample_initial(&mut rng, 1, 3);
            assert!((s.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.x.iter().all(|&v| v > 0.0));
            for a in 0..3 {
                mean[a] += s.x[a] / draws as f64;
            }
        }
        // Var of a flat Dirichlet(1,1,1) marginal is 2/36.
        let se = (2.0f64 / 36.0 / draws as f64).sqrt();
        for m in mean {
            assert!((m - 1.0 / 3.0).abs() < 4.0 * se, "mean {m}");
        }
    }
}

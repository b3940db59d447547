use serde::{Deserialize, Serialize};

use super::{rewards_into, StrategyProfile, Workspace, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::random_games::PayoffTensor;

/// Q-values with learning rate `alpha` and softmax sharpness `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QState {
    pub p: usize,
    pub n: usize,
    pub q: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl QState {
    pub fn new(p: usize, n: usize, q: Vec<f64>, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || !(beta > 0.0) || q.len() != p * n {
            return Err(Error::ParameterDomain(format!(
                "need alpha in (0, 1], beta > 0 and {} Q-values",
                p * n
            )));
        }
        Ok(QState { p, n, q, alpha, beta })
    }

    /// Q-values whose softmax is exactly `x`.
    pub fn from_profile(x: &StrategyProfile, alpha: f64, beta: f64) -> Result<Self> {
        let q = x.x.iter().map(|v| v.max(LOG_FLOOR).ln() / beta).collect();
        Self::new(x.p, x.n, q, alpha, beta)
    }

    /// Softmax of `beta * Q` for every player.
    pub fn strategy(&self) -> StrategyProfile {
        let mut x = Vec::with_capacity(self.q.len());
        for qi in self.q.chunks(self.n) {
            let m = qi.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let start = x.len();
            x.extend(qi.iter().map(|v| (self.beta * (v - m)).exp()));
            let s: f64 = x[start..].iter().sum();
            x[start..].iter_mut().for_each(|v| *v /= s);
        }
        StrategyProfile { p: self.p, n: self.n, x }
    }
}

/// `Q ← (1 - α) Q + R(x)` with `x = softmax(β Q)`. `t_eff_check` must equal
/// `α / β`; it guards against mixing up the two parametrizations.
pub fn discrete_step(state: &QState, tensor: &PayoffTensor, t_eff_check: f64) -> Result<QState> {
    let ratio = state.alpha / state.beta;
    if (ratio - t_eff_check).abs() > 1e-9 * t_eff_check.abs().max(1.0) {
        return Err(Error::ParameterDomain(format!(
            "alpha / beta = {ratio} but t_eff = {t_eff_check}"
        )));
    }
    let mut ws = Workspace::default();
    Ok(step_with(state, tensor, &mut ws))
}

fn step_with(state: &QState, tensor: &PayoffTensor, ws: &mut Workspace) -> QState {
    let x = state.strategy();
    let n = state.n;
    let mut r = vec![0.0; n];
    let mut q = state.q.clone();
    for i in 0..state.p {
        rewards_into(tensor, &x.x, i, ws, &mut r);
        for a in 0..n {
            q[i * n + a] = (1.0 - state.alpha) * q[i * n + a] + r[a];
        }
    }
    QState { q, ..state.clone() }
}

/// Run discrete Q-learning from `start` with `β = α / t_eff` for the number
/// of steps that covers `horizon` units of continuous time (one step is `β`).
pub fn discrete_orbit(
    tensor: &PayoffTensor,
    start: &StrategyProfile,
    alpha: f64,
    t_eff: f64,
    horizon: f64,
) -> Result<StrategyProfile> {
    let beta = alpha / t_eff;
    let steps = (horizon / beta).round() as usize;
    let mut s = QState::from_profile(start, alpha, beta)?;
    let mut ws = Workspace::default();
    for _ in 0..steps {
        s = step_with(&s, tensor, &mut ws);
    }
    Ok(s.strategy())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{expected_rewards, sample_initial};
    use crate::random_games::GameParams;
    use crate::seed;

    #[test]
    fn null_game_decays_geometrically() {
        let g = GameParams::new(2, 3, 0.0, 0).unwrap();
        let t = PayoffTensor::zeros(&g).unwrap();
        let s = QState::new(2, 3, vec![2.0; 6], 0.1, 0.1).unwrap();
        let s1 = discrete_step(&s, &t, 1.0).unwrap();
        assert!(s1.q.iter().all(|&v| (v - 1.8).abs() < 1e-15));
        assert!(s1.strategy().x.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn full_rate_forgets() {
        let g = GameParams::new(3, 3, 0.2, 4).unwrap();
        let t = PayoffTensor::sample(&g).unwrap();
        let x = sample_initial(&mut seed::stream(8), 3, 3);
        let s = QState::from_profile(&x, 1.0, 2.0).unwrap();
        let s1 = discrete_step(&s, &t, 0.5).unwrap();
        let x_now = s.strategy();
        for i in 0..3 {
            let r = expected_rewards(&t, &x_now, i);
            assert_eq!(&s1.q[i * 3..(i + 1) * 3], &r[..]);
        }
    }

    #[test]
    fn ratio_is_checked() {
        let g = GameParams::new(2, 2, 0.0, 0).unwrap();
        let t = PayoffTensor::zeros(&g).unwrap();
        let s = QState::new(2, 2, vec![0.0; 4], 0.1, 0.2).unwrap();
        assert!(discrete_step(&s, &t, 0.5).is_ok());
        assert!(discrete_step(&s, &t, 0.4).is_err());
    }

    #[test]
    fn softmax_round_trip() {
        let x = sample_initial(&mut seed::stream(2), 2, 4);
        let s = QState::from_profile(&x, 0.01, 0.3).unwrap();
        for (u, v) in s.strategy().x.iter().zip(&x.x) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{effective_temperature, integrate, sample_initial, IntegratorOptions, Status, StrategyProfile};
use crate::random_games::PayoffTensor;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    UniqueFixedPoint,
    MultipleFixedPoints,
    NonConverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub n_starts: usize,
    /// Pairwise relative distance below which two end points coincide.
    pub dist_tol: f64,
    /// Master seed for the start streams; start `k` uses `derive(seed, "start", [k])`.
    pub seed: u64,
    pub integrator: IntegratorOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            n_starts: 100,
            dist_tol: 0.01,
            seed: 0,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameClassification {
    pub label: Label,
    pub n_starts: usize,
    pub n_converged: usize,
    /// Largest pairwise relative distance among converged end points.
    pub max_pairwise_reldist: f64,
    /// Starts whose integration failed outright (counted as not converged).
    pub integration_failures: usize,
}

/// `|u - v| / |(u + v) / 2|` maximized over all pairs.
pub fn max_pairwise_reldist(points: &[&StrategyProfile]) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, u) in points.iter().enumerate() {
        for v in &points[k + 1..] {
            let mut d2 = 0.0;
            let mut m2 = 0.0;
            for (a, b) in u.x.iter().zip(&v.x) {
                d2 += (a - b) * (a - b);
                m2 += 0.25 * (a + b) * (a + b);
            }
            worst = worst.max((d2 / m2).sqrt());
        }
    }
    worst
}

/// Integrate from `n_starts` flat-Dirichlet starts and label the game.
/// `t_scaled` is converted with [`effective_temperature`].
pub fn classify_game(tensor: &PayoffTensor, t_scaled: f64, opts: &ClassifyOptions) -> GameClassification {
    let (p, n) = (tensor.p(), tensor.n());
    let t_eff = effective_temperature(t_scaled, n, p);
    let outcomes: Vec<_> = (0..opts.n_starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::stream(seed::derive(opts.seed, "start", &[k as u64]));
            let x0 = sample_initial(&mut rng, p, n);
            integrate(&x0, tensor, t_eff, &opts.integrator)
        })
        .collect();

    let integration_failures = outcomes.iter().filter(|o| o.is_err()).count();
    let finals: Vec<&StrategyProfile> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .filter(|o| o.status == Status::FixedPoint)
        .map(|o| &o.final_state)
        .collect();
    let n_converged = finals.len();
    let max_pairwise_reldist = max_pairwise_reldist(&finals);
    let label = if n_converged < opts.n_starts {
        Label::NonConverged
    } else if max_pairwise_reldist < opts.dist_tol {
        Label::UniqueFixedPoint
    } else {
        Label::MultipleFixedPoints
    };
    GameClassification {
        label,
        n_starts: opts.n_starts,
        n_converged,
        max_pairwise_reldist,
        integration_failures,
    }
}

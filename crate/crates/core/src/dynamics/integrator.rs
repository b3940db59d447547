//! Dormand–Prince 5(4) with simplex renormalization after every accepted step.

use serde::{Deserialize, Serialize};

use super::{renormalize, rhs_into, StrategyProfile, Workspace};
use crate::error::{Error, Result};
use crate::random_games::PayoffTensor;

const MIN_STEP: f64 = 1e-12;
const SAFETY: f64 = 0.9;

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights, including the FSAL stage.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorOptions {
    pub max_step: f64,
    /// Sup-norm of `ẋ` below which a state counts as a fixed point.
    pub deriv_tol: f64,
    pub t_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Sampling interval for the stored path; `None` stores nothing.
    pub record_every: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            max_step: 0.5,
            deriv_tol: 1e-8,
            t_max: 5000.0,
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            record_every: None,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.max_step, self.deriv_tol, self.t_max, self.rel_tol, self.abs_tol];
        if pos.iter().any(|v| !(*v > 0.0)) || self.deriv_tol >= 1.0 {
            return Err(Error::Config("integrator options must be positive, deriv_tol < 1".into()));
        }
        if matches!(self.record_every, Some(r) if !(r > 0.0)) {
            return Err(Error::Config("record_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    FixedPoint,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub final_state: StrategyProfile,
    pub status: Status,
    pub t_end: f64,
    pub steps: usize,
    pub path: Vec<(f64, StrategyProfile)>,
}

impl TrajectoryOutcome {
    /// Rows `(t, player, action, probability)` of the sampled path.
    pub fn write_path_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "player", "action", "probability"])?;
        for (t, s) in &self.path {
            for i in 0..s.p {
                for a in 0..s.n {
                    out.write_record([
                        crate::fmt_f64(*t),
                        i.to_string(),
                        a.to_string(),
                        crate::fmt_f64(s.x[i * s.n + a]),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

struct Stepper<'a> {
    tensor: &'a PayoffTensor,
    t_eff: f64,
    ws: Workspace,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_last_stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(tensor: &'a PayoffTensor, t_eff: f64, dim: usize) -> Self {
        Stepper {
            tensor,
            t_eff,
            ws: Workspace::default(),
            k: std::array::from_fn(|_| vec![0.0; dim]),
            y_stage: vec![0.0; dim],
            y_last_stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
        }
    }

    fn eval(&mut self, y: &[f64], slot: usize) {
        let mut out = std::mem::take(&mut self.k[slot]);
        rhs_into(self.tensor, y, self.t_eff, &mut self.ws, &mut out);
        self.k[slot] = out;
    }

    /// One trial step from `y` (with `k[0] = f(y)` already set). Fills
    /// `y_new`, `k[6] = f(y_new)` and returns the scaled error norm.
    fn attempt(&mut self, y: &[f64], h: f64, rtol: f64, atol: f64) -> f64 {
        for s in 0..6 {
            for j in 0..y.len() {
                let mut acc = 0.0;
                for (m, a) in A[s].iter().enumerate().take(s + 1) {
                    acc += a * self.k[m][j];
                }
                self.y_stage[j] = y[j] + h * acc;
            }
            if s < 5 {
                let stage = std::mem::take(&mut self.y_stage);
                self.eval(&stage, s + 1);
                self.y_stage = stage;
                if s == 4 {
                    self.y_last_stage.copy_from_slice(&self.y_stage);
                }
            } else {
                self.y_new.copy_from_slice(&self.y_stage);
            }
        }
        let y_new = std::mem::take(&mut self.y_new);
        self.eval(&y_new, 6);
        let mut sum = 0.0;
        for j in 0..y.len() {
            let mut err = 0.0;
            for (m, e) in E.iter().enumerate() {
                err += e * self.k[m][j];
            }
            let scale = atol + rtol * y[j].abs().max(y_new[j].abs());
            let r = h * err / scale;
            sum += r * r;
        }
        self.y_new = y_new;
        (sum / y.len() as f64).sqrt()
    }

    /// Dominant Jacobian magnitude from the two stages that share `c = 1`.
    fn stiffness(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.y_new.len() {
            num += (self.k[6][j] - self.k[5][j]).powi(2);
            den += (self.y_new[j] - self.y_last_stage[j]).powi(2);
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            0.0
        }
    }
}

/// Keeps `h λ` well inside the negative-real stability interval so that
/// stiff decay toward a fixed point is damped rather than oscillating at
/// the edge of stability.
const STIFF_CAP: f64 = 2.5;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn initial_step(y: &[f64], f0: &[f64], opts: &IntegratorOptions) -> f64 {
    let scale = |j: usize| opts.abs_tol + opts.rel_tol * y[j].abs();
    let d0 = (0..y.len()).map(|j| (y[j] / scale(j)).powi(2)).sum::<f64>().sqrt();
    let d1 = (0..y.len()).map(|j| (f0[j] / scale(j)).powi(2)).sum::<f64>().sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(opts.max_step)
}

enum Stop {
    FixedPoint,
    At(f64),
}

fn run(
    start: &StrategyProfile,
    tensor: &PayoffTensor,
    t_eff: f64,
    opts: &IntegratorOptions,
    stop: Stop,
) -> Result<TrajectoryOutcome> {
    opts.validate()?;
    start.validate()?;
    let n = start.n;
    let dim = start.x.len();
    let mut st = Stepper::new(tensor, t_eff, dim);
    let mut y = start.x.clone();
    renormalize(&mut y, n);
    st.eval(&y, 0);

    let (t_end, dir) = match stop {
        Stop::FixedPoint => (opts.t_max, 1.0),
        Stop::At(t) => (t.abs(), t.signum()),
    };
    let check_fp = matches!(stop, Stop::FixedPoint);
    let mut path = Vec::new();
    let mut next_record = 0.0;
    let mut record = |t: f64, y: &[f64], path: &mut Vec<(f64, StrategyProfile)>, force: bool| {
        if let Some(every) = opts.record_every {
            if force || t >= next_record {
                path.push((dir * t, StrategyProfile { p: start.p, n, x: y.to_vec() }));
                next_record = ((t / every).floor() + 1.0) * every;
            }
        }
    };
    record(0.0, &y, &mut path, true);

    let done = |y: Vec<f64>, status, t: f64, steps, path| TrajectoryOutcome {
        final_state: StrategyProfile { p: start.p, n, x: y },
        status,
        t_end: dir * t,
        steps,
        path,
    };

    if check_fp && sup(&st.k[0]) < opts.deriv_tol {
        return Ok(done(y, Status::FixedPoint, 0.0, 0, path));
    }

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut h = initial_step(&y, &st.k[0], opts);
    loop {
        if t >= t_end {
            record(t, &y, &mut path, true);
            let status = if check_fp { Status::Timeout } else { Status::FixedPoint };
            return Ok(done(y, status, t, steps, path));
        }
        let mut last = false;
        if t + h >= t_end {
            h = t_end - t;
            last = true;
        }
        let err = st.attempt(&y, dir * h, opts.rel_tol, opts.abs_tol);
        if !err.is_finite() || err > 1.0 {
            let factor = if err.is_finite() { (SAFETY * err.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= factor;
            if h < MIN_STEP {
                return Err(Error::IntegrationFailure { t: dir * t, step: h, state: y });
            }
            continue;
        }
        let lambda = st.stiffness();
        t = if last { t_end } else { t + h };
        steps += 1;
        std::mem::swap(&mut y, &mut st.y_new);
        st.k.swap(0, 6);
        let drift = y.iter().any(|&v| !(v >= super::LOG_FLOOR));
        renormalize(&mut y, n);
        if drift {
            st.eval(&y, 0);
        }
        if check_fp && sup(&st.k[0]) < opts.deriv_tol {
            st.eval(&y, 0);
            if sup(&st.k[0]) < opts.deriv_tol {
                record(t, &y, &mut path, true);
                return Ok(done(y, Status::FixedPoint, t, steps, path));
            }
        }
        record(t, &y, &mut path, false);
        let factor = if err == 0.0 { 10.0 } else { (SAFETY * err.powf(-0.2)).clamp(0.2, 10.0) };
        h = (h * factor).min(opts.max_step);
        if lambda.is_finite() && lambda * h > STIFF_CAP {
            h = STIFF_CAP / lambda;
        }
    }
}

/// Integrate until the derivative sup-norm drops below `deriv_tol` or
/// `t_max` is reached.
pub fn integrate(
    start: &StrategyProfile,
    tensor: &PayoffTensor,
    t_eff: f64,
    opts: &IntegratorOptions,
) -> Result<TrajectoryOutcome> {
    run(start, tensor, t_eff, opts, Stop::FixedPoint)
}

/// Flow map: the state after `duration` time units (negative runs backward).
pub fn flow(
    start: &StrategyProfile,
    tensor: &PayoffTensor,
    t_eff: f64,
    duration: f64,
    opts: &IntegratorOptions,
) -> Result<StrategyProfile> {
    if duration == 0.0 {
        return Ok(start.clone());
    }
    Ok(run(start, tensor, t_eff, opts, Stop::At(duration))?.final_state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ql_rhs, sample_initial};
    use crate::random_games::GameParams;
    use crate::seed;

    #[test]
    fn null_game_reaches_uniform() {
        let g = GameParams::new(3, 4, 0.0, 0).unwrap();
        let t = PayoffTensor::zeros(&g).unwrap();
        let x0 = sample_initial(&mut seed::stream(4), 3, 4);
        let out = integrate(&x0, &t, 0.5, &IntegratorOptions::default()).unwrap();
        assert_eq!(out.status, Status::FixedPoint);
        assert!(out.final_state.x.iter().all(|v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn huge_temperature_is_uniform() {
        let g = GameParams::new(2, 6, 0.5, 1).unwrap();
        let t = PayoffTensor::sample(&g).unwrap();
        let x0 = sample_initial(&mut seed::stream(2), 2, 6);
        let out = integrate(&x0, &t, 1e3, &IntegratorOptions::default()).unwrap();
        assert_eq!(out.status, Status::FixedPoint);
        assert!(out.final_state.x.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-3));
    }

    #[test]
    fn fixed_point_contract() {
        let g = GameParams::from_gamma_hat(2, 50, 0.5, 17).unwrap();
        let t = PayoffTensor::sample(&g).unwrap();
        let x0 = sample_initial(&mut seed::stream(5), 2, 50);
        let te = crate::dynamics::effective_temperature(5.0, 50, 2);
        let out = integrate(&x0, &t, te, &IntegratorOptions::default()).unwrap();
        assert_eq!(out.status, Status::FixedPoint);
        assert!(out.t_end < 5000.0);
        assert!(sup(&ql_rhs(&out.final_state, &t, te)) < 1e-8);
    }

    #[test]
    fn timeout_is_reported() {
        let g = GameParams::new(2, 5, 0.0, 3).unwrap();
        let t = PayoffTensor::sample(&g).unwrap();
        let x0 = sample_initial(&mut seed::stream(0), 2, 5);
        let opts = IntegratorOptions { t_max: 0.3, ..Default::default() };
        let out = integrate(&x0, &t, 0.2, &opts).unwrap();
        assert_eq!(out.status, Status::Timeout);
        assert_eq!(out.t_end, 0.3);
    }

    #[test]
    fn flow_round_trip() {
        let g = GameParams::new(2, 4, -0.5, 9).unwrap();
        let t = PayoffTensor::sample(&g).unwrap();
        let x0 = sample_initial(&mut seed::stream(1), 2, 4);
        let opts = IntegratorOptions { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
        let fwd = flow(&x0, &t, 0.8, 1.5, &opts).unwrap();
        let back = flow(&fwd, &t, 0.8, -1.5, &opts).unwrap();
        for (u, v) in back.x.iter().zip(&x0.x) {
            assert!((u - v).abs() < 1e-7);
        }
    }

    #[test]
    fn path_sampling_and_csv() {
        let g = GameParams::new(2, 3, 0.0, 2).unwrap();
        let t = PayoffTensor::sample(&g).unwrap();
        let x0 = sample_initial(&mut seed::stream(3), 2, 3);
        let opts = IntegratorOptions { record_every: Some(0.5), ..Default::default() };
        let out = integrate(&x0, &t, 1.0, &opts).unwrap();
        assert!(out.path.len() >= 2);
        assert_eq!(out.path[0].0, 0.0);
        let mut buf = Vec::new();
        out.write_path_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,player,action,probability\n"));
        assert_eq!(text.lines().count(), 1 + out.path.len() * 6);
    }
}

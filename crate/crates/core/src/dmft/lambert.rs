//! Principal branch of the Lambert W function on the real line, plus the
//! lower-branch root of `y e^{-y} = e^{u-1}` parametrized by its distance
//! `u <= 0` from the branch point, which keeps full relative accuracy in
//! `1 - y` as the branch point is approached.

use std::f64::consts::E;

const MAX_ITER: usize = 60;

/// `W_0(x)` for `x >= -1/e`. Returns NaN below the branch point.
pub fn lambert_w0(x: f64) -> f64 {
    if x.is_nan() || x < -1.0 / E - 1e-16 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x <= -1.0 / E {
        return -1.0;
    }
    if x > 3.0 {
        return w0_from_log(x.ln());
    }
    let mut w = if x < -0.25 {
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l = x.ln_1p();
        l * (1.0 - l / (2.0 + l))
    };
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// `W_0(e^l)`, i.e. the root of `w + ln w = l`, without forming `e^l`.
pub fn w0_from_log(l: f64) -> f64 {
    if l < 1.0 {
        return lambert_w0(l.exp());
    }
    let ll = l.ln();
    let mut w = l - ll + ll / l;
    for _ in 0..MAX_ITER {
        let f = w + w.ln() - l;
        let step = f / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

/// Root `y ∈ (0, 1]` of `ln y - y + 1 = u` for `u <= 0`, returned as
/// `(y, 1 - y)`. Equivalently `y = -W_0(-e^{u-1})`.
pub fn fold_branch(u: f64) -> (f64, f64) {
    if u >= 0.0 {
        return (1.0, 0.0);
    }
    if u > -0.3 {
        // Solve h(ε) = ln(1-ε) + ε = u in ε = 1 - y.
        let mut eps = (-2.0 * u).sqrt();
        eps = eps.min(0.9);
        for _ in 0..MAX_ITER {
            let h = log1p_plus(eps);
            let dh = -eps / (1.0 - eps);
            let step = (h - u) / dh;
            let next = (eps - step).clamp(0.5 * eps, 0.5 * (1.0 + eps));
            let done = (next - eps).abs() <= 4.0 * f64::EPSILON * eps;
            eps = next;
            if done {
                break;
            }
        }
        (1.0 - eps, eps)
    } else {
        // Solve s - e^s + 1 = u in s = ln y.
        let mut s = u - 1.0;
        for _ in 0..MAX_ITER {
            let y = s.exp();
            let g = s - y + 1.0 - u;
            let step = g / (1.0 - y);
            s -= step;
            if step.abs() <= 4.0 * f64::EPSILON * (1.0 + s.abs()) {
                break;
            }
        }
        let y = s.exp();
        (y, 1.0 - y)
    }
}

/// `ln(1 - ε) + ε` without cancellation for small `ε`.
fn log1p_plus(eps: f64) -> f64 {
    if eps < 0.1 {
        let mut term = eps * eps;
        let mut sum = 0.0;
        let mut k = 2.0;
        while term / k > 1e-18 * (eps * eps) {
            sum -= term / k;
            term *= eps;
            k += 1.0;
        }
        sum
    } else {
        (-eps).ln_1p() + eps
    }
}

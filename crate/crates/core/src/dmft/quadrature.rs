//! Gaussian expectations `⟨f⟩ = ∫ f(z) Dz`, `Dz = e^{-z²/2}/√(2π) dz`.
//!
//! The full line uses Gauss–Hermite nodes. The measure truncated at `z_c`
//! uses composite Gauss–Legendre panels on `[-14, z_c - 1]` and a fixed
//! 32-node window on `[z_c - 1, z_c]` in the variable `z = z_c - s²`, which
//! absorbs the square-root behaviour of the fixed-point profile at `z_c`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Lower end of the truncated rule; `Φ(-14) ≈ 8e-45`.
pub const Z_LO: f64 = -14.0;
/// Upper end of the bulk panels.
pub const Z_HI: f64 = 14.0;
pub const WINDOW_WIDTH: f64 = 1.0;
pub const WINDOW_NODES: usize = 32;
const PANEL_NODES: usize = 20;

/// Nodes and weights on `[-1, 1]` (Legendre) or the real line (Hermite).
pub type NodeSet = Arc<(Vec<f64>, Vec<f64>)>;

/// Gauss–Hermite rule for the standard normal measure.
pub fn gauss_hermite(n: usize) -> NodeSet {
    cached(n, true)
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> NodeSet {
    cached(n, false)
}

fn cached(n: usize, hermite: bool) -> NodeSet {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), NodeSet>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&(n, hermite)) {
        return r.clone();
    }
    let rule = Arc::new(if hermite { hermite_nodes(n) } else { legendre_nodes(n) });
    cache.lock().unwrap().insert((n, hermite), rule.clone());
    rule
}

/// Nodes of the probabilists' Hermite polynomial from the Jacobi matrix,
/// each polished by Newton on the normalized recurrence. Weights are
/// `1 / Σ_k h_k(x)²`, evaluated with rescaling so the tails do not overflow.
fn hermite_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    x.sort_by(f64::total_cmp);
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        for _ in 0..10 {
            let (hn, hn1, _) = hermite_eval(n, *xi);
            let dz = hn / ((n as f64).sqrt() * hn1);
            *xi -= dz;
            if dz.abs() <= 1e-15 * xi.abs().max(1.0) {
                break;
            }
        }
        let (_, _, log_sum) = hermite_eval(n, *xi);
        *wi = (-log_sum).exp();
    }
    // Symmetrize to remove round-off asymmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let xm = 0.5 * (x[j] - x[i]);
        let wm = 0.5 * (w[i] + w[j]);
        x[i] = -xm;
        x[j] = xm;
        w[i] = wm;
        w[j] = wm;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(h_n, h_{n-1}, ln Σ_{k<n} h_k²)` at `x` for the orthonormal
/// probabilists' Hermite polynomials; `h_n, h_{n-1}` share an arbitrary scale.
fn hermite_eval(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut log_scale = 0.0;
    let mut sum = 0.0;
    for k in 0..n {
        sum += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            prev *= 1e-100;
            cur *= 1e-100;
            sum *= 1e-200;
            log_scale += 200.0 * std::f64::consts::LN_10;
        }
    }
    (cur, prev, sum.ln() + log_scale)
}

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// A quadrature rule for the (possibly truncated) standard normal measure.
/// `gap[i] = z_c - z[i]` is carried exactly so that integrands can resolve
/// the neighbourhood of `z_c` without cancellation.
#[derive(Clone, Debug)]
pub struct Rule {
    pub z: Vec<f64>,
    pub gap: Vec<f64>,
    pub w: Vec<f64>,
    pub z_crit: f64,
}

impl Rule {
    /// Gauss–Hermite over the whole line.
    pub fn full(n: usize) -> Rule {
        let gh = gauss_hermite(n);
        Rule {
            z: gh.0.clone(),
            gap: vec![f64::INFINITY; n],
            w: gh.1.clone(),
            z_crit: f64::INFINITY,
        }
    }

    /// The measure restricted to `z < z_crit`; `n` sets the bulk node count.
    pub fn truncated(n: usize, z_crit: f64) -> Rule {
        if z_crit.is_infinite() && z_crit > 0.0 {
            return Rule::full(n);
        }
        let mut rule = Rule { z: Vec::new(), gap: Vec::new(), w: Vec::new(), z_crit };
        if !(z_crit > Z_LO) {
            return rule;
        }
        let width = WINDOW_WIDTH.min(z_crit - Z_LO);
        let bulk_hi = (z_crit - width).min(Z_HI);
        if bulk_hi > Z_LO {
            let panels = (n / PANEL_NODES).max(2);
            let per = (n / panels).max(2);
            let gl = gauss_legendre(per);
            let h = (bulk_hi - Z_LO) / panels as f64;
            for k in 0..panels {
                let lo = Z_LO + k as f64 * h;
                for (t, v) in gl.0.iter().zip(&gl.1) {
                    let z = lo + 0.5 * h * (t + 1.0);
                    rule.z.push(z);
                    rule.gap.push(z_crit - z);
                    rule.w.push(0.5 * h * v * density(z));
                }
            }
        }
        let gl = gauss_legendre(WINDOW_NODES);
        let smax = width.sqrt();
        for (t, v) in gl.0.iter().zip(&gl.1) {
            let s = 0.5 * smax * (t + 1.0);
            let z = z_crit - s * s;
            rule.z.push(z);
            rule.gap.push(s * s);
            rule.w.push(0.5 * smax * v * 2.0 * s * density(z));
        }
        rule
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.z.iter().zip(&self.w).map(|(&z, &w)| w * f(z)).sum()
    }
}

/// `⟨f⟩` over the standard normal, truncated at `z_crit` when given.
pub fn gauss_expect(f: impl Fn(f64) -> f64, n: usize, z_crit: Option<f64>) -> f64 {
    match z_crit {
        Some(zc) => Rule::truncated(n, zc).expect(f),
        None => Rule::full(n).expect(f),
    }
}

//! Correlated Gaussian payoff ensemble.
//!
//! For every action profile `a` the vector `(Π(a)_1, ..., Π(a)_p)` is drawn
//! from a zero-mean Gaussian with unit variances and pairwise correlation
//! `Γ/(p-1)`. Distinct profiles are independent. Values are stored unscaled;
//! the `N`-dependent rescaling lives in [`crate::dynamics::effective_temperature`].

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Default cap on `p * N^p`.
pub const DEFAULT_ELEMENT_BUDGET: u64 = 100_000_000;

const DUMP_MAGIC: &[u8; 4] = b"QRET";
const DUMP_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub p: usize,
    pub n: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl GameParams {
    pub fn new(p: usize, n: usize, gamma: f64, seed: u64) -> Result<Self> {
        let g = GameParams { p, n, gamma, seed };
        g.validate()?;
        Ok(g)
    }

    /// Build from the normalized correlation `Γ̂ = Γ/(p-1)`.
    pub fn from_gamma_hat(p: usize, n: usize, gamma_hat: f64, seed: u64) -> Result<Self> {
        Self::new(p, n, gamma_hat * (p as f64 - 1.0), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.n < 2 {
            return Err(Error::ParameterDomain(format!(
                "need p >= 2 and n >= 2, got p = {}, n = {}",
                self.p, self.n
            )));
        }
        check_gamma(self.p, self.gamma)
    }

    pub fn gamma_hat(&self) -> f64 {
        self.gamma / (self.p as f64 - 1.0)
    }

    /// True for the degenerate zero-sum (`Γ = -1`) or identical-payoff
    /// (`Γ = p-1`) ensembles.
    pub fn at_endpoint(&self) -> bool {
        self.gamma == -1.0 || self.gamma == self.p as f64 - 1.0
    }

    /// Number of stored payoff values, `p * N^p`, or `None` on overflow.
    pub fn element_count(&self) -> Option<u128> {
        let mut profiles: u128 = 1;
        for _ in 0..self.p {
            profiles = profiles.checked_mul(self.n as u128)?;
        }
        profiles.checked_mul(self.p as u128)
    }
}

fn check_gamma(p: usize, gamma: f64) -> Result<()> {
    let hi = p as f64 - 1.0;
    if !(gamma.is_finite() && (-1.0..=hi).contains(&gamma)) {
        return Err(Error::ParameterDomain(format!(
            "gamma = {gamma} outside [-1, {hi}]"
        )));
    }
    Ok(())
}

/// Payoff covariance across players for one profile: unit diagonal,
/// off-diagonal `Γ/(p-1)`.
pub fn build_covariance(p: usize, gamma: f64) -> Result<DMatrix<f64>> {
    if p < 2 {
        return Err(Error::ParameterDomain(format!("need p >= 2, got {p}")));
    }
    check_gamma(p, gamma)?;
    let rho = gamma / (p as f64 - 1.0);
    Ok(DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho }))
}

/// Symmetric square root `L` of the covariance, `L L^T = Σ`.
///
/// `Σ = (1-ρ) I + ρ 11^T`, so `L = √(1-ρ) I + c 11^T` with
/// `c = (√(1+Γ) - √(1-ρ)) / p`. This stays exact at both endpoints where
/// `Σ` is singular.
pub fn covariance_sqrt(p: usize, gamma: f64) -> Result<DMatrix<f64>> {
    if p < 2 {
        return Err(Error::ParameterDomain(format!("need p >= 2, got {p}")));
    }
    check_gamma(p, gamma)?;
    let pf = p as f64;
    let rho = gamma / (pf - 1.0);
    let s = (1.0 - rho).max(0.0).sqrt();
    let c = ((1.0 + gamma).max(0.0).sqrt() - s) / pf;
    Ok(DMatrix::from_fn(p, p, |i, j| if i == j { s + c } else { c }))
}

/// Payoffs for all players over all profiles.
///
/// Layout is player-major: `values[i * N^p + idx(a)]` with `idx` row-major
/// over `(a_1, ..., a_p)`, so the last player's action is the fastest axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffTensor {
    pub params: GameParams,
    values: Vec<f64>,
}

impl PayoffTensor {
    /// Sample with the default element budget.
    pub fn sample(params: &GameParams) -> Result<Self> {
        Self::sample_with_budget(params, DEFAULT_ELEMENT_BUDGET)
    }

    /// Sample using a stream seeded from `params.seed`.
    pub fn sample_with_budget(params: &GameParams, budget: u64) -> Result<Self> {
        let mut rng = seed::stream(params.seed);
        sample_payoffs(params, &mut rng, budget)
    }

    /// The null game: every payoff is zero.
    pub fn zeros(params: &GameParams) -> Result<Self> {
        params.validate()?;
        let len = checked_len(params, DEFAULT_ELEMENT_BUDGET)?;
        Ok(PayoffTensor {
            params: *params,
            values: vec![0.0; len],
        })
    }

    /// Wrap explicit values laid out as described on the type.
    pub fn from_values(params: &GameParams, values: Vec<f64>) -> Result<Self> {
        params.validate()?;
        let len = checked_len(params, u64::MAX)?;
        if values.len() != len {
            return Err(Error::ParameterDomain(format!(
                "expected {len} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("payoff values".into()));
        }
        Ok(PayoffTensor {
            params: *params,
            values,
        })
    }

    pub fn p(&self) -> usize {
        self.params.p
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn profiles(&self) -> usize {
        self.values.len() / self.params.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Player `i`'s payoffs over all profiles.
    pub fn slice(&self, i: usize) -> &[f64] {
        let m = self.profiles();
        &self.values[i * m..(i + 1) * m]
    }

    /// Row-major profile index of `actions`.
    pub fn profile_index(&self, actions: &[usize]) -> usize {
        actions.iter().fold(0, |acc, &a| acc * self.params.n + a)
    }

    pub fn get(&self, player: usize, actions: &[usize]) -> f64 {
        self.values[player * self.profiles() + self.profile_index(actions)]
    }

    /// Relabel actions: `perms[j][a]` is the new label of player `j`'s action `a`.
    pub fn permute_actions(&self, perms: &[Vec<usize>]) -> Self {
        let (p, n) = (self.params.p, self.params.n);
        let m = self.profiles();
        let mut out = vec![0.0; self.values.len()];
        let mut actions = vec![0usize; p];
        let mut mapped = vec![0usize; p];
        for idx in 0..m {
            let mut r = idx;
            for j in (0..p).rev() {
                actions[j] = r % n;
                r /= n;
            }
            for j in 0..p {
                mapped[j] = perms[j][actions[j]];
            }
            let new_idx = self.profile_index(&mapped);
            for i in 0..p {
                out[i * m + new_idx] = self.values[i * m + idx];
            }
        }
        PayoffTensor {
            params: self.params,
            values: out,
        }
    }

    /// Write the binary dump: 32-byte header then little-endian `f64` values.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.params.p as u32).to_le_bytes())?;
        w.write_all(&(self.params.n as u32).to_le_bytes())?;
        w.write_all(&self.params.gamma.to_le_bytes())?;
        w.write_all(&self.params.seed.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 32];
        r.read_exact(&mut head)?;
        if &head[0..4] != DUMP_MAGIC {
            return Err(Error::Config("bad tensor dump magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != DUMP_VERSION {
            return Err(Error::Config(format!("unsupported dump version {version}")));
        }
        let p = u32_at(8) as usize;
        let n = u32_at(12) as usize;
        let gamma = f64::from_le_bytes(head[16..24].try_into().unwrap());
        let seed = u64::from_le_bytes(head[24..32].try_into().unwrap());
        let params = GameParams::new(p, n, gamma, seed)?;
        let len = checked_len(&params, u64::MAX)?;
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        PayoffTensor::from_values(&params, values)
    }
}

fn checked_len(params: &GameParams, budget: u64) -> Result<usize> {
    let needed = params.element_count().unwrap_or(u128::MAX);
    if needed > budget as u128 || needed > usize::MAX as u128 {
        return Err(Error::ResourceLimit { needed, budget });
    }
    Ok(needed as usize)
}

/// Draw one tensor from `rng`. Profiles are visited in row-major order and
/// each consumes `p` standard normals.
pub fn sample_payoffs<R: Rng + ?Sized>(
    params: &GameParams,
    rng: &mut R,
    budget: u64,
) -> Result<PayoffTensor> {
    params.validate()?;
    let len = checked_len(params, budget)?;
    let p = params.p;
    let m = len / p;
    let l = covariance_sqrt(p, params.gamma)?;
    let mut values = vec![0.0; len];
    let mut z = vec![0.0; p];
    for idx in 0..m {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..p {
            let mut s = 0.0;
            for j in 0..p {
                s += l[(i, j)] * z[j];
            }
            values[i * m + idx] = s;
        }
    }
    Ok(PayoffTensor {
        params: *params,
        values,
    })
}

/// Sample covariance of the per-profile payoff vectors.
pub fn empirical_covariance(tensor: &PayoffTensor) -> DMatrix<f64> {
    pooled_covariance(std::slice::from_ref(tensor))
}

/// Sample covariance pooled over several tensors with the same `p`.
pub fn pooled_covariance(tensors: &[PayoffTensor]) -> DMatrix<f64> {
    let p = tensors[0].p();
    let mut mean = vec![0.0; p];
    let mut count = 0usize;
    for t in tensors {
        for (i, m) in mean.iter_mut().enumerate() {
            *m += t.slice(i).iter().sum::<f64>();
        }
        count += t.profiles();
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    let mut cov = DMatrix::zeros(p, p);
    for t in tensors {
        for i in 0..p {
            for j in i..p {
                let s: f64 = t
                    .slice(i)
                    .iter()
                    .zip(t.slice(j))
                    .map(|(x, y)| (x - mean[i]) * (y - mean[j]))
                    .sum();
                cov[(i, j)] += s;
            }
        }
    }
    let denom = (count as f64 - 1.0).max(1.0);
    for i in 0..p {
        for j in i..p {
            cov[(i, j)] /= denom;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov
}

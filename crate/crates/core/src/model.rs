//! Model parameterization, energies, sufficient statistics and the
//! brute-force joint distribution used as a correctness oracle.
//!
//! The energy of a configuration `x ∈ {-1,0,+1}^m` is
//!
//! ```text
//! H(x) = -Σ_s τ_s x_s - Σ_{s<t} σ_st x_s x_t + Σ_s α²_s x_s²
//! ```
//!
//! and configurations are weighted by `exp(-β H(x))`. With a shared `α²`
//! every `α²_s` is the same number.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BcError, Result};

pub type Spin = i8;

/// The three admissible spin values in the order used for conditional
/// probability triples: `[-1, 0, +1]`.
pub const SPIN_VALUES: [Spin; 3] = [-1, 0, 1];

/// Default cap on the node count for exhaustive enumeration (3^12 ≈ 531k).
pub const ENUMERATION_CAP: usize = 12;

/// Zero-cost parameter: one value for the whole network or one per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha2 {
    Shared(f64),
    PerNode(Vec<f64>),
}

impl Default for Alpha2 {
    fn default() -> Self {
        Alpha2::Shared(0.0)
    }
}

/// Inverse temperature `β = 1/T`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct InverseTemperature(f64);

impl InverseTemperature {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(BcError::InvalidParameters(format!(
                "inverse temperature must be finite and >= 0, got {beta}"
            )));
        }
        Ok(Self(beta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for InverseTemperature {
    fn default() -> Self {
        Self(1.0)
    }
}

/// Thresholds, symmetric interactions and zero cost of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct BCParameters {
    tau: Vec<f64>,
    sigma: DMatrix<f64>,
    alpha2: Alpha2,
}

impl BCParameters {
    pub fn new(tau: Vec<f64>, sigma: DMatrix<f64>, alpha2: Alpha2) -> Result<Self> {
        let m = tau.len();
        if m == 0 {
            return Err(BcError::InvalidParameters(
                "network needs at least one node".into(),
            ));
        }
        if sigma.nrows() != m || sigma.ncols() != m {
            return Err(BcError::DimensionMismatch {
                expected: m,
                got: sigma.nrows().max(sigma.ncols()),
            });
        }
        if let Alpha2::PerNode(a) = &alpha2 {
            if a.len() != m {
                return Err(BcError::DimensionMismatch {
                    expected: m,
                    got: a.len(),
                });
            }
        }
        let alpha_ok = match &alpha2 {
            Alpha2::Shared(a) => a.is_finite(),
            Alpha2::PerNode(a) => a.iter().all(|v| v.is_finite()),
        };
        if !alpha_ok || tau.iter().any(|v| !v.is_finite()) || sigma.iter().any(|v| !v.is_finite()) {
            return Err(BcError::InvalidParameters(
                "all parameters must be finite".into(),
            ));
        }
        for s in 0..m {
            if sigma[(s, s)] != 0.0 {
                return Err(BcError::InvalidParameters(format!(
                    "sigma[{s}][{s}] must be zero"
                )));
            }
            for t in (s + 1)..m {
                if sigma[(s, t)] != sigma[(t, s)] {
                    return Err(BcError::InvalidParameters(format!(
                        "sigma must be symmetric: sigma[{s}][{t}] = {} but sigma[{t}][{s}] = {}",
                        sigma[(s, t)],
                        sigma[(t, s)]
                    )));
                }
            }
        }
        Ok(Self { tau, sigma, alpha2 })
    }

    pub fn from_rows(tau: Vec<f64>, sigma: &[Vec<f64>], alpha2: Alpha2) -> Result<Self> {
        let m = tau.len();
        if sigma.len() != m {
            return Err(BcError::DimensionMismatch {
                expected: m,
                got: sigma.len(),
            });
        }
        for row in sigma {
            if row.len() != m {
                return Err(BcError::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
        }
        Self::new(tau, DMatrix::from_fn(m, m, |i, j| sigma[i][j]), alpha2)
    }

    /// All parameters zero: the uniform distribution.
    pub fn zeros(m: usize) -> Self {
        Self {
            tau: vec![0.0; m],
            sigma: DMatrix::zeros(m, m),
            alpha2: Alpha2::Shared(0.0),
        }
    }

    /// Homogeneous parameters on a graph: `τ_s = tau`, `σ_st = sigma` on
    /// every edge of `adjacency`, shared `α² = alpha2`.
    pub fn homogeneous(adjacency: &DMatrix<u8>, tau: f64, sigma: f64, alpha2: f64) -> Result<Self> {
        let m = adjacency.nrows();
        let s = DMatrix::from_fn(m, m, |i, j| {
            if i != j && adjacency[(i, j)] != 0 {
                sigma
            } else {
                0.0
            }
        });
        Self::new(vec![tau; m], s, Alpha2::Shared(alpha2))
    }

    pub fn m(&self) -> usize {
        self.tau.len()
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn alpha2(&self) -> &Alpha2 {
        &self.alpha2
    }

    pub fn alpha2_at(&self, s: usize) -> f64 {
        match &self.alpha2 {
            Alpha2::Shared(a) => *a,
            Alpha2::PerNode(a) => a[s],
        }
    }

    pub fn alpha2_vec(&self) -> Vec<f64> {
        (0..self.m()).map(|s| self.alpha2_at(s)).collect()
    }

    /// `τ_s + Σ_{t≠s} σ_st x_t`; the entry `x[s]` is ignored.
    pub fn local_field(&self, s: usize, x: &[Spin]) -> f64 {
        let mut g = self.tau[s];
        for (t, &xt) in x.iter().enumerate() {
            if t != s && xt != 0 {
                g += self.sigma[(s, t)] * f64::from(xt);
            }
        }
        g
    }

    /// Every parameter multiplied by `beta`, so that sampling at `β` equals
    /// sampling the scaled parameters at `β = 1`.
    pub fn scaled(&self, beta: f64) -> Self {
        let alpha2 = match &self.alpha2 {
            Alpha2::Shared(a) => Alpha2::Shared(a * beta),
            Alpha2::PerNode(a) => Alpha2::PerNode(a.iter().map(|v| v * beta).collect()),
        };
        Self {
            tau: self.tau.iter().map(|v| v * beta).collect(),
            sigma: &self.sigma * beta,
            alpha2,
        }
    }

    /// Relabel nodes: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let m = self.m();
        check_permutation(perm, m)?;
        let alpha2 = match &self.alpha2 {
            Alpha2::Shared(a) => Alpha2::Shared(*a),
            Alpha2::PerNode(a) => Alpha2::PerNode(perm.iter().map(|&p| a[p]).collect()),
        };
        Ok(Self {
            tau: perm.iter().map(|&p| self.tau[p]).collect(),
            sigma: DMatrix::from_fn(m, m, |i, j| self.sigma[(perm[i], perm[j])]),
            alpha2,
        })
    }

    pub fn with_tau(mut self, tau: Vec<f64>) -> Result<Self> {
        if tau.len() != self.m() {
            return Err(BcError::DimensionMismatch {
                expected: self.m(),
                got: tau.len(),
            });
        }
        self.tau = tau;
        Ok(self)
    }

    pub fn with_alpha2(self, alpha2: Alpha2) -> Result<Self> {
        Self::new(self.tau, self.sigma, alpha2)
    }

    /// Number of edges with nonzero interaction (upper triangle).
    pub fn edge_count(&self) -> usize {
        let m = self.m();
        (0..m)
            .flat_map(|s| ((s + 1)..m).map(move |t| (s, t)))
            .filter(|&(s, t)| self.sigma[(s, t)] != 0.0)
            .count()
    }
}

pub(crate) fn check_permutation(perm: &[usize], m: usize) -> Result<()> {
    if perm.len() != m {
        return Err(BcError::DimensionMismatch {
            expected: m,
            got: perm.len(),
        });
    }
    let mut seen = vec![false; m];
    for &p in perm {
        if p >= m || seen[p] {
            return Err(BcError::InvalidParameters("not a permutation".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// A configuration of `m` spins, each in `{-1, 0, +1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig(Vec<Spin>);

impl SpinConfig {
    pub fn new(x: Vec<Spin>) -> Result<Self> {
        if let Some(&bad) = x.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(BcError::InvalidSpin(i64::from(bad)));
        }
        Ok(Self(x))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Spin] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Spin] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<Spin> {
        self.0
    }

    /// Base-3 index with digit `x_s + 1` at position `s` (node 0 least significant).
    pub fn index(&self) -> usize {
        self.0
            .iter()
            .rev()
            .fold(0usize, |acc, &v| acc * 3 + (v + 1) as usize)
    }

    pub fn from_index(mut index: usize, m: usize) -> Self {
        let mut x = Vec::with_capacity(m);
        for _ in 0..m {
            x.push((index % 3) as Spin - 1);
            index /= 3;
        }
        Self(x)
    }
}

impl AsRef<[Spin]> for SpinConfig {
    fn as_ref(&self) -> &[Spin] {
        &self.0
    }
}

/// Canonical sufficient statistics `φ(x)`: singletons `x_s`, then pair
/// products `x_s x_t` for `s < t` in row-major order, then `Σ_s x_s²`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuffStats(pub Vec<f64>);

impl SuffStats {
    pub fn len_for(m: usize) -> usize {
        m + m * (m.saturating_sub(1)) / 2 + 1
    }

    pub fn singletons(&self, m: usize) -> &[f64] {
        &self.0[..m]
    }

    pub fn pairs(&self, m: usize) -> &[f64] {
        &self.0[m..self.0.len() - 1]
    }

    pub fn nonzero_count(&self) -> f64 {
        *self.0.last().expect("statistics vector is never empty")
    }

    /// Position of the pair `(s, t)` (either order) in the statistics vector.
    pub fn pair_index(m: usize, s: usize, t: usize) -> usize {
        let (a, b) = if s < t { (s, t) } else { (t, s) };
        m + a * m - a * (a + 1) / 2 + (b - a - 1)
    }
}

pub fn hamiltonian(x: &SpinConfig, p: &BCParameters) -> Result<f64> {
    if x.len() != p.m() {
        return Err(BcError::DimensionMismatch {
            expected: p.m(),
            got: x.len(),
        });
    }
    Ok(energy(x.as_slice(), p))
}

pub(crate) fn energy(x: &[Spin], p: &BCParameters) -> f64 {
    let m = p.m();
    let mut h = 0.0;
    for s in 0..m {
        let xs = f64::from(x[s]);
        if xs == 0.0 {
            continue;
        }
        h -= p.tau[s] * xs;
        h += p.alpha2_at(s) * xs * xs;
        for t in (s + 1)..m {
            if x[t] != 0 {
                h -= p.sigma[(s, t)] * xs * f64::from(x[t]);
            }
        }
    }
    h
}

pub fn sufficient_statistics(x: &SpinConfig) -> SuffStats {
    let v = x.as_slice();
    let m = v.len();
    let mut phi = Vec::with_capacity(SuffStats::len_for(m));
    phi.extend(v.iter().map(|&s| f64::from(s)));
    for s in 0..m {
        for t in (s + 1)..m {
            phi.push(f64::from(v[s] * v[t]));
        }
    }
    phi.push(v.iter().filter(|&&s| s != 0).count() as f64);
    SuffStats(phi)
}

/// `log(e^a + e^b + e^c)` without overflow.
pub(crate) fn log_sum_exp3(a: f64, b: f64, c: f64) -> f64 {
    let (mx, u, v) = if a >= b && a >= c {
        (a, b, c)
    } else if b >= c {
        (b, a, c)
    } else {
        (c, a, b)
    };
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + ((u - mx).exp() + (v - mx).exp()).ln_1p()
}

/// Conditional law of `X_s` given the other spins, as `[P(-1), P(0), P(+1)]`.
///
/// `x` is a full configuration; its entry at `s` is ignored.
pub fn conditional_distribution(
    s: usize,
    x: &[Spin],
    p: &BCParameters,
    beta: InverseTemperature,
) -> Result<[f64; 3]> {
    let m = p.m();
    if s >= m {
        return Err(BcError::InvalidNode { index: s, m });
    }
    if x.len() != m {
        return Err(BcError::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    if let Some(&bad) = x.iter().find(|v| !(-1..=1).contains(*v)) {
        return Err(BcError::InvalidSpin(i64::from(bad)));
    }
    Ok(conditional_probs(
        beta.value() * p.local_field(s, x),
        beta.value() * p.alpha2_at(s),
    ))
}

/// Three-state conditional law for effective field `g` and zero cost `a`
/// (both already multiplied by β).
#[inline]
pub(crate) fn conditional_probs(g: f64, a: f64) -> [f64; 3] {
    let lm = -g - a;
    let lp = g - a;
    let mx = lm.max(lp).max(0.0);
    let wm = (lm - mx).exp();
    let w0 = (-mx).exp();
    let wp = (lp - mx).exp();
    let d = wm + w0 + wp;
    [wm / d, w0 / d, wp / d]
}

fn check_cap(m: usize, cap: usize) -> Result<()> {
    if m > cap {
        return Err(BcError::EnumerationCap { m, cap });
    }
    Ok(())
}

/// Exhaustive log-weights `-β H(x)` for all `3^m` configurations, indexed
/// by [`SpinConfig::index`].
fn log_weights(p: &BCParameters, beta: InverseTemperature, cap: usize) -> Result<Vec<f64>> {
    let m = p.m();
    check_cap(m, cap)?;
    let total = 3usize.pow(m as u32);
    let b = beta.value();
    let mut x = vec![-1 as Spin; m];
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        out.push(-b * energy(&x, p));
        // base-3 increment, node 0 fastest
        for v in x.iter_mut() {
            if *v < 1 {
                *v += 1;
                break;
            }
            *v = -1;
        }
    }
    Ok(out)
}

fn log_sum(lw: &[f64]) -> f64 {
    let mx = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + lw.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

pub fn log_partition_function(p: &BCParameters, beta: InverseTemperature) -> Result<f64> {
    Ok(log_sum(&log_weights(p, beta, ENUMERATION_CAP)?))
}

pub fn exact_partition_function(p: &BCParameters, beta: InverseTemperature) -> Result<f64> {
    exact_partition_function_capped(p, beta, ENUMERATION_CAP)
}

pub fn exact_partition_function_capped(
    p: &BCParameters,
    beta: InverseTemperature,
    cap: usize,
) -> Result<f64> {
    Ok(log_sum(&log_weights(p, beta, cap)?).exp())
}

/// Probabilities of all `3^m` configurations, indexed by [`SpinConfig::index`].
pub fn exact_distribution(p: &BCParameters, beta: InverseTemperature) -> Result<Vec<f64>> {
    let lw = log_weights(p, beta, ENUMERATION_CAP)?;
    let lz = log_sum(&lw);
    Ok(lw.into_iter().map(|v| (v - lz).exp()).collect())
}

pub fn exact_joint_probability(
    x: &SpinConfig,
    p: &BCParameters,
    beta: InverseTemperature,
) -> Result<f64> {
    if x.len() != p.m() {
        return Err(BcError::DimensionMismatch {
            expected: p.m(),
            got: x.len(),
        });
    }
    let lw = log_weights(p, beta, ENUMERATION_CAP)?;
    let lz = log_sum(&lw);
    Ok((lw[x.index()] - lz).exp())
}

/// `E[φ(X)]` by exhaustive enumeration.
pub fn exact_moments(p: &BCParameters, beta: InverseTemperature) -> Result<SuffStats> {
    let m = p.m();
    let probs = exact_distribution(p, beta)?;
    let mut acc = vec![0.0; SuffStats::len_for(m)];
    for (idx, &pr) in probs.iter().enumerate() {
        let phi = sufficient_statistics(&SpinConfig::from_index(idx, m));
        for (a, v) in acc.iter_mut().zip(phi.0) {
            *a += pr * v;
        }
    }
    Ok(SuffStats(acc))
}

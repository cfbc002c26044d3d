//! Node-wise negative log pseudo-likelihood with analytic derivatives.
//!
//! For node `s` and parameter vector `θ = (τ, σ_row, α²)` of length `m+1`,
//! observation `i` contributes
//!
//! ```text
//! ℓ_i(θ) = log(1 + 2 cosh(γ_i) e^{-α²}) − x_{s,i} γ_i + α² x_{s,i}²,
//! γ_i    = τ + Σ_{t≠s} σ_st x_{t,i}
//! ```
//!
//! and the objective is the mean over observations. With `z_i = (1, x_{t,i})`
//! and the conditional moments `m₁ = P(+1) − P(−1)`, `ψ = P(+1) + P(−1)`:
//!
//! ```text
//! ∇_(τ,σ) ℓ_i = (m₁ − x_s) z_i               ∇_α² ℓ_i = x_s² − ψ
//! ∇²_(τ,σ)   = (ψ − m₁²) z_i z_iᵀ             ∇²_(τ,σ),α² = −m₁(1 − ψ) z_i
//! ∇²_α²α²    = ψ(1 − ψ)
//! ```
//!
//! The Hessian is the conditional covariance of `(X_s z, −X_s²)` and is
//! therefore positive semidefinite.

use nalgebra::{DMatrix, DVector};

use crate::error::{BcError, Result};
use crate::model::{conditional_probs, log_sum_exp3};
use crate::sampler::SampleMatrix;

use super::NodeParams;

/// The pseudo-likelihood objective of one node over a fixed data set.
#[derive(Clone, Debug)]
pub struct NodeObjective {
    node: usize,
    n: usize,
    m: usize,
    /// Response `x_{s,i}`.
    y: Vec<f64>,
    /// Row-major `n × m` design: column 0 is 1, then `x_t` for `t ≠ s`.
    z: Vec<f64>,
}

/// Per-observation conditional quantities. Everything is formed from the
/// three probabilities directly so that nothing cancels when one state
/// dominates.
struct Moments {
    /// `−log P(X_s = x)`.
    loss: f64,
    /// `m₁ − x`.
    resid: f64,
    /// `x² − ψ`.
    resid2: f64,
    /// `Var(X_s)`.
    var: f64,
    /// `Cov(X_s, −X_s²) = −m₁(1 − ψ)`.
    cov: f64,
    /// `Var(X_s²) = ψ(1 − ψ)`.
    var2: f64,
}

#[inline]
fn moments(gamma: f64, a: f64, x: f64) -> Moments {
    let lp = gamma - a;
    let lm = -gamma - a;
    let [pm, p0, pp] = conditional_probs(gamma, a);
    let (lx, resid, resid2) = if x > 0.0 {
        (lp, -(p0 + 2.0 * pm), p0)
    } else if x < 0.0 {
        (lm, p0 + 2.0 * pp, p0)
    } else {
        (0.0, pp - pm, -(pp + pm))
    };
    Moments {
        loss: log_sum_exp3(-lx, lp - lx, lm - lx),
        resid,
        resid2,
        var: 4.0 * pp * pm + p0 * (pp + pm),
        cov: -(pp - pm) * p0,
        var2: (pp + pm) * p0,
    }
}

impl NodeObjective {
    pub fn new(node: usize, data: &SampleMatrix) -> Result<Self> {
        let (n, m) = (data.n(), data.m());
        if node >= m {
            return Err(BcError::InvalidNode { index: node, m });
        }
        if m < 2 {
            return Err(BcError::InvalidConfig(
                "pseudo-likelihood needs at least two nodes".into(),
            ));
        }
        let mut y = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n * m);
        for r in data.rows() {
            y.push(f64::from(r[node]));
            z.push(1.0);
            z.extend(
                r.iter()
                    .enumerate()
                    .filter(|&(t, _)| t != node)
                    .map(|(_, &v)| f64::from(v)),
            );
        }
        Ok(Self { node, n, m, y, z })
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Parameter dimension `m + 1`.
    pub fn dim(&self) -> usize {
        self.m + 1
    }

    fn check(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(BcError::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn design(&self, i: usize) -> &[f64] {
        &self.z[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    fn gamma(&self, i: usize, theta: &DVector<f64>) -> f64 {
        self.design(i)
            .iter()
            .zip(theta.iter())
            .map(|(z, t)| z * t)
            .sum()
    }

    pub fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        self.check(theta)?;
        Ok(self.value_unchecked(theta))
    }

    pub(crate) fn value_unchecked(&self, theta: &DVector<f64>) -> f64 {
        let a = theta[self.m];
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += moments(self.gamma(i, theta), a, self.y[i]).loss;
        }
        acc / self.n as f64
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(theta)?;
        Ok(self.value_and_gradient(theta).1)
    }

    pub(crate) fn value_and_gradient(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let (m, a) = (self.m, theta[self.m]);
        let mut grad = DVector::zeros(m + 1);
        let mut val = 0.0;
        for i in 0..self.n {
            let mo = moments(self.gamma(i, theta), a, self.y[i]);
            val += mo.loss;
            for (k, zk) in self.design(i).iter().enumerate() {
                grad[k] += mo.resid * zk;
            }
            grad[m] += mo.resid2;
        }
        let n = self.n as f64;
        (val / n, grad / n)
    }

    pub fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(theta)?;
        let (m, a) = (self.m, theta[self.m]);
        let mut h = DMatrix::zeros(m + 1, m + 1);
        for i in 0..self.n {
            let mo = moments(self.gamma(i, theta), a, self.y[i]);
            let (v, c, w) = (mo.var, mo.cov, mo.var2);
            let z = self.design(i);
            for j in 0..m {
                if z[j] == 0.0 {
                    continue;
                }
                for k in j..m {
                    h[(j, k)] += v * z[j] * z[k];
                }
                h[(j, m)] += c * z[j];
            }
            h[(m, m)] += w;
        }
        for j in 0..=m {
            for k in 0..j {
                h[(j, k)] = h[(k, j)];
            }
        }
        Ok(h / self.n as f64)
    }

    /// Row `i` holds the gradient of `ℓ_i` alone (not divided by `n`).
    pub fn per_observation_gradients(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(theta)?;
        let (m, a) = (self.m, theta[self.m]);
        let mut out = DMatrix::zeros(self.n, m + 1);
        for i in 0..self.n {
            let mo = moments(self.gamma(i, theta), a, self.y[i]);
            for (k, zk) in self.design(i).iter().enumerate() {
                out[(i, k)] = mo.resid * zk;
            }
            out[(i, m)] = mo.resid2;
        }
        Ok(out)
    }
}

/// Mean negative log pseudo-likelihood of node `s`.
pub fn node_negloglik(s: usize, data: &SampleMatrix, theta: &NodeParams) -> Result<f64> {
    let obj = NodeObjective::new(s, data)?;
    obj.value(&theta.to_vector())
}

/// Gradient in the order `(τ, σ_row…, α²)`.
pub fn node_gradient(s: usize, data: &SampleMatrix, theta: &NodeParams) -> Result<DVector<f64>> {
    let obj = NodeObjective::new(s, data)?;
    obj.gradient(&theta.to_vector())
}

pub fn node_hessian(s: usize, data: &SampleMatrix, theta: &NodeParams) -> Result<DMatrix<f64>> {
    let obj = NodeObjective::new(s, data)?;
    obj.hessian(&theta.to_vector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{conditional_distribution, Alpha2, BCParameters, InverseTemperature};
    use crate::rng::rng_for;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_data(seed: u64, n: usize, m: usize) -> SampleMatrix {
        let mut rng = rng_for(seed, &[]);
        let data = (0..n * m).map(|_| rng.random_range(-1..=1)).collect();
        SampleMatrix::new(n, m, data).unwrap()
    }

    #[test]
    fn zero_parameters_give_log_three() {
        let d = random_data(1, 30, 4);
        let v = node_negloglik(2, &d, &NodeParams::zeros(4)).unwrap();
        assert_relative_eq!(v, 3f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn matches_conditional_distribution() {
        let d = random_data(2, 25, 4);
        let theta = NodeParams {
            tau: 0.4,
            sigma_row: vec![0.3, -0.8, 1.1],
            alpha2: -0.2,
        };
        let s = 1;
        // the same node parameters embedded in a full parameter set
        let mut rows = vec![vec![0.0; 4]; 4];
        for (k, t) in [0usize, 2, 3].into_iter().enumerate() {
            rows[s][t] = theta.sigma_row[k];
            rows[t][s] = theta.sigma_row[k];
        }
        let p = BCParameters::from_rows(
            vec![0.0, theta.tau, 0.0, 0.0],
            &rows,
            Alpha2::PerNode(vec![0.0, theta.alpha2, 0.0, 0.0]),
        )
        .unwrap();
        let mut oracle = 0.0;
        for r in d.rows() {
            let c = conditional_distribution(s, r, &p, InverseTemperature::default()).unwrap();
            oracle -= c[(r[s] + 1) as usize].ln();
        }
        oracle /= d.n() as f64;
        assert_relative_eq!(
            node_negloglik(s, &d, &theta).unwrap(),
            oracle,
            epsilon = 1e-12
        );
    }

    #[test]
    fn field_shift_identity_with_all_plus_neighbors() {
        // with x_t = +1 for every neighbor, τ + c together with σ_st − c/(m−1)
        // leaves every γ_i unchanged
        let mut d = random_data(3, 20, 4);
        let rows: Vec<Vec<i8>> = d.rows().map(|r| vec![r[0], 1, 1, 1]).collect();
        d = SampleMatrix::from_rows(&rows).unwrap();
        let a = NodeParams {
            tau: 0.2,
            sigma_row: vec![0.5, -0.1, 0.3],
            alpha2: 0.7,
        };
        let c = 0.9;
        let b = NodeParams {
            tau: a.tau + c,
            sigma_row: a.sigma_row.iter().map(|v| v - c / 3.0).collect(),
            alpha2: a.alpha2,
        };
        assert_relative_eq!(
            node_negloglik(0, &d, &a).unwrap(),
            node_negloglik(0, &d, &b).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gradient_at_zero_on_zero_data() {
        let d = SampleMatrix::from_rows(&vec![vec![0i8; 3]; 5]).unwrap();
        let g = node_gradient(0, &d, &NodeParams::zeros(3)).unwrap();
        assert_eq!(g[0], 0.0);
        assert_relative_eq!(g[3], -2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let d = random_data(4, 10, 3);
        let bad = NodeParams {
            tau: 0.0,
            sigma_row: vec![0.0],
            alpha2: 0.0,
        };
        assert!(matches!(
            node_negloglik(0, &d, &bad),
            Err(BcError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            node_gradient(5, &d, &NodeParams::zeros(3)),
            Err(BcError::InvalidNode { .. })
        ));
    }

    #[test]
    fn hessian_is_symmetric_psd() {
        let d = random_data(5, 40, 5);
        let theta = NodeParams {
            tau: -0.3,
            sigma_row: vec![0.6, 0.2, -0.9, 0.1],
            alpha2: 0.4,
        };
        let h = node_hessian(3, &d, &theta).unwrap();
        assert!((&h - h.transpose()).amax() < 1e-12);
        let eig = h.symmetric_eigenvalues();
        assert!(eig.min() > -1e-10);
    }
}

//! Node-wise pseudo-likelihood estimation with an L1 penalty on the
//! interactions, and assembly of the node fits into one network.

mod network;
mod objective;
mod solver;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{BcError, Result};

pub use network::{fit_network, fit_network_with, NetworkEstimate, SupportRule};
pub use objective::{node_gradient, node_hessian, node_negloglik, NodeObjective};
pub use solver::{fit_node, FitStatus, NodeFit};

/// Parameters of one node's conditional law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    pub tau: f64,
    /// `σ_st` for `t ≠ s` in increasing `t`.
    pub sigma_row: Vec<f64>,
    pub alpha2: f64,
}

impl NodeParams {
    /// All zero for a network of `m` nodes.
    pub fn zeros(m: usize) -> Self {
        Self {
            tau: 0.0,
            sigma_row: vec![0.0; m.saturating_sub(1)],
            alpha2: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma_row.len() + 2
    }

    /// `(τ, σ_row…, α²)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.tau);
        v.extend_from_slice(&self.sigma_row);
        v.push(self.alpha2);
        DVector::from_vec(v)
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(BcError::DimensionMismatch {
                expected: 2,
                got: v.len(),
            });
        }
        let k = v.len() - 1;
        Ok(Self {
            tau: v[0],
            sigma_row: v.rows(1, k - 1).iter().copied().collect(),
            alpha2: v[k],
        })
    }

    /// Value of `σ_st` for node `t` of the full network.
    pub fn sigma_to(&self, s: usize, t: usize) -> f64 {
        assert_ne!(s, t, "no self interaction");
        self.sigma_row[row_index(s, t)]
    }
}

/// Position of node `t` within node `s`'s interaction row.
pub fn row_index(s: usize, t: usize) -> usize {
    if t < s {
        t
    } else {
        t - 1
    }
}

/// Network node addressed by position `k` of node `s`'s interaction row.
pub fn row_node(s: usize, k: usize) -> usize {
    if k < s {
        k
    } else {
        k + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// L1 penalty weight λ.
    pub lambda: f64,
    pub penalize_tau: bool,
    pub penalize_alpha2: bool,
    pub max_iter: usize,
    /// Tolerance on the KKT residual.
    pub tol: f64,
    /// Tolerance on the relative change of the penalized objective.
    pub obj_tol: f64,
    /// Any |parameter| above this is treated as divergence.
    pub divergence_limit: f64,
    pub init: Option<NodeParams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            penalize_tau: false,
            penalize_alpha2: false,
            max_iter: 20_000,
            tol: 1e-6,
            obj_tol: 1e-9,
            divergence_limit: 30.0,
            init: None,
        }
    }
}

impl FitConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(BcError::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tol > 0.0 && self.obj_tol > 0.0) {
            return Err(BcError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(BcError::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Per-coordinate penalty weights in `(τ, σ_row…, α²)` order.
    pub fn penalty_weights(&self, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |j, _| {
            if j == 0 {
                if self.penalize_tau {
                    self.lambda
                } else {
                    0.0
                }
            } else if j == dim - 1 {
                if self.penalize_alpha2 {
                    self.lambda
                } else {
                    0.0
                }
            } else {
                self.lambda
            }
        })
    }
}

/// `√(ln m / n)`.
pub fn default_lambda(m: usize, n: usize) -> f64 {
    assert!(m >= 1 && n >= 1, "default_lambda needs m >= 1 and n >= 1");
    ((m as f64).ln() / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_lambda_values() {
        assert_relative_eq!(default_lambda(19, 10_000), 0.017_159_37, epsilon = 1e-8);
        assert_relative_eq!(default_lambda(30, 260), 0.114_374_5, epsilon = 1e-7);
        assert_relative_eq!(default_lambda(1, 5), 0.0);
    }

    #[test]
    fn row_indexing_roundtrip() {
        for s in 0..5 {
            for k in 0..4 {
                let t = row_node(s, k);
                assert_ne!(t, s);
                assert_eq!(row_index(s, t), k);
            }
        }
        let p = NodeParams {
            tau: 1.0,
            sigma_row: vec![2.0, 3.0],
            alpha2: 4.0,
        };
        assert_eq!(p.sigma_to(1, 0), 2.0);
        assert_eq!(p.sigma_to(1, 2), 3.0);
        assert_eq!(NodeParams::from_vector(&p.to_vector()).unwrap(), p);
    }

    #[test]
    fn penalty_weights_follow_flags() {
        let c = FitConfig {
            lambda: 0.5,
            ..FitConfig::default()
        };
        assert_eq!(c.penalty_weights(4).as_slice(), &[0.0, 0.5, 0.5, 0.0]);
        let c = FitConfig {
            lambda: 0.5,
            penalize_tau: true,
            penalize_alpha2: true,
            ..FitConfig::default()
        };
        assert_eq!(c.penalty_weights(3).as_slice(), &[0.5, 0.5, 0.5]);
        assert!(FitConfig::with_lambda(-1.0).validate().is_err());
    }
}

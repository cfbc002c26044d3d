use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BcError, Result};
use crate::model::{Alpha2, BCParameters};
use crate::sampler::SampleMatrix;

use super::{fit_node, FitConfig, NodeFit};

/// How the two directional estimates of an edge decide its presence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportRule {
    /// Present if either direction is nonzero.
    #[default]
    Or,
    /// Present only if both directions are nonzero.
    And,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkEstimate {
    /// `σ̂_st` is the mean of the two directional estimates; edges outside
    /// `support` are set to zero. `α̂²` is per node.
    pub params: BCParameters,
    pub node_fits: Vec<NodeFit>,
    pub lambda: f64,
    pub rule: SupportRule,
    /// Symmetric 0/1 adjacency of selected edges.
    pub support: DMatrix<u8>,
}

impl NetworkEstimate {
    pub fn m(&self) -> usize {
        self.node_fits.len()
    }

    /// Selected edges `(s, t)` with `s < t`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let m = self.m();
        let mut out = Vec::new();
        for s in 0..m {
            for t in s + 1..m {
                if self.support[(s, t)] != 0 {
                    out.push((s, t));
                }
            }
        }
        out
    }

    pub fn all_converged(&self) -> bool {
        self.node_fits.iter().all(NodeFit::converged)
    }
}

pub fn fit_network(data: &SampleMatrix, cfg: &FitConfig) -> Result<NetworkEstimate> {
    fit_network_with(data, cfg, SupportRule::Or)
}

pub fn fit_network_with(
    data: &SampleMatrix,
    cfg: &FitConfig,
    rule: SupportRule,
) -> Result<NetworkEstimate> {
    cfg.validate()?;
    let m = data.m();
    if m < 2 {
        return Err(BcError::InvalidConfig(
            "a network needs at least two nodes".into(),
        ));
    }
    let fits = (0..m)
        .into_par_iter()
        .map(|s| fit_node(s, data, cfg).map_err(|e| e.at_node(s)))
        .collect::<Vec<_>>();
    let fits = crate::error::in_order(fits)?;
    assemble(fits, cfg.lambda, rule)
}

pub(crate) fn assemble(
    fits: Vec<NodeFit>,
    lambda: f64,
    rule: SupportRule,
) -> Result<NetworkEstimate> {
    let m = fits.len();
    let mut sigma = DMatrix::zeros(m, m);
    let mut support = DMatrix::zeros(m, m);
    for s in 0..m {
        for t in s + 1..m {
            let a = fits[s].theta_hat.sigma_to(s, t);
            let b = fits[t].theta_hat.sigma_to(t, s);
            let keep = match rule {
                SupportRule::Or => a != 0.0 || b != 0.0,
                SupportRule::And => a != 0.0 && b != 0.0,
            };
            if keep {
                let v = 0.5 * (a + b);
                sigma[(s, t)] = v;
                sigma[(t, s)] = v;
                support[(s, t)] = 1;
                support[(t, s)] = 1;
            }
        }
    }
    let tau = fits.iter().map(|f| f.theta_hat.tau).collect();
    let alpha2 = Alpha2::PerNode(fits.iter().map(|f| f.theta_hat.alpha2).collect());
    let params = BCParameters::new(tau, sigma, alpha2)?;
    Ok(NetworkEstimate {
        params,
        node_fits: fits,
        lambda,
        rule,
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plfit::NodeParams;
    use crate::rng::rng_for;
    use rand::Rng;

    fn random_data(seed: u64, n: usize, m: usize) -> SampleMatrix {
        let mut rng = rng_for(seed, &[]);
        let data = (0..n * m).map(|_| rng.random_range(-1..=1)).collect();
        SampleMatrix::new(n, m, data).unwrap()
    }

    #[test]
    fn two_nodes_match_separate_fits() {
        let d = random_data(21, 200, 2);
        let cfg = FitConfig::with_lambda(0.01);
        let net = fit_network(&d, &cfg).unwrap();
        let a = fit_node(0, &d, &cfg).unwrap();
        let b = fit_node(1, &d, &cfg).unwrap();
        assert_eq!(net.node_fits[0], a);
        let expect = 0.5 * (a.theta_hat.sigma_row[0] + b.theta_hat.sigma_row[0]);
        assert_eq!(net.params.sigma()[(0, 1)], expect);
        assert_eq!(net.params.tau(), &[a.theta_hat.tau, b.theta_hat.tau]);
    }

    #[test]
    fn or_and_rules() {
        let fit = |node: usize, row: Vec<f64>| NodeFit {
            node,
            theta_hat: NodeParams {
                tau: 0.0,
                sigma_row: row,
                alpha2: 0.0,
            },
            objective: 0.0,
            loss: 0.0,
            gradient: nalgebra::DVector::zeros(4),
            hessian: DMatrix::zeros(4, 4),
            support: vec![],
            n_used: 10,
            iterations: 0,
            kkt_residual: 0.0,
            status: super::super::FitStatus::Converged,
        };
        let fits = vec![
            fit(0, vec![0.4, 0.0]),
            fit(1, vec![0.0, 0.0]),
            fit(2, vec![0.0, 0.0]),
        ];
        let or = assemble(fits.clone(), 0.1, SupportRule::Or).unwrap();
        assert_eq!(or.edges(), vec![(0, 1)]);
        assert_eq!(or.params.sigma()[(1, 0)], 0.2);
        let and = assemble(fits, 0.1, SupportRule::And).unwrap();
        assert!(and.edges().is_empty());
        assert_eq!(and.params.sigma()[(0, 1)], 0.0);
    }

    #[test]
    fn errors_carry_node_index() {
        let rows: Vec<Vec<i8>> = (0..40)
            .map(|i| vec![(i % 3) as i8 - 1, 1, ((i / 3) % 3) as i8 - 1])
            .collect();
        let d = SampleMatrix::from_rows(&rows).unwrap();
        match fit_network(&d, &FitConfig::with_lambda(0.1)) {
            Err(BcError::Degenerate { node: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn first_failing_node_is_reported_for_any_thread_count() {
        let rows: Vec<Vec<i8>> = (0..40)
            .map(|i| vec![(i % 3) as i8 - 1, 1, ((i / 3) % 3) as i8 - 1, 0, 1])
            .collect();
        let d = SampleMatrix::from_rows(&rows).unwrap();
        for threads in [1, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            for _ in 0..5 {
                match pool.install(|| fit_network(&d, &FitConfig::with_lambda(0.1))) {
                    Err(BcError::Degenerate { node: 1, .. }) => {}
                    other => panic!("{other:?}"),
                }
            }
        }
    }
}

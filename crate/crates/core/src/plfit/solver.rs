//! Minimization of `f(θ) + Σ_j w_j |θ_j|` for one node.
//!
//! Proximal-gradient steps with backtracking (soft-thresholding the
//! penalized coordinates) locate the support; Newton steps on the smooth
//! problem restricted to the current support, with the signs of the
//! penalized coordinates held fixed, then polish the solution. A Newton step
//! that would flip a sign clamps that coordinate to zero. The two phases
//! alternate until the KKT residual is below tolerance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BcError, Result};
use crate::sampler::SampleMatrix;

use super::{row_node, FitConfig, NodeObjective, NodeParams};

const PROX_STEPS: usize = 200;
const NEWTON_STEPS: usize = 50;
const ARMIJO: f64 = 1e-4;
const STEP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    /// `max_iter` reached before the KKT residual fell below tolerance;
    /// the returned parameters are the last iterate.
    MaxIterReached,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeFit {
    pub node: usize,
    pub theta_hat: NodeParams,
    /// Penalized objective at `theta_hat`.
    pub objective: f64,
    /// Unpenalized objective at `theta_hat`.
    pub loss: f64,
    /// Gradient of the unpenalized objective at `theta_hat`.
    pub gradient: DVector<f64>,
    /// Hessian of the unpenalized objective at `theta_hat`.
    pub hessian: DMatrix<f64>,
    /// Network nodes `t` with `σ̂_st ≠ 0`.
    pub support: Vec<usize>,
    pub n_used: usize,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub status: FitStatus,
}

impl NodeFit {
    pub fn theta_vector(&self) -> DVector<f64> {
        self.theta_hat.to_vector()
    }

    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn penalty(theta: &DVector<f64>, w: &DVector<f64>) -> f64 {
    theta.iter().zip(w.iter()).map(|(t, w)| w * t.abs()).sum()
}

/// Largest violation of the optimality conditions.
pub(crate) fn kkt_residual(theta: &DVector<f64>, grad: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let mut r: f64 = 0.0;
    for j in 0..theta.len() {
        let v = if w[j] == 0.0 {
            grad[j].abs()
        } else if theta[j] != 0.0 {
            (grad[j] + w[j] * theta[j].signum()).abs()
        } else {
            (grad[j].abs() - w[j]).max(0.0)
        };
        r = r.max(v);
    }
    r
}

struct Solver<'a> {
    obj: &'a NodeObjective,
    w: DVector<f64>,
    limit: f64,
    iterations: usize,
    step: f64,
}

impl Solver<'_> {
    fn total(&self, theta: &DVector<f64>) -> f64 {
        self.obj.value_unchecked(theta) + penalty(theta, &self.w)
    }

    fn guard(&self, theta: &DVector<f64>) -> Result<()> {
        if let Some(j) = theta
            .iter()
            .position(|v| !v.is_finite() || v.abs() > self.limit)
        {
            return Err(BcError::Degenerate {
                node: self.obj.node(),
                coord: j,
                limit: self.limit,
            });
        }
        Ok(())
    }

    /// One proximal-gradient step with backtracking on the step length.
    /// Returns the new iterate and its smooth value.
    fn prox_step(
        &mut self,
        theta: &DVector<f64>,
        f: f64,
        grad: &DVector<f64>,
    ) -> (DVector<f64>, f64) {
        let mut step = self.step;
        for _ in 0..60 {
            let cand = DVector::from_fn(theta.len(), |j, _| {
                soft_threshold(theta[j] - step * grad[j], step * self.w[j])
            });
            let diff = &cand - theta;
            let fc = self.obj.value_unchecked(&cand);
            if fc <= f + grad.dot(&diff) + diff.norm_squared() / (2.0 * step) + 1e-15 * f.abs() {
                self.step = (step * 2.0).min(1e6);
                return (cand, fc);
            }
            step *= 0.5;
        }
        self.step = step;
        (theta.clone(), f)
    }

    /// Newton iterations on the current support with fixed signs. Returns
    /// true once the Newton step itself is negligible. A small gradient alone
    /// is not enough: on separable data the gradient vanishes exponentially
    /// while the Newton step stays of order one.
    fn newton_polish(&mut self, theta: &mut DVector<f64>, max_iter: usize) -> Result<bool> {
        let dim = theta.len();
        for _ in 0..NEWTON_STEPS {
            if self.iterations >= max_iter {
                break;
            }
            let active: Vec<usize> = (0..dim)
                .filter(|&j| self.w[j] == 0.0 || theta[j] != 0.0)
                .collect();
            if active.is_empty() {
                return Ok(true);
            }
            let (f, grad) = self.obj.value_and_gradient(theta);
            let ga = DVector::from_iterator(
                active.len(),
                active
                    .iter()
                    .map(|&j| grad[j] + self.w[j] * theta[j].signum()),
            );
            let h = self.obj.hessian(theta)?;
            let ha = DMatrix::from_fn(active.len(), active.len(), |a, b| h[(active[a], active[b])]);
            let Some(dir) = solve_psd(&ha, &(-&ga)) else {
                return Ok(true);
            };
            if dir.amax() < STEP_TOL {
                return Ok(true);
            }
            let slope = ga.dot(&dir);
            if slope >= 0.0 {
                return Ok(true);
            }
            let base = f + penalty(theta, &self.w);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut cand = theta.clone();
                for (a, &j) in active.iter().enumerate() {
                    let v = theta[j] + t * dir[a];
                    cand[j] = if self.w[j] != 0.0 && v * theta[j] <= 0.0 {
                        0.0
                    } else {
                        v
                    };
                }
                if cand == *theta {
                    // step below floating-point resolution
                    return Ok(true);
                }
                let fc = self.total(&cand);
                if fc <= base + ARMIJO * t * slope {
                    accepted = Some(cand);
                    break;
                }
                t *= 0.5;
            }
            self.iterations += 1;
            match accepted {
                Some(c) => {
                    self.guard(&c)?;
                    *theta = c;
                }
                // no decrease representable in floating point
                None => return Ok(true),
            }
        }
        Ok(false)
    }
}

/// Minimum-norm solution of `A x = b` for symmetric positive semidefinite
/// `A`. Eigen-directions with eigenvalue below `1e-10` times the largest are
/// dropped, so flat directions of the objective receive no step.
pub(crate) fn solve_psd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    if !(top > 0.0 && top.is_finite()) {
        return None;
    }
    let proj = eig.eigenvectors.tr_mul(b);
    let scaled = DVector::from_fn(proj.len(), |k, _| {
        let l = eig.eigenvalues[k];
        if l > 1e-10 * top {
            proj[k] / l
        } else {
            0.0
        }
    });
    Some(&eig.eigenvectors * scaled)
}

/// Lasso pseudo-likelihood fit of node `s`.
pub fn fit_node(s: usize, data: &SampleMatrix, cfg: &FitConfig) -> Result<NodeFit> {
    cfg.validate()?;
    if data.n() < 2 {
        return Err(BcError::InvalidConfig(
            "at least two observations are required".into(),
        ));
    }
    let obj = NodeObjective::new(s, data)?;
    fit_objective(&obj, cfg)
}

pub(crate) fn fit_objective(obj: &NodeObjective, cfg: &FitConfig) -> Result<NodeFit> {
    let dim = obj.dim();
    let w = cfg.penalty_weights(dim);
    let mut theta = match &cfg.init {
        Some(p) if p.dim() == dim => p.to_vector(),
        Some(p) => {
            return Err(BcError::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            })
        }
        None => DVector::zeros(dim),
    };
    let mut solver = Solver {
        obj,
        w: w.clone(),
        limit: cfg.divergence_limit,
        iterations: 0,
        step: 1.0,
    };

    let mut status = FitStatus::MaxIterReached;
    while solver.iterations < cfg.max_iter {
        // proximal-gradient phase
        let (mut f, mut grad) = obj.value_and_gradient(&theta);
        let mut total = f + penalty(&theta, &w);
        for _ in 0..PROX_STEPS {
            if kkt_residual(&theta, &grad, &w) < cfg.tol || solver.iterations >= cfg.max_iter {
                break;
            }
            let (next, fnext) = solver.prox_step(&theta, f, &grad);
            solver.iterations += 1;
            solver.guard(&next)?;
            let next_total = fnext + penalty(&next, &w);
            let rel = (total - next_total).abs() / total.abs().max(1.0);
            theta = next;
            f = fnext;
            grad = obj.value_and_gradient(&theta).1;
            total = next_total;
            if rel < cfg.obj_tol {
                break;
            }
        }
        let settled = solver.newton_polish(&mut theta, cfg.max_iter)?;
        let grad = obj.gradient(&theta)?;
        if settled && kkt_residual(&theta, &grad, &w) < cfg.tol {
            status = FitStatus::Converged;
            break;
        }
    }

    let (loss, gradient) = obj.value_and_gradient(&theta);
    let hessian = obj.hessian(&theta)?;
    let kkt = kkt_residual(&theta, &gradient, &w);
    let node = obj.node();
    let theta_hat = NodeParams::from_vector(&theta)?;
    let support = theta_hat
        .sigma_row
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, _)| row_node(node, k))
        .collect();
    Ok(NodeFit {
        node,
        objective: loss + penalty(&theta, &w),
        theta_hat,
        loss,
        gradient,
        hessian,
        support,
        n_used: obj.n(),
        iterations: solver.iterations,
        kkt_residual: kkt,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_data(seed: u64, n: usize, m: usize) -> SampleMatrix {
        let mut rng = rng_for(seed, &[]);
        let data = (0..n * m).map(|_| rng.random_range(-1..=1)).collect();
        SampleMatrix::new(n, m, data).unwrap()
    }

    #[test]
    fn full_shrinkage_fits_marginal_frequencies() {
        let d = random_data(11, 300, 4);
        let fit = fit_node(1, &d, &FitConfig::with_lambda(1e3)).unwrap();
        assert!(fit.converged());
        assert!(fit.theta_hat.sigma_row.iter().all(|v| *v == 0.0));
        assert!(fit.support.is_empty());
        let col: Vec<i8> = d.column(1).collect();
        let cnt = |v: i8| col.iter().filter(|&&x| x == v).count() as f64;
        let (np, nm, n0) = (cnt(1), cnt(-1), cnt(0));
        // with σ = 0: P(+)/P(-) = e^{2τ}, P(+)P(-)/P(0)² = e^{-2α²}
        assert_relative_eq!(fit.theta_hat.tau, 0.5 * (np / nm).ln(), epsilon = 1e-6);
        assert_relative_eq!(
            fit.theta_hat.alpha2,
            -0.5 * (np * nm / (n0 * n0)).ln(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn kkt_conditions_hold() {
        let d = random_data(12, 200, 6);
        for lambda in [0.0, 0.02, 0.08, 0.3] {
            let cfg = FitConfig::with_lambda(lambda);
            let fit = fit_node(2, &d, &cfg).unwrap();
            assert!(fit.converged(), "lambda {lambda}");
            let th = fit.theta_vector();
            let w = cfg.penalty_weights(th.len());
            assert!(kkt_residual(&th, &fit.gradient, &w) < 1e-6);
            for j in 0..th.len() {
                if w[j] > 0.0 && th[j] == 0.0 {
                    assert!(fit.gradient[j].abs() <= lambda + 1e-6);
                }
            }
        }
    }

    #[test]
    fn unpenalized_minimizer_is_stationary() {
        let d = random_data(13, 150, 3);
        let fit = fit_node(0, &d, &FitConfig::default()).unwrap();
        assert!(fit.gradient.amax() < 1e-6);
    }

    #[test]
    fn constant_column_diverges() {
        let rows: Vec<Vec<i8>> = (0..30)
            .map(|i| vec![1, (i % 3) as i8 - 1, ((i / 3) % 3) as i8 - 1])
            .collect();
        let d = SampleMatrix::from_rows(&rows).unwrap();
        let err = fit_node(0, &d, &FitConfig::with_lambda(0.1)).unwrap_err();
        assert!(
            matches!(err, BcError::Degenerate { node: 0, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn too_few_observations() {
        let d = random_data(14, 1, 3);
        assert!(fit_node(0, &d, &FitConfig::default()).is_err());
    }

    #[test]
    fn max_iter_is_reported() {
        let d = random_data(15, 100, 5);
        let cfg = FitConfig {
            max_iter: 2,
            lambda: 0.05,
            ..FitConfig::default()
        };
        let fit = fit_node(0, &d, &cfg).unwrap();
        assert_eq!(fit.status, FitStatus::MaxIterReached);
    }
}

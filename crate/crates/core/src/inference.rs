//! Desparsified node estimates, sandwich variances from a shrunk Hessian,
//! and normal confidence intervals.
//!
//! For a node fit with lasso estimate `θ̂`, unpenalized gradient `g` and
//! Hessian `H`:
//!
//! ```text
//! Σ   = ρμI + (1 − ρ)H
//! θ_d = θ̂ − Σ⁻¹ g
//! Γ   = Σ⁻¹ M Σ⁻¹,  M = (1/n) Σ_i g_i g_iᵀ
//! CI  = θ_d ± z √(Γ_kk / n)
//! ```
//!
//! The Fisher-only variance `diag(Σ⁻¹)` is reported alongside.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{BcError, Result};
use crate::plfit::{row_index, NetworkEstimate, NodeFit, NodeObjective, NodeParams};
use crate::sampler::SampleMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageConfig {
    pub rho: f64,
    /// Scale of the diagonal target; `None` uses the mean of `diag(H)`.
    pub target_mu: Option<f64>,
}

impl ShrinkageConfig {
    pub fn new(rho: f64) -> Result<Self> {
        let c = Self {
            rho,
            target_mu: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(BcError::InvalidConfig(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// `ρμI + (1 − ρ)H`.
pub fn shrink_hessian(h: &DMatrix<f64>, cfg: &ShrinkageConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    if !h.is_square() {
        return Err(BcError::DimensionMismatch {
            expected: h.nrows(),
            got: h.ncols(),
        });
    }
    let k = h.nrows();
    let mu = match cfg.target_mu {
        Some(mu) => mu,
        None => {
            let mu = h.diagonal().mean();
            if cfg.rho > 0.0 && mu <= 0.0 {
                return Err(BcError::InvalidConfig(format!(
                    "shrinkage target mean(diag H) = {mu} is not positive"
                )));
            }
            mu
        }
    };
    let mut s = h * (1.0 - cfg.rho);
    for j in 0..k {
        s[(j, j)] += cfg.rho * mu;
    }
    Ok(s)
}

/// `n^(−5/4)`.
pub fn default_rho(n: usize) -> f64 {
    assert!(n >= 1, "default_rho needs n >= 1");
    (n as f64).powf(-1.25)
}

/// Inverse of a symmetric positive definite matrix.
pub fn invert_spd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ch = s.clone().cholesky().ok_or(BcError::Singular)?;
    let inv = ch.inverse();
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(BcError::Singular)
    }
}

/// `θ̂ − Σ⁻¹ g` with `g` the unpenalized gradient at `θ̂`.
pub fn desparsify(
    theta_hat: &NodeParams,
    grad: &DVector<f64>,
    sigma_inv: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let k = theta_hat.dim();
    if grad.len() != k {
        return Err(BcError::DimensionMismatch {
            expected: k,
            got: grad.len(),
        });
    }
    if sigma_inv.shape() != (k, k) {
        return Err(BcError::DimensionMismatch {
            expected: k,
            got: sigma_inv.nrows(),
        });
    }
    Ok(theta_hat.to_vector() - sigma_inv * grad)
}

/// Middle matrix of the sandwich.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MiddleMatrix {
    /// `(1/n) Σ g_i g_iᵀ`.
    #[default]
    Full,
    /// Diagonal of the full form only.
    Diagonal,
}

/// Gradient outer-product matrix from an `n × k` matrix of per-observation
/// gradients.
pub fn middle_matrix(per_obs_grads: &DMatrix<f64>, mode: MiddleMatrix) -> Result<DMatrix<f64>> {
    let n = per_obs_grads.nrows();
    if n == 0 {
        return Err(BcError::EmptySample);
    }
    let mut m = per_obs_grads.tr_mul(per_obs_grads) / n as f64;
    if mode == MiddleMatrix::Diagonal {
        m = DMatrix::from_diagonal(&m.diagonal());
    }
    Ok(m)
}

/// `diag(Σ⁻¹ M Σ⁻¹)`.
pub fn sandwich_variance(
    per_obs_grads: &DMatrix<f64>,
    sigma_inv: &DMatrix<f64>,
    mode: MiddleMatrix,
) -> Result<DVector<f64>> {
    let k = sigma_inv.nrows();
    if per_obs_grads.ncols() != k {
        return Err(BcError::DimensionMismatch {
            expected: k,
            got: per_obs_grads.ncols(),
        });
    }
    let m = middle_matrix(per_obs_grads, mode)?;
    let a = sigma_inv * m;
    Ok(DVector::from_fn(k, |j, _| {
        a.row(j).dot(&sigma_inv.column(j).transpose())
    }))
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(BcError::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let z = Normal::standard().inverse_cdf(0.5 * (1.0 + level));
    Ok(z)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InferenceResult {
    pub theta_d: Vec<f64>,
    pub var_sandwich: Vec<f64>,
    /// `diag(Σ⁻¹)`; absent when the result was built from `Γ` alone.
    pub var_fisher: Option<Vec<f64>>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub level: f64,
    pub n: usize,
}

impl InferenceResult {
    pub fn se(&self) -> Vec<f64> {
        self.var_sandwich
            .iter()
            .map(|v| (v / self.n as f64).sqrt())
            .collect()
    }

    pub fn fisher_se(&self) -> Option<Vec<f64>> {
        self.var_fisher
            .as_ref()
            .map(|f| f.iter().map(|v| (v / self.n as f64).sqrt()).collect())
    }

    /// Intervals built from the Fisher-only variance.
    pub fn fisher_intervals(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let z = normal_quantile(self.level).ok()?;
        let se = self.fisher_se()?;
        let lo = self
            .theta_d
            .iter()
            .zip(&se)
            .map(|(t, s)| t - z * s)
            .collect();
        let hi = self
            .theta_d
            .iter()
            .zip(&se)
            .map(|(t, s)| t + z * s)
            .collect();
        Some((lo, hi))
    }
}

/// `θ_d ± z √(Γ_kk / n)`.
pub fn confidence_intervals(
    theta_d: &DVector<f64>,
    gamma: &DVector<f64>,
    n: usize,
    level: f64,
) -> Result<InferenceResult> {
    if theta_d.len() != gamma.len() {
        return Err(BcError::DimensionMismatch {
            expected: theta_d.len(),
            got: gamma.len(),
        });
    }
    if n == 0 {
        return Err(BcError::EmptySample);
    }
    if let Some(v) = gamma.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(BcError::InvalidParameters(format!(
            "variance {v} is not positive and finite"
        )));
    }
    let z = normal_quantile(level)?;
    let half: Vec<f64> = gamma.iter().map(|g| z * (g / n as f64).sqrt()).collect();
    Ok(InferenceResult {
        theta_d: theta_d.iter().copied().collect(),
        var_sandwich: gamma.iter().copied().collect(),
        var_fisher: None,
        ci_lower: theta_d.iter().zip(&half).map(|(t, h)| t - h).collect(),
        ci_upper: theta_d.iter().zip(&half).map(|(t, h)| t + h).collect(),
        level,
        n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    /// `None` uses `default_rho(n)`.
    pub rho: Option<f64>,
    pub target_mu: Option<f64>,
    pub middle: MiddleMatrix,
    pub level: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            rho: None,
            target_mu: None,
            middle: MiddleMatrix::Full,
            level: 0.95,
        }
    }
}

impl InferenceConfig {
    pub fn shrinkage(&self, n: usize) -> ShrinkageConfig {
        ShrinkageConfig {
            rho: self.rho.unwrap_or_else(|| default_rho(n.max(1))),
            target_mu: self.target_mu,
        }
    }
}

/// Inference for one node fit on the data it was fitted to.
pub fn infer_node(
    fit: &NodeFit,
    data: &SampleMatrix,
    cfg: &InferenceConfig,
) -> Result<InferenceResult> {
    let obj = NodeObjective::new(fit.node, data)?;
    let theta = fit.theta_vector();
    let sigma = shrink_hessian(&fit.hessian, &cfg.shrinkage(obj.n()))?;
    let sigma_inv = invert_spd(&sigma)?;
    let theta_d = desparsify(&fit.theta_hat, &fit.gradient, &sigma_inv)?;
    let grads = obj.per_observation_gradients(&theta)?;
    let gamma = sandwich_variance(&grads, &sigma_inv, cfg.middle)?;
    let mut res = confidence_intervals(&theta_d, &gamma, obj.n(), cfg.level)?;
    res.var_fisher = Some(sigma_inv.diagonal().iter().copied().collect());
    Ok(res)
}

/// Interval for one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamInterval {
    pub estimate: f64,
    pub desparsified: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    pub fisher_se: f64,
    pub fisher_lower: f64,
    pub fisher_upper: f64,
}

impl ParamInterval {
    pub fn covers(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn fisher_covers(&self, v: f64) -> bool {
        self.fisher_lower <= v && v <= self.fisher_upper
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdgeInterval {
    pub s: usize,
    pub t: usize,
    pub selected: bool,
    #[serde(flatten)]
    pub interval: ParamInterval,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeIntervals {
    pub s: usize,
    pub tau: ParamInterval,
    pub alpha2: ParamInterval,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkInference {
    pub level: f64,
    pub rho: f64,
    pub per_node: Vec<InferenceResult>,
    pub nodes: Vec<NodeIntervals>,
    /// Every pair `s < t`, selected or not.
    pub edges: Vec<EdgeInterval>,
}

impl NetworkInference {
    pub fn edge(&self, s: usize, t: usize) -> Option<&EdgeInterval> {
        let (a, b) = if s < t { (s, t) } else { (t, s) };
        self.edges.iter().find(|e| e.s == a && e.t == b)
    }
}

fn param_interval(r: &InferenceResult, k: usize, estimate: f64, z: f64) -> ParamInterval {
    let se = (r.var_sandwich[k] / r.n as f64).sqrt();
    let fse = r
        .var_fisher
        .as_ref()
        .map_or(f64::NAN, |f| (f[k] / r.n as f64).sqrt());
    let d = r.theta_d[k];
    ParamInterval {
        estimate,
        desparsified: d,
        se,
        lower: r.ci_lower[k],
        upper: r.ci_upper[k],
        fisher_se: fse,
        fisher_lower: d - z * fse,
        fisher_upper: d + z * fse,
    }
}

/// Per-node inference plus edge intervals. The edge centre is the mean of
/// the two directional desparsified values; its standard error is the mean
/// of the two directional standard errors, an upper bound on the standard
/// error of the mean whatever the correlation between directions.
pub fn infer_network(
    est: &NetworkEstimate,
    data: &SampleMatrix,
    cfg: &InferenceConfig,
) -> Result<NetworkInference> {
    let m = est.m();
    let z = normal_quantile(cfg.level)?;
    let per_node = est
        .node_fits
        .par_iter()
        .map(|f| infer_node(f, data, cfg).map_err(|e| e.at_node(f.node)))
        .collect::<Vec<_>>();
    let per_node = crate::error::in_order(per_node)?;
    let nodes = est
        .node_fits
        .iter()
        .zip(&per_node)
        .map(|(f, r)| NodeIntervals {
            s: f.node,
            tau: param_interval(r, 0, f.theta_hat.tau, z),
            alpha2: param_interval(r, m, f.theta_hat.alpha2, z),
        })
        .collect();
    let mut edges = Vec::with_capacity(m * (m - 1) / 2);
    for s in 0..m {
        for t in s + 1..m {
            let a = param_interval(
                &per_node[s],
                1 + row_index(s, t),
                est.node_fits[s].theta_hat.sigma_to(s, t),
                z,
            );
            let b = param_interval(
                &per_node[t],
                1 + row_index(t, s),
                est.node_fits[t].theta_hat.sigma_to(t, s),
                z,
            );
            let centre = 0.5 * (a.desparsified + b.desparsified);
            let se = 0.5 * (a.se + b.se);
            let fse = 0.5 * (a.fisher_se + b.fisher_se);
            edges.push(EdgeInterval {
                s,
                t,
                selected: est.support[(s, t)] != 0,
                interval: ParamInterval {
                    estimate: est.params.sigma()[(s, t)],
                    desparsified: centre,
                    se,
                    lower: centre - z * se,
                    upper: centre + z * se,
                    fisher_se: fse,
                    fisher_lower: centre - z * fse,
                    fisher_upper: centre + z * fse,
                },
            });
        }
    }
    let rho = cfg.shrinkage(data.n()).rho;
    Ok(NetworkInference {
        level: cfg.level,
        rho,
        per_node,
        nodes,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plfit::{fit_node, FitConfig};
    use crate::rng::rng_for;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_spd(seed: u64, k: usize) -> DMatrix<f64> {
        let mut rng = rng_for(seed, &[]);
        let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(k, k) * 0.1
    }

    fn random_data(seed: u64, n: usize, m: usize) -> SampleMatrix {
        let mut rng = rng_for(seed, &[]);
        let data = (0..n * m).map(|_| rng.random_range(-1..=1)).collect();
        SampleMatrix::new(n, m, data).unwrap()
    }

    #[test]
    fn shrinkage_endpoints_and_spectrum() {
        let h = random_spd(1, 5);
        let mu = h.diagonal().mean();
        assert_eq!(
            shrink_hessian(&h, &ShrinkageConfig::new(0.0).unwrap()).unwrap(),
            h
        );
        let s1 = shrink_hessian(&h, &ShrinkageConfig::new(1.0).unwrap()).unwrap();
        assert!((s1 - DMatrix::identity(5, 5) * mu).amax() < 1e-15);
        let rho = 0.3;
        let s = shrink_hessian(&h, &ShrinkageConfig::new(rho).unwrap()).unwrap();
        let mut got: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        let mut want: Vec<f64> = h
            .symmetric_eigenvalues()
            .iter()
            .map(|d| rho * mu + (1.0 - rho) * d)
            .collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert_relative_eq!(g, w, epsilon = 1e-12);
        }
        assert_eq!(s, s.transpose());
        assert!(ShrinkageConfig::new(1.5).is_err());
    }

    #[test]
    fn nonpositive_target_is_reported() {
        let h = DMatrix::from_diagonal_element(3, 3, -1.0);
        assert!(shrink_hessian(
            &h,
            &ShrinkageConfig {
                rho: 0.5,
                target_mu: None
            }
        )
        .is_err());
    }

    #[test]
    fn default_rho_values() {
        assert_relative_eq!(default_rho(100), 0.003_162_277_66, epsilon = 1e-11);
        assert_eq!(default_rho(1), 1.0);
        assert_relative_eq!(default_rho(10_000), 1e-5, epsilon = 1e-18);
    }

    #[test]
    fn sandwich_matches_matrix_products() {
        let mut rng = rng_for(2, &[]);
        let g = DMatrix::from_fn(40, 5, |_, _| rng.random_range(-1.0..1.0));
        let sigma_inv = invert_spd(&random_spd(3, 5)).unwrap();
        let m = g.transpose() * &g / 40.0;
        let full = &sigma_inv * m * sigma_inv.transpose();
        let got = sandwich_variance(&g, &sigma_inv, MiddleMatrix::Full).unwrap();
        for j in 0..5 {
            assert_relative_eq!(got[j], full[(j, j)], epsilon = 1e-10);
        }
        // reordering observations changes nothing
        let rev = DMatrix::from_fn(40, 5, |i, j| g[(39 - i, j)]);
        let got2 = sandwich_variance(&rev, &sigma_inv, MiddleMatrix::Full).unwrap();
        assert!((got - got2).amax() < 1e-14);
    }

    #[test]
    fn sandwich_collapses_when_middle_equals_sigma() {
        let mut rng = rng_for(4, &[]);
        let g = DMatrix::from_fn(60, 4, |_, _| rng.random_range(-1.0..1.0));
        let sigma = g.transpose() * &g / 60.0;
        let sigma_inv = invert_spd(&sigma).unwrap();
        let got = sandwich_variance(&g, &sigma_inv, MiddleMatrix::Full).unwrap();
        for j in 0..4 {
            assert_relative_eq!(got[j], sigma_inv[(j, j)], max_relative = 1e-10);
        }
    }

    #[test]
    fn interval_arithmetic() {
        assert_relative_eq!(normal_quantile(0.95).unwrap(), 1.959_964, epsilon = 1e-6);
        let r = confidence_intervals(
            &DVector::zeros(1),
            &DVector::from_element(1, 1.0),
            100,
            0.95,
        )
        .unwrap();
        assert_relative_eq!(r.ci_lower[0], -0.196, epsilon = 1e-4);
        assert_relative_eq!(r.ci_upper[0], 0.196, epsilon = 1e-4);
        let w = |n| {
            let r =
                confidence_intervals(&DVector::zeros(1), &DVector::from_element(1, 2.0), n, 0.9)
                    .unwrap();
            r.ci_upper[0] - r.ci_lower[0]
        };
        assert_relative_eq!(w(100), 2.0 * w(400), epsilon = 1e-14);
        assert!(normal_quantile(1.0).is_err());
        assert!(confidence_intervals(&DVector::zeros(1), &DVector::zeros(1), 10, 0.95).is_err());
    }

    #[test]
    fn desparsify_is_a_newton_step() {
        let d = random_data(5, 150, 4);
        let fit = fit_node(1, &d, &FitConfig::with_lambda(0.08)).unwrap();
        let sigma_inv = invert_spd(&fit.hessian).unwrap();
        let td = desparsify(&fit.theta_hat, &fit.gradient, &sigma_inv).unwrap();
        // explicit Newton step on the unpenalized objective
        let step = fit.hessian.clone().lu().solve(&fit.gradient).unwrap();
        let oracle = fit.theta_vector() - step;
        assert!((td - oracle).amax() < 1e-9);
    }

    #[test]
    fn unpenalized_fit_is_its_own_desparsification() {
        let d = random_data(6, 200, 3);
        let fit = fit_node(0, &d, &FitConfig::default()).unwrap();
        let r = infer_node(&fit, &d, &InferenceConfig::default()).unwrap();
        for (a, b) in r.theta_d.iter().zip(fit.theta_vector().iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-6);
        }
        assert!(r.var_sandwich.iter().all(|v| *v > 0.0));
        assert!(r.ci_lower.iter().zip(&r.ci_upper).all(|(l, u)| l < u));
    }
}

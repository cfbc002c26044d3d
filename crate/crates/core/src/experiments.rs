//! Simulation harness: random networks, Gibbs data, lasso recovery metrics
//! and interval coverage; subsample stability of a network estimate.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BcError, Result};
use crate::inference::{default_rho, infer_network, InferenceConfig, NetworkInference};
use crate::model::{BCParameters, InverseTemperature};
use crate::plfit::{default_lambda, fit_network_with, FitConfig, NetworkEstimate, SupportRule};
use crate::rng::{derive_seed, rng_for};
use crate::sampler::{sample, GibbsConfig, SampleMatrix, ScanOrder};

/// Symmetric 0/1 adjacency with zero diagonal; each pair `s < t` is an edge
/// independently with probability `p_e`.
pub fn erdos_renyi(m: usize, p_e: f64, seed: u64) -> Result<DMatrix<u8>> {
    if m < 2 {
        return Err(BcError::InvalidConfig(format!(
            "a random graph needs m >= 2, got {m}"
        )));
    }
    if !(0.0..=1.0).contains(&p_e) {
        return Err(BcError::InvalidConfig(format!(
            "edge probability must lie in [0, 1], got {p_e}"
        )));
    }
    let mut rng = rng_for(seed, &[]);
    let mut a = DMatrix::zeros(m, m);
    for s in 0..m {
        for t in s + 1..m {
            if rng.random::<f64>() < p_e {
                a[(s, t)] = 1;
                a[(t, s)] = 1;
            }
        }
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m_list: Vec<usize>,
    pub p_e: f64,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub tau0: f64,
    pub sigma0: f64,
    pub alpha2_0: f64,
    pub beta: f64,
    /// Gibbs sweeps per observation; each observation is its own chain.
    pub sweeps: usize,
    pub scan: ScanOrder,
    pub penalize_tau: bool,
    pub penalize_alpha2: bool,
    pub support_rule: SupportRule,
    pub inference: InferenceConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m_list: vec![10, 20, 30],
            p_e: 0.3,
            n_grid: (50..=260).step_by(30).collect(),
            reps: 100,
            tau0: 1.2,
            sigma0: 1.0,
            alpha2_0: 1.2,
            beta: 2.0,
            sweeps: 2000,
            scan: ScanOrder::Sequential,
            penalize_tau: false,
            penalize_alpha2: false,
            support_rule: SupportRule::Or,
            inference: InferenceConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BcError::InvalidConfig(msg));
        if self.m_list.is_empty() || self.m_list.iter().any(|&m| m < 2) {
            return bad("m_list must be nonempty with every m >= 2".into());
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 2) {
            return bad("n_grid must be nonempty with every n >= 2".into());
        }
        if !(0.0..=1.0).contains(&self.p_e) {
            return bad(format!("p_e must lie in [0, 1], got {}", self.p_e));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1".into());
        }
        for (name, v) in [
            ("tau0", self.tau0),
            ("sigma0", self.sigma0),
            ("alpha2_0", self.alpha2_0),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        InverseTemperature::new(self.beta)?;
        if !(self.inference.level > 0.0 && self.inference.level < 1.0) {
            return bad("inference.level must lie in (0, 1)".into());
        }
        Ok(())
    }

    fn fit_config(&self, m: usize, n: usize) -> FitConfig {
        FitConfig {
            lambda: default_lambda(m, n),
            penalize_tau: self.penalize_tau,
            penalize_alpha2: self.penalize_alpha2,
            ..FitConfig::default()
        }
    }

    fn gibbs_config(&self, seed: u64) -> Result<GibbsConfig> {
        Ok(GibbsConfig {
            n_iter: self.sweeps + 1,
            burn_in: self.sweeps,
            thinning: 1,
            seed,
            beta: InverseTemperature::new(self.beta)?,
            scan: self.scan,
        })
    }
}

/// Metrics of one fitted network against the truth. Error and standard
/// error fields are means over the parameters of each class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryMetrics {
    pub true_edges: usize,
    pub true_positives: usize,
    pub false_pairs: usize,
    pub false_positives: usize,
    /// Absent when the graph has no edges.
    pub tpr: Option<f64>,
    /// Absent when the graph is complete.
    pub fpr: Option<f64>,
    /// Over nonzero true `σ`.
    pub covered_sandwich: usize,
    pub covered_fisher: usize,
    /// Over all pairs.
    pub covered_all_sigma: usize,
    pub covered_tau: usize,
    pub covered_alpha2: usize,
    pub m: usize,
    pub error_sigma: Option<f64>,
    pub error_tau: f64,
    pub error_alpha2: f64,
    pub se_sigma: Option<f64>,
    pub se_fisher_sigma: Option<f64>,
    pub se_tau: f64,
    pub se_alpha2: f64,
}

impl RecoveryMetrics {
    pub fn coverage(&self) -> Option<f64> {
        (self.true_edges > 0).then(|| self.covered_sandwich as f64 / self.true_edges as f64)
    }

    pub fn coverage_fisher(&self) -> Option<f64> {
        (self.true_edges > 0).then(|| self.covered_fisher as f64 / self.true_edges as f64)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Compare an estimate and its intervals with `truth` (on the estimation
/// scale, i.e. already multiplied by `β`). Selection uses the estimate's
/// support; pairs are counted once.
pub fn recovery_metrics(
    est: &NetworkEstimate,
    truth: &BCParameters,
    inf: &NetworkInference,
) -> Result<RecoveryMetrics> {
    let m = truth.m();
    if est.m() != m || inf.nodes.len() != m {
        return Err(BcError::DimensionMismatch {
            expected: m,
            got: est.m(),
        });
    }
    let (mut te, mut tp, mut fp, mut fpairs) = (0, 0, 0, 0);
    let (mut cs, mut cf, mut call) = (0, 0, 0);
    let (mut err_s, mut se_s, mut fse_s) = (Vec::new(), Vec::new(), Vec::new());
    for e in &inf.edges {
        let v = truth.sigma()[(e.s, e.t)];
        let selected = est.support[(e.s, e.t)] != 0;
        if e.interval.covers(v) {
            call += 1;
        }
        if v != 0.0 {
            te += 1;
            tp += usize::from(selected);
            cs += usize::from(e.interval.covers(v));
            cf += usize::from(e.interval.fisher_covers(v));
            err_s.push(e.interval.estimate - v);
            se_s.push(e.interval.se);
            fse_s.push(e.interval.fisher_se);
        } else {
            fpairs += 1;
            fp += usize::from(selected);
        }
    }
    let tau_t = truth.tau();
    let a2_t = truth.alpha2_vec();
    Ok(RecoveryMetrics {
        true_edges: te,
        true_positives: tp,
        false_pairs: fpairs,
        false_positives: fp,
        tpr: (te > 0).then(|| tp as f64 / te as f64),
        fpr: (fpairs > 0).then(|| fp as f64 / fpairs as f64),
        covered_sandwich: cs,
        covered_fisher: cf,
        covered_all_sigma: call,
        covered_tau: inf
            .nodes
            .iter()
            .filter(|n| n.tau.covers(tau_t[n.s]))
            .count(),
        covered_alpha2: inf
            .nodes
            .iter()
            .filter(|n| n.alpha2.covers(a2_t[n.s]))
            .count(),
        m,
        error_sigma: mean(err_s.into_iter()),
        error_tau: mean(inf.nodes.iter().map(|n| n.tau.estimate - tau_t[n.s])).unwrap_or(0.0),
        error_alpha2: mean(inf.nodes.iter().map(|n| n.alpha2.estimate - a2_t[n.s])).unwrap_or(0.0),
        se_sigma: mean(se_s.into_iter()),
        se_fisher_sigma: mean(fse_s.into_iter()),
        se_tau: mean(inf.nodes.iter().map(|n| n.tau.se)).unwrap_or(0.0),
        se_alpha2: mean(inf.nodes.iter().map(|n| n.alpha2.se)).unwrap_or(0.0),
    })
}

/// One replication: graph, data, fit, inference, metrics.
pub fn run_replication(
    cfg: &ExperimentConfig,
    m: usize,
    n: usize,
    rep: usize,
) -> Result<RecoveryMetrics> {
    let base = derive_seed(cfg.seed, &[m as u64, n as u64, rep as u64]);
    let graph = erdos_renyi(m, cfg.p_e, derive_seed(base, &[0]))?;
    let truth = BCParameters::homogeneous(&graph, cfg.tau0, cfg.sigma0, cfg.alpha2_0)?;
    let data = sample(&truth, &cfg.gibbs_config(derive_seed(base, &[1]))?, n)?;
    let est = fit_network_with(&data, &cfg.fit_config(m, n), cfg.support_rule)?;
    let inf = infer_network(&est, &data, &cfg.inference)?;
    recovery_metrics(&est, &truth.scaled(cfg.beta), &inf)
}

/// Aggregate over the successful replications of one `(m, n)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
    pub rho: f64,
    pub reps_ok: usize,
    pub reps_failed: usize,
    /// Replications whose graph had at least one edge.
    pub reps_with_edges: usize,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    /// Pooled over all nonzero true `σ` of all replications.
    pub coverage_sandwich: Option<f64>,
    pub coverage_fisher: Option<f64>,
    pub coverage_all_sigma: Option<f64>,
    pub coverage_tau: Option<f64>,
    pub coverage_alpha2: Option<f64>,
    /// `|mean over replications of the mean error|` per class.
    pub bias_sigma: Option<f64>,
    pub bias_tau: Option<f64>,
    pub bias_alpha2: Option<f64>,
    pub mean_se_sigma: Option<f64>,
    pub mean_se_fisher_sigma: Option<f64>,
    pub mean_se_tau: Option<f64>,
    pub mean_se_alpha2: Option<f64>,
    /// Messages of failed replications, in replication order.
    pub failures: Vec<String>,
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

pub fn aggregate_cell(
    m: usize,
    n: usize,
    lambda: f64,
    rho: f64,
    outcomes: &[Result<RecoveryMetrics>],
) -> CellReport {
    let ok: Vec<&RecoveryMetrics> = outcomes.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| format!("rep {i}: {e}")))
        .collect();
    let sum = |f: &dyn Fn(&RecoveryMetrics) -> usize| ok.iter().map(|r| f(r)).sum::<usize>();
    let te = sum(&|r| r.true_edges);
    let nodes = sum(&|r| r.m);
    let pairs = sum(&|r| r.m * (r.m - 1) / 2);
    CellReport {
        m,
        n,
        lambda,
        rho,
        reps_ok: ok.len(),
        reps_failed: outcomes.len() - ok.len(),
        reps_with_edges: ok.iter().filter(|r| r.true_edges > 0).count(),
        tpr: mean(ok.iter().filter_map(|r| r.tpr)),
        fpr: mean(ok.iter().filter_map(|r| r.fpr)),
        coverage_sandwich: ratio(sum(&|r| r.covered_sandwich), te),
        coverage_fisher: ratio(sum(&|r| r.covered_fisher), te),
        coverage_all_sigma: ratio(sum(&|r| r.covered_all_sigma), pairs),
        coverage_tau: ratio(sum(&|r| r.covered_tau), nodes),
        coverage_alpha2: ratio(sum(&|r| r.covered_alpha2), nodes),
        bias_sigma: mean(ok.iter().filter_map(|r| r.error_sigma)).map(f64::abs),
        bias_tau: mean(ok.iter().map(|r| r.error_tau)).map(f64::abs),
        bias_alpha2: mean(ok.iter().map(|r| r.error_alpha2)).map(f64::abs),
        mean_se_sigma: mean(ok.iter().filter_map(|r| r.se_sigma)),
        mean_se_fisher_sigma: mean(ok.iter().filter_map(|r| r.se_fisher_sigma)),
        mean_se_tau: mean(ok.iter().map(|r| r.se_tau)),
        mean_se_alpha2: mean(ok.iter().map(|r| r.se_alpha2)),
        failures,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, m: usize, n: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.m == m && c.n == n)
    }

    pub fn total_failed(&self) -> usize {
        self.cells.iter().map(|c| c.reps_failed).sum()
    }
}

/// Every `(m, n)` cell with `cfg.reps` replications. Numerical failures are
/// excluded and counted; any other error aborts the run.
pub fn run_recovery_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &m in &cfg.m_list {
        for &n in &cfg.n_grid {
            let outcomes: Vec<Result<RecoveryMetrics>> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| run_replication(cfg, m, n, rep))
                .collect();
            if let Some(Err(e)) = outcomes
                .iter()
                .find(|r| matches!(r, Err(e) if !e.is_numerical()))
            {
                return Err(e.clone());
            }
            let rho = cfg.inference.shrinkage(n).rho;
            cells.push(aggregate_cell(m, n, default_lambda(m, n), rho, &outcomes));
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        cells,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsampleConfig {
    pub fraction: f64,
    pub reps: usize,
    pub penalize_tau: bool,
    pub penalize_alpha2: bool,
    pub support_rule: SupportRule,
    pub inference: InferenceConfig,
    pub seed: u64,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        Self {
            fraction: 0.7,
            reps: 50,
            penalize_tau: false,
            penalize_alpha2: false,
            support_rule: SupportRule::Or,
            inference: InferenceConfig::default(),
            seed: 0,
        }
    }
}

/// One subsample's estimate and intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsampleRun {
    pub rows: Vec<usize>,
    pub estimate: NetworkEstimate,
    pub inference: NetworkInference,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubsampleReport {
    pub n_s: usize,
    pub lambda: f64,
    pub rho: f64,
    /// Edge retention threshold on mean `|σ̂|`.
    pub threshold: f64,
    pub mean_tau: Vec<f64>,
    pub mean_alpha2: Vec<f64>,
    pub mean_sigma: DMatrix<f64>,
    pub mean_abs_sigma: DMatrix<f64>,
    /// Fraction of subsamples selecting each edge.
    pub selection_frequency: DMatrix<f64>,
    /// Edges with mean `|σ̂|` above `threshold`.
    pub support: DMatrix<u8>,
    pub runs: Vec<SubsampleRun>,
}

/// Repeated analysis of subsamples drawn without replacement.
pub fn subsample_analysis(data: &SampleMatrix, cfg: &SubsampleConfig) -> Result<SubsampleReport> {
    if !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
        return Err(BcError::InvalidConfig(format!(
            "fraction must lie in (0, 1], got {}",
            cfg.fraction
        )));
    }
    if cfg.reps == 0 {
        return Err(BcError::InvalidConfig("reps must be at least 1".into()));
    }
    let (n, m) = (data.n(), data.m());
    let n_s = (cfg.fraction * n as f64).floor() as usize;
    if n_s < 2 {
        return Err(BcError::InvalidConfig(format!(
            "subsample size {n_s} is below 2"
        )));
    }
    let lambda = default_lambda(m, n_s);
    let fit_cfg = FitConfig {
        lambda,
        penalize_tau: cfg.penalize_tau,
        penalize_alpha2: cfg.penalize_alpha2,
        ..FitConfig::default()
    };
    let runs = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(cfg.seed, &[r as u64]);
            let mut rows = index::sample(&mut rng, n, n_s).into_vec();
            rows.sort_unstable();
            let sub = data.select_rows(&rows)?;
            let estimate = fit_network_with(&sub, &fit_cfg, cfg.support_rule)?;
            let inference = infer_network(&estimate, &sub, &cfg.inference)?;
            Ok(SubsampleRun {
                rows,
                estimate,
                inference,
            })
        })
        .collect::<Vec<_>>();
    let runs = crate::error::in_order(runs)?;
    let k = runs.len() as f64;
    let mut mean_sigma = DMatrix::zeros(m, m);
    let mut mean_abs_sigma = DMatrix::zeros(m, m);
    let mut freq = DMatrix::zeros(m, m);
    let mut mean_tau = vec![0.0; m];
    let mut mean_alpha2 = vec![0.0; m];
    for run in &runs {
        let p = &run.estimate.params;
        mean_sigma += p.sigma() / k;
        mean_abs_sigma += p.sigma().abs() / k;
        freq += run.estimate.support.map(f64::from) / k;
        for s in 0..m {
            mean_tau[s] += p.tau()[s] / k;
            mean_alpha2[s] += p.alpha2_at(s) / k;
        }
    }
    let threshold = default_lambda(m, n_s);
    let support = mean_abs_sigma.map(|v| u8::from(v > threshold));
    Ok(SubsampleReport {
        n_s,
        lambda,
        rho: default_rho(n_s),
        threshold,
        mean_tau,
        mean_alpha2,
        mean_sigma,
        mean_abs_sigma,
        selection_frequency: freq,
        support,
        runs,
    })
}

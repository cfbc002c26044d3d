//! Command-line front end. Every command writes its outputs plus a
//! `*manifest.json` listing the resolved options and file checksums.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure, 4 partial
//! result (some experiment replications failed).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{BcError, Result};
use crate::experiments::{
    run_recovery_experiment, subsample_analysis, ExperimentConfig, SubsampleConfig,
};
use crate::inference::{
    default_rho, infer_network, InferenceConfig, MiddleMatrix, NetworkInference,
};
use crate::io::{
    constant_columns, fmt, fmt_opt, parse_json_config, parse_params_json, read_spin_csv, read_text,
    spin_csv_string, with_suffix, OutputSet, RunManifest, Table,
};
use crate::meanfield::{
    bifurcation_scan, coexistence_point, collapse_point, find_fixed_points, free_energy,
    MeanFieldSpec, ScanConfig, Stability,
};
use crate::model::InverseTemperature;
use crate::plfit::{default_lambda, fit_network_with, FitConfig, NetworkEstimate, SupportRule};
use crate::sampler::{
    magnetisation_stats, run_chain, sample, GibbsConfig, SampleMatrix, ScanOrder,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "bcnet",
    version,
    about = "Blume-Capel spin networks: simulation, estimation, mean-field analysis"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw observations from a parameter file with the Gibbs sampler.
    Simulate(SimulateArgs),
    /// Lasso pseudo-likelihood fit with desparsified confidence intervals.
    Estimate(EstimateArgs),
    /// Mean-field fixed points and bifurcation scan.
    Meanfield(MeanfieldArgs),
    /// Network recovery experiment over a grid of sizes.
    Experiment(ExperimentArgs),
    /// Repeated analysis of random subsamples.
    Subsample(SubsampleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SampleMode {
    /// Each row is the last state of its own chain.
    Independent,
    /// Rows are successive states of one chain.
    Chain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScanArg {
    Sequential,
    Random,
}

impl From<ScanArg> for ScanOrder {
    fn from(s: ScanArg) -> Self {
        match s {
            ScanArg::Sequential => ScanOrder::Sequential,
            ScanArg::Random => ScanOrder::Random,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON parameter file with `tau`, `sigma`, `alpha2` (and optional `labels`).
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Sweeps per independent chain, or burn-in of the single chain.
    #[arg(long, default_value_t = 2000)]
    pub sweeps: usize,
    #[arg(long, value_enum, default_value_t = SampleMode::Independent)]
    pub mode: SampleMode,
    #[arg(long, default_value_t = 1)]
    pub thinning: usize,
    #[arg(long, value_enum, default_value_t = ScanArg::Sequential)]
    pub scan: ScanArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlphaMode {
    PerNode,
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Or,
    And,
}

impl From<RuleArg> for SupportRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Or => SupportRule::Or,
            RuleArg::And => SupportRule::And,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MiddleArg {
    Full,
    Diagonal,
}

impl From<MiddleArg> for MiddleMatrix {
    fn from(m: MiddleArg) -> Self {
        match m {
            MiddleArg::Full => MiddleMatrix::Full,
            MiddleArg::Diagonal => MiddleMatrix::Diagonal,
        }
    }
}

/// `auto` or a nonnegative number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AutoOr {
    Auto,
    Value(f64),
}

fn parse_auto(s: &str) -> std::result::Result<AutoOr, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(AutoOr::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(AutoOr::Value(v)),
        _ => Err(format!(
            "expected 'auto' or a nonnegative number, got '{s}'"
        )),
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub penalize_tau: bool,
    #[arg(long)]
    pub penalize_alpha2: bool,
    #[arg(long, value_enum, default_value_t = RuleArg::Or)]
    pub support: RuleArg,
    /// Shrinkage weight ρ: `auto` is n^(-5/4).
    #[arg(long, default_value = "auto", value_parser = parse_auto)]
    pub rho: AutoOr,
    #[arg(long, value_enum, default_value_t = MiddleArg::Full)]
    pub middle: MiddleArg,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

impl FitArgs {
    fn inference(&self) -> InferenceConfig {
        InferenceConfig {
            rho: match self.rho {
                AutoOr::Auto => None,
                AutoOr::Value(v) => Some(v),
            },
            target_mu: None,
            middle: self.middle.into(),
            level: self.level,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV of -1/0/1 values, one observation per row, optional header.
    #[arg(long)]
    pub data: PathBuf,
    /// L1 penalty: `auto` is sqrt(ln m / n).
    #[arg(long, default_value = "auto", value_parser = parse_auto)]
    pub lambda: AutoOr,
    #[arg(long, value_enum, default_value_t = AlphaMode::PerNode)]
    pub alpha_mode: AlphaMode,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Output files are `<prefix>_edges.csv`, `<prefix>_nodes.csv`, ...
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct MeanfieldArgs {
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Mean degree.
    #[arg(long, default_value_t = 5.0)]
    pub d: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha2: f64,
    /// Grid points used to bracket fixed points.
    #[arg(long, default_value_t = 4001)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0)]
    pub alpha2_min: f64,
    #[arg(long, default_value_t = 4.0)]
    pub alpha2_max: f64,
    #[arg(long, default_value_t = 81)]
    pub points: usize,
    #[arg(long, default_value_t = crate::meanfield::DEFAULT_ITERATES)]
    pub iterates: usize,
    #[arg(long, default_value_t = 50)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON config; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    pub fraction: f64,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &BcError) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(BcError::InvalidConfig(
                "--threads must be at least 1".into(),
            ));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| BcError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Meanfield(a) => cmd_meanfield(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Subsample(a) => cmd_subsample(a),
    })
}

fn finish(mut manifest: RunManifest, out: OutputSet, path: &Path) -> Result<()> {
    manifest.outputs = out.records().to_vec();
    let mut w = OutputSet::default();
    w.write_json(path, &manifest)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let pf = parse_params_json(&read_text(&a.params)?)?;
    let p = pf.to_params()?;
    let n = a.n as usize;
    let mut cfg = GibbsConfig {
        seed: a.seed,
        beta: InverseTemperature::new(a.beta).map_err(|e| BcError::Input(e.to_string()))?,
        scan: a.scan.into(),
        thinning: a.thinning,
        ..GibbsConfig::default()
    };
    let mut data = match a.mode {
        SampleMode::Independent => {
            cfg.burn_in = a.sweeps;
            cfg.n_iter = a.sweeps + 1;
            sample(&p, &cfg, n)?
        }
        SampleMode::Chain => {
            cfg.burn_in = a.sweeps;
            cfg.n_iter = a.sweeps + n * a.thinning.max(1);
            run_chain(&p, &cfg)?
        }
    };
    if let Some(l) = pf.labels.clone() {
        data = data.with_labels(l)?;
    }
    let mut out = OutputSet::default();
    out.write(&a.out, spin_csv_string(&data).as_bytes())?;
    let mut manifest = RunManifest::new(
        "simulate",
        Some(a.seed),
        json!({
            "params": a.params.display().to_string(),
            "n": n,
            "beta": a.beta,
            "sweeps": a.sweeps,
            "mode": format!("{:?}", a.mode).to_lowercase(),
            "thinning": a.thinning,
            "scan": format!("{:?}", a.scan).to_lowercase(),
            "out": a.out.display().to_string(),
        }),
    );
    manifest.add_input(&a.params)?;
    finish(manifest, out, &with_suffix(&a.out, ".manifest.json"))?;
    Ok(EXIT_OK)
}

fn warn_constant(data: &SampleMatrix) {
    for s in constant_columns(data) {
        eprintln!("warning: column {} ({}) is constant", s + 1, data.label(s));
    }
}

/// One row per pair `s < t`.
fn edge_table(
    est: &NetworkEstimate,
    inf: &NetworkInference,
    data: &SampleMatrix,
    rep: Option<usize>,
) -> Table {
    let mut cols = vec![
        "s",
        "t",
        "label_s",
        "label_t",
        "selected",
        "sigma_hat",
        "sigma_d",
        "se",
        "ci_lower",
        "ci_upper",
        "fisher_se",
    ];
    if rep.is_some() {
        cols.insert(0, "rep");
    }
    let mut t = Table::new(&cols);
    for e in &inf.edges {
        let iv = &e.interval;
        let mut row = vec![
            (e.s + 1).to_string(),
            (e.t + 1).to_string(),
            data.label(e.s),
            data.label(e.t),
            u8::from(est.support[(e.s, e.t)] != 0).to_string(),
            fmt(iv.estimate),
            fmt(iv.desparsified),
            fmt(iv.se),
            fmt(iv.lower),
            fmt(iv.upper),
            fmt(iv.fisher_se),
        ];
        if let Some(r) = rep {
            row.insert(0, r.to_string());
        }
        t.push(row);
    }
    t
}

fn node_table(
    est: &NetworkEstimate,
    inf: &NetworkInference,
    data: &SampleMatrix,
    shared: Option<f64>,
) -> Result<Table> {
    let mut t = Table::new(&[
        "s",
        "label",
        "zero_frequency",
        "tau_hat",
        "tau_d",
        "tau_se",
        "tau_lower",
        "tau_upper",
        "alpha2_hat",
        "alpha2_d",
        "alpha2_se",
        "alpha2_lower",
        "alpha2_upper",
        "alpha2_shared",
        "converged",
    ]);
    let mag = magnetisation_stats(data)?;
    for (k, nd) in inf.nodes.iter().enumerate() {
        t.push(vec![
            (nd.s + 1).to_string(),
            data.label(nd.s),
            fmt(mag.per_node[nd.s][1]),
            fmt(nd.tau.estimate),
            fmt(nd.tau.desparsified),
            fmt(nd.tau.se),
            fmt(nd.tau.lower),
            fmt(nd.tau.upper),
            fmt(nd.alpha2.estimate),
            fmt(nd.alpha2.desparsified),
            fmt(nd.alpha2.se),
            fmt(nd.alpha2.lower),
            fmt(nd.alpha2.upper),
            fmt_opt(shared),
            u8::from(est.node_fits[k].converged()).to_string(),
        ]);
    }
    Ok(t)
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<i32> {
    let data = read_spin_csv(&a.data)?;
    if data.n() < 2 || data.m() < 2 {
        return Err(BcError::Input(format!(
            "need at least 2 rows and 2 columns, got {} x {}",
            data.n(),
            data.m()
        )));
    }
    warn_constant(&data);
    let (n, m) = (data.n(), data.m());
    let lambda = match a.lambda {
        AutoOr::Auto => default_lambda(m, n),
        AutoOr::Value(v) => v,
    };
    let fit_cfg = FitConfig {
        lambda,
        penalize_tau: a.fit.penalize_tau,
        penalize_alpha2: a.fit.penalize_alpha2,
        ..FitConfig::default()
    };
    let inf_cfg = a.fit.inference();
    let est = fit_network_with(&data, &fit_cfg, a.fit.support.into())?;
    let inf = infer_network(&est, &data, &inf_cfg)?;
    let threshold = default_lambda(m, n);
    let shared = match a.alpha_mode {
        AlphaMode::PerNode => None,
        AlphaMode::Shared => Some(est.params.alpha2_vec().iter().sum::<f64>() / m as f64),
    };

    let mut out = OutputSet::default();
    out.write_table(
        &with_suffix(&a.out_prefix, "_edges.csv"),
        &edge_table(&est, &inf, &data, None),
    )?;
    out.write_table(
        &with_suffix(&a.out_prefix, "_nodes.csv"),
        &node_table(&est, &inf, &data, shared)?,
    )?;
    let labels: Vec<String> = (0..m).map(|s| data.label(s)).collect();
    let mut adj = Table::new(&labels.iter().map(String::as_str).collect::<Vec<_>>());
    for s in 0..m {
        adj.push(
            (0..m)
                .map(|t| {
                    u8::from(s != t && est.params.sigma()[(s, t)].abs() > threshold).to_string()
                })
                .collect(),
        );
    }
    out.write_table(&with_suffix(&a.out_prefix, "_adjacency.csv"), &adj)?;
    let sigma: Vec<Vec<f64>> = (0..m)
        .map(|s| (0..m).map(|t| est.params.sigma()[(s, t)]).collect())
        .collect();
    out.write_json(
        &with_suffix(&a.out_prefix, "_estimate.json"),
        &json!({
            "n": n,
            "m": m,
            "labels": labels,
            "lambda": lambda,
            "rho": inf.rho,
            "level": inf.level,
            "adjacency_threshold": threshold,
            "tau": est.params.tau(),
            "alpha2": est.params.alpha2_vec(),
            "alpha2_shared": shared,
            "sigma": sigma,
            "nodes": est.node_fits.iter().map(|f| json!({
                "node": f.node + 1,
                "status": f.status,
                "iterations": f.iterations,
                "kkt_residual": f.kkt_residual,
                "objective": f.objective,
            })).collect::<Vec<_>>(),
            "per_node_inference": inf.per_node,
        }),
    )?;
    let mut manifest = RunManifest::new(
        "estimate",
        None,
        json!({
            "data": a.data.display().to_string(),
            "lambda": lambda,
            "lambda_mode": if a.lambda == AutoOr::Auto { "auto" } else { "fixed" },
            "rho": inf.rho,
            "alpha_mode": format!("{:?}", a.alpha_mode).to_lowercase(),
            "penalize_tau": a.fit.penalize_tau,
            "penalize_alpha2": a.fit.penalize_alpha2,
            "support": format!("{:?}", a.fit.support).to_lowercase(),
            "middle": format!("{:?}", a.fit.middle).to_lowercase(),
            "level": a.fit.level,
            "out_prefix": a.out_prefix.display().to_string(),
        }),
    );
    manifest.add_input(&a.data)?;
    finish(manifest, out, &with_suffix(&a.out_prefix, "_manifest.json"))?;
    Ok(if est.all_converged() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

pub fn cmd_meanfield(a: &MeanfieldArgs) -> Result<i32> {
    let spec = MeanFieldSpec {
        beta: a.beta,
        tau: a.tau,
        sigma: a.sigma,
        d: a.d,
        alpha2: a.alpha2,
    };
    spec.validate().map_err(|e| BcError::Input(e.to_string()))?;
    let scan_cfg = ScanConfig {
        alpha2_min: a.alpha2_min,
        alpha2_max: a.alpha2_max,
        n_points: a.points,
        n_iterates: a.iterates,
        n_starts: a.starts,
        seed: a.seed,
    };
    scan_cfg
        .validate()
        .map_err(|e| BcError::Input(e.to_string()))?;
    let fps = find_fixed_points(&spec, a.grid)?;
    let scan = bifurcation_scan(&spec, &scan_cfg)?;

    let mut fp = Table::new(&["mu", "slope", "stability", "free_energy"]);
    for p in &fps {
        let g = if spec.beta > 0.0 {
            free_energy(p.mu, &spec).ok()
        } else {
            None
        };
        let st = match p.stability {
            Stability::Attracting => "attracting",
            Stability::Repelling => "repelling",
        };
        fp.push(vec![fmt(p.mu), fmt(p.slope), st.to_owned(), fmt_opt(g)]);
    }
    let mut sc = Table::new(&["alpha2", "n_terminal", "k", "mu"]);
    for p in &scan {
        for (k, mu) in p.terminal.iter().enumerate() {
            sc.push(vec![
                fmt(p.alpha2),
                p.terminal.len().to_string(),
                k.to_string(),
                fmt(*mu),
            ]);
        }
    }
    let mut out = OutputSet::default();
    out.write_table(&with_suffix(&a.out_prefix, "_fixed_points.csv"), &fp)?;
    out.write_table(&with_suffix(&a.out_prefix, "_scan.csv"), &sc)?;
    let collapse = collapse_point(&scan);
    let coexistence = if spec.tau == 0.0 && spec.beta > 0.0 && a.alpha2_min < a.alpha2_max {
        coexistence_point(&spec, a.alpha2_min, a.alpha2_max, a.grid)?
    } else {
        None
    };
    let manifest = RunManifest::new(
        "meanfield",
        Some(a.seed),
        json!({
            "spec": spec,
            "grid": a.grid,
            "scan": scan_cfg,
            "collapse_alpha2": collapse,
            "coexistence_alpha2": coexistence,
            "out_prefix": a.out_prefix.display().to_string(),
        }),
    );
    finish(manifest, out, &with_suffix(&a.out_prefix, "_manifest.json"))?;
    Ok(EXIT_OK)
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<i32> {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(p) => parse_json_config(&read_text(p)?, &p.display().to_string())?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| BcError::Input(e.to_string()))?;
    let report = run_recovery_experiment(&cfg)?;

    let mut t = Table::new(&[
        "m",
        "n",
        "lambda",
        "rho",
        "reps_ok",
        "reps_failed",
        "tpr",
        "fpr",
        "coverage_sandwich",
        "coverage_fisher",
        "coverage_all_sigma",
        "coverage_tau",
        "coverage_alpha2",
        "bias_sigma",
        "bias_tau",
        "bias_alpha2",
        "mean_se_sigma",
        "mean_se_fisher_sigma",
        "mean_se_tau",
        "mean_se_alpha2",
    ]);
    let mut out = OutputSet::default();
    for c in &report.cells {
        t.push(vec![
            c.m.to_string(),
            c.n.to_string(),
            fmt(c.lambda),
            fmt(c.rho),
            c.reps_ok.to_string(),
            c.reps_failed.to_string(),
            fmt_opt(c.tpr),
            fmt_opt(c.fpr),
            fmt_opt(c.coverage_sandwich),
            fmt_opt(c.coverage_fisher),
            fmt_opt(c.coverage_all_sigma),
            fmt_opt(c.coverage_tau),
            fmt_opt(c.coverage_alpha2),
            fmt_opt(c.bias_sigma),
            fmt_opt(c.bias_tau),
            fmt_opt(c.bias_alpha2),
            fmt_opt(c.mean_se_sigma),
            fmt_opt(c.mean_se_fisher_sigma),
            fmt_opt(c.mean_se_tau),
            fmt_opt(c.mean_se_alpha2),
        ]);
        out.write_json(
            &a.out.join("cells").join(format!("m{}_n{}.json", c.m, c.n)),
            &json!({
                "command": "experiment",
                "seed": cfg.seed,
                "m": c.m,
                "n": c.n,
                "reps": cfg.reps,
                "replication_seed": "derive_seed(seed, [m, n, rep])",
                "result": c,
            }),
        )?;
    }
    out.write_table(&a.out.join("report.csv"), &t)?;
    out.write_json(&a.out.join("report.json"), &report)?;
    let mut manifest = RunManifest::new(
        "experiment",
        Some(cfg.seed),
        serde_json::to_value(&cfg).map_err(|e| BcError::Io(e.to_string()))?,
    );
    if let Some(p) = &a.config {
        manifest.add_input(p)?;
    }
    finish(manifest, out, &a.out.join("manifest.json"))?;
    let failed = report.total_failed();
    if failed == 0 {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: {failed} replications failed and were excluded");
        let any_ok = report.cells.iter().any(|c| c.reps_ok > 0);
        Ok(if any_ok { EXIT_PARTIAL } else { EXIT_NUMERICAL })
    }
}

pub fn cmd_subsample(a: &SubsampleArgs) -> Result<i32> {
    let data = read_spin_csv(&a.data)?;
    warn_constant(&data);
    let cfg = SubsampleConfig {
        fraction: a.fraction,
        reps: a.reps,
        penalize_tau: a.fit.penalize_tau,
        penalize_alpha2: a.fit.penalize_alpha2,
        support_rule: a.fit.support.into(),
        inference: a.fit.inference(),
        seed: a.seed,
    };
    let rep = subsample_analysis(&data, &cfg).map_err(|e| match e {
        BcError::InvalidConfig(msg) => BcError::Input(msg),
        other => other,
    })?;
    let m = data.m();
    let mut net = Table::new(&[
        "s",
        "t",
        "label_s",
        "label_t",
        "mean_sigma",
        "mean_abs_sigma",
        "selection_frequency",
        "retained",
    ]);
    for s in 0..m {
        for t in s + 1..m {
            net.push(vec![
                (s + 1).to_string(),
                (t + 1).to_string(),
                data.label(s),
                data.label(t),
                fmt(rep.mean_sigma[(s, t)]),
                fmt(rep.mean_abs_sigma[(s, t)]),
                fmt(rep.selection_frequency[(s, t)]),
                rep.support[(s, t)].to_string(),
            ]);
        }
    }
    let mut nodes = Table::new(&["s", "label", "mean_tau", "mean_alpha2"]);
    for s in 0..m {
        nodes.push(vec![
            (s + 1).to_string(),
            data.label(s),
            fmt(rep.mean_tau[s]),
            fmt(rep.mean_alpha2[s]),
        ]);
    }
    let mut per = Table::default();
    for (r, run) in rep.runs.iter().enumerate() {
        let sub = data.select_rows(&run.rows)?;
        let t = edge_table(&run.estimate, &run.inference, &sub, Some(r));
        if per.header.is_empty() {
            per.header = t.header.clone();
        }
        per.rows.extend(t.rows);
    }
    let mut out = OutputSet::default();
    out.write_table(&with_suffix(&a.out_prefix, "_network.csv"), &net)?;
    out.write_table(&with_suffix(&a.out_prefix, "_nodes.csv"), &nodes)?;
    out.write_table(&with_suffix(&a.out_prefix, "_subsamples.csv"), &per)?;
    let mut manifest = RunManifest::new(
        "subsample",
        Some(a.seed),
        json!({
            "data": a.data.display().to_string(),
            "fraction": a.fraction,
            "reps": a.reps,
            "n_s": rep.n_s,
            "lambda": rep.lambda,
            "rho": cfg.inference.rho.unwrap_or_else(|| default_rho(rep.n_s)),
            "threshold": rep.threshold,
            "penalize_tau": a.fit.penalize_tau,
            "penalize_alpha2": a.fit.penalize_alpha2,
            "support": format!("{:?}", a.fit.support).to_lowercase(),
            "middle": format!("{:?}", a.fit.middle).to_lowercase(),
            "level": a.fit.level,
            "out_prefix": a.out_prefix.display().to_string(),
        }),
    );
    manifest.add_input(&a.data)?;
    finish(manifest, out, &with_suffix(&a.out_prefix, "_manifest.json"))?;
    Ok(EXIT_OK)
}

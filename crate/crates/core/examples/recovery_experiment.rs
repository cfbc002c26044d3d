//! A small network-recovery experiment over random graphs.
//!
//! Pass a JSON config path to override the built-in settings.

use blume_capel::experiments::{run_recovery_experiment, ExperimentConfig};
use blume_capel::io::{parse_json_config, read_text};

fn main() -> blume_capel::Result<()> {
    let cfg = match std::env::args_os().nth(1) {
        Some(path) => parse_json_config(&read_text(path.as_ref())?, "config")?,
        None => ExperimentConfig {
            m_list: vec![6],
            n_grid: vec![100, 400],
            reps: 10,
            tau0: 0.0,
            sigma0: 0.4,
            alpha2_0: 0.3,
            beta: 1.0,
            sweeps: 200,
            seed: 4,
            ..ExperimentConfig::default()
        },
    };
    let report = run_recovery_experiment(&cfg)?;
    println!("   m     n  ok  failed  TPR    FPR    cover  fisher");
    let f = |v: Option<f64>| v.map_or("  -  ".to_string(), |x| format!("{x:.3}"));
    for c in &report.cells {
        println!(
            "{:>4} {:>5} {:>3} {:>7}  {}  {}  {}  {}",
            c.m,
            c.n,
            c.reps_ok,
            c.reps_failed,
            f(c.tpr),
            f(c.fpr),
            f(c.coverage_sandwich),
            f(c.coverage_fisher)
        );
    }
    Ok(())
}

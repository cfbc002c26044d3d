//! Desparsified estimates with sandwich and Fisher intervals.

use blume_capel::experiments::erdos_renyi;
use blume_capel::inference::{infer_network, InferenceConfig};
use blume_capel::model::{BCParameters, InverseTemperature};
use blume_capel::plfit::{default_lambda, fit_network, FitConfig};
use blume_capel::sampler::{sample, GibbsConfig};

fn main() -> blume_capel::Result<()> {
    let graph = erdos_renyi(6, 0.4, 8)?;
    let truth = BCParameters::homogeneous(&graph, 0.0, 0.5, 0.3)?;
    let cfg = GibbsConfig {
        n_iter: 201,
        burn_in: 200,
        seed: 2,
        beta: InverseTemperature::new(1.0)?,
        ..GibbsConfig::default()
    };
    let n = 3000;
    let data = sample(&truth, &cfg, n)?;
    let est = fit_network(&data, &FitConfig::with_lambda(default_lambda(6, n)))?;
    let inf = infer_network(&est, &data, &InferenceConfig::default())?;

    println!("rho = {:.2e}, level = {}", inf.rho, inf.level);
    println!(" s  t  true    sigma_d  sandwich CI          fisher se");
    for e in &inf.edges {
        let iv = &e.interval;
        println!(
            "{:>2} {:>2}  {:+.2}   {:+.3}   [{:+.3}, {:+.3}]   {:.3}",
            e.s,
            e.t,
            truth.sigma()[(e.s, e.t)],
            iv.desparsified,
            iv.lower,
            iv.upper,
            iv.fisher_se
        );
    }
    for node in &inf.nodes {
        println!(
            "node {}: alpha2 in [{:+.3}, {:+.3}]",
            node.s, node.alpha2.lower, node.alpha2.upper
        );
    }
    Ok(())
}

//! Simulate from a known network and recover it by lasso pseudo-likelihood.

use blume_capel::model::{Alpha2, BCParameters, InverseTemperature};
use blume_capel::plfit::{default_lambda, fit_network, FitConfig};
use blume_capel::sampler::{sample, GibbsConfig};

fn main() -> blume_capel::Result<()> {
    let sigma = vec![
        vec![0.0, 0.6, 0.0, 0.0, -0.5],
        vec![0.6, 0.0, 0.5, 0.0, 0.0],
        vec![0.0, 0.5, 0.0, 0.7, 0.0],
        vec![0.0, 0.0, 0.7, 0.0, 0.4],
        vec![-0.5, 0.0, 0.0, 0.4, 0.0],
    ];
    let truth = BCParameters::from_rows(
        vec![0.1, -0.2, 0.0, 0.3, 0.0],
        &sigma,
        Alpha2::PerNode(vec![0.0, 0.5, -0.3, 0.2, 0.8]),
    )?;
    let cfg = GibbsConfig {
        n_iter: 201,
        burn_in: 200,
        seed: 5,
        beta: InverseTemperature::new(1.0)?,
        ..GibbsConfig::default()
    };
    let n = 5000;
    let data = sample(&truth, &cfg, n)?;

    let lambda = default_lambda(truth.m(), n);
    let est = fit_network(&data, &FitConfig::with_lambda(lambda))?;
    println!(
        "lambda = {lambda:.4}, all nodes converged: {}",
        est.all_converged()
    );
    println!("selected edges: {:?}", est.edges());
    for s in 0..truth.m() {
        println!(
            "node {s}: tau {:+.3} (true {:+.3})  alpha2 {:+.3} (true {:+.3})",
            est.params.tau()[s],
            truth.tau()[s],
            est.params.alpha2_at(s),
            truth.alpha2_at(s)
        );
    }
    for (s, t) in est.edges() {
        println!(
            "sigma[{s},{t}] = {:+.3} (true {:+.3})",
            est.params.sigma()[(s, t)],
            truth.sigma()[(s, t)]
        );
    }
    Ok(())
}

//! Edge stability across repeated 70% subsamples.

use blume_capel::experiments::{erdos_renyi, subsample_analysis, SubsampleConfig};
use blume_capel::model::{BCParameters, InverseTemperature};
use blume_capel::sampler::{sample, GibbsConfig};

fn main() -> blume_capel::Result<()> {
    let graph = erdos_renyi(7, 0.35, 6)?;
    let truth = BCParameters::homogeneous(&graph, 0.1, 0.5, 0.2)?;
    let gibbs = GibbsConfig {
        n_iter: 201,
        burn_in: 200,
        seed: 9,
        beta: InverseTemperature::new(1.0)?,
        ..GibbsConfig::default()
    };
    let data = sample(&truth, &gibbs, 1500)?;
    let cfg = SubsampleConfig {
        reps: 20,
        seed: 1,
        ..SubsampleConfig::default()
    };
    let rep = subsample_analysis(&data, &cfg)?;
    println!(
        "n_s = {}, lambda = {:.4}, threshold = {:.4}",
        rep.n_s, rep.lambda, rep.threshold
    );
    println!(" s  t  true   mean sigma  selected  kept");
    for s in 0..7 {
        for t in s + 1..7 {
            if graph[(s, t)] == 0 && rep.selection_frequency[(s, t)] == 0.0 {
                continue;
            }
            println!(
                "{s:>2} {t:>2}  {:>4}   {:+.3}      {:.2}      {}",
                graph[(s, t)],
                rep.mean_sigma[(s, t)],
                rep.selection_frequency[(s, t)],
                rep.support[(s, t)]
            );
        }
    }
    Ok(())
}

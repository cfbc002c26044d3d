//! Gibbs sampling on a ring and the proportions of -1/0/+1 as β grows.

use blume_capel::experiments::erdos_renyi;
use blume_capel::model::{BCParameters, InverseTemperature};
use blume_capel::sampler::{magnetisation_stats, sample, GibbsConfig};

fn main() -> blume_capel::Result<()> {
    let graph = erdos_renyi(8, 0.4, 3)?;
    let p = BCParameters::homogeneous(&graph, 0.0, 1.0, 0.5)?;
    println!("{} edges", p.edge_count());
    println!("beta   P(-1)   P(0)    P(+1)");
    for beta in [0.0, 0.5, 1.0, 2.0] {
        let cfg = GibbsConfig {
            n_iter: 301,
            burn_in: 300,
            seed: 11,
            beta: InverseTemperature::new(beta)?,
            ..GibbsConfig::default()
        };
        let data = sample(&p, &cfg, 2000)?;
        let [a, b, c] = magnetisation_stats(&data)?.pooled;
        println!("{beta:<6} {a:.3}   {b:.3}   {c:.3}");
    }
    Ok(())
}

//! Exact partition function, joint law and moments of a three-node chain.

use blume_capel::model::{
    conditional_distribution, exact_joint_probability, exact_moments, exact_partition_function,
    hamiltonian, Alpha2, BCParameters, InverseTemperature, SpinConfig,
};

fn main() -> blume_capel::Result<()> {
    let p = BCParameters::from_rows(
        vec![0.2, 0.0, -0.1],
        &[
            vec![0.0, 0.5, 0.0],
            vec![0.5, 0.0, -0.3],
            vec![0.0, -0.3, 0.0],
        ],
        Alpha2::Shared(0.4),
    )?;
    let beta = InverseTemperature::new(1.0)?;

    println!("Z = {:.6}", exact_partition_function(&p, beta)?);
    for x in [vec![1, 1, -1], vec![0, 0, 0], vec![-1, 1, 1]] {
        let cfg = SpinConfig::new(x)?;
        println!(
            "x = {:?}: H = {:+.3}, P = {:.6}",
            cfg.as_slice(),
            hamiltonian(&cfg, &p)?,
            exact_joint_probability(&cfg, &p, beta)?
        );
    }

    let [pm, p0, pp] = conditional_distribution(1, &[1, 0, -1], &p, beta)?;
    println!("P(X_1 | x_0 = 1, x_2 = -1) = [{pm:.4}, {p0:.4}, {pp:.4}]");

    let mom = exact_moments(&p, beta)?;
    println!("E[x_s]      = {:?}", mom.singletons(3));
    println!("E[x_s x_t]  = {:?}", mom.pairs(3));
    Ok(())
}

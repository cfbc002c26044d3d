//! Fixed points of the mean-field map and a scan over the zero cost α².

use blume_capel::meanfield::{
    bifurcation_scan, coexistence_point, collapse_point, find_fixed_points, free_energy,
    MeanFieldSpec, ScanConfig,
};

fn main() -> blume_capel::Result<()> {
    let spec = MeanFieldSpec::default();
    println!("fixed points at alpha2 = {}", spec.alpha2);
    for fp in find_fixed_points(&spec, 4001)? {
        println!(
            "  mu = {:+.5}  F' = {:.4}  {:?}  G = {:.5}",
            fp.mu,
            fp.slope,
            fp.stability,
            free_energy(fp.mu, &spec)?
        );
    }

    let scan = bifurcation_scan(&spec, &ScanConfig::default())?;
    for p in scan.iter().step_by(8) {
        println!("alpha2 = {:.2}: {:?}", p.alpha2, p.terminal);
    }
    println!(
        "last alpha2 with several attractors ends at {:?}",
        collapse_point(&scan)
    );
    println!(
        "ordered and disordered phases have equal free energy at {:?}",
        coexistence_point(&spec, 0.0, 4.0, 4001)?
    );
    Ok(())
}

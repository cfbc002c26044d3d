use blume_capel::model::{
    exact_distribution, Alpha2, BCParameters, InverseTemperature, SpinConfig,
};
use blume_capel::plfit::{default_lambda, fit_network, FitConfig};
use blume_capel::rng::rng_for;
use blume_capel::sampler::{sample, GibbsConfig, SampleMatrix};
use rand::Rng;

/// Data whose empirical law is the exact distribution rounded to `1/total`.
fn population_data(p: &BCParameters, beta: f64, total: usize) -> SampleMatrix {
    let m = p.m();
    let probs = exact_distribution(p, InverseTemperature::new(beta).unwrap()).unwrap();
    let mut rows = Vec::new();
    for (idx, pr) in probs.iter().enumerate() {
        let k = (pr * total as f64).round() as usize;
        let x = SpinConfig::from_index(idx, m).into_vec();
        rows.extend(std::iter::repeat_n(x, k));
    }
    SampleMatrix::from_rows(&rows).unwrap()
}

fn random_params(m: usize, seed: u64) -> BCParameters {
    let mut rng = rng_for(seed, &[]);
    let mut sigma = vec![vec![0.0; m]; m];
    for s in 0..m {
        for t in s + 1..m {
            let v = if rng.random::<f64>() < 0.6 {
                rng.random_range(-0.8..0.8)
            } else {
                0.0
            };
            sigma[s][t] = v;
            sigma[t][s] = v;
        }
    }
    let tau = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
    let a2 = (0..m).map(|_| rng.random_range(-0.5..0.8)).collect();
    BCParameters::from_rows(tau, &sigma, Alpha2::PerNode(a2)).unwrap()
}

#[test]
fn unpenalized_fit_recovers_population_minimiser() {
    for (m, seed) in [(2, 1), (3, 2), (3, 3), (4, 4)] {
        let beta = 0.8;
        let p = random_params(m, seed);
        let data = population_data(&p, beta, 400_000);
        let est = fit_network(&data, &FitConfig::with_lambda(0.0)).unwrap();
        assert!(est.all_converged());
        let truth = p.scaled(beta);
        for s in 0..m {
            assert!(
                (est.params.tau()[s] - truth.tau()[s]).abs() < 2e-3,
                "m={m} tau[{s}]"
            );
            assert!(
                (est.params.alpha2_at(s) - truth.alpha2_at(s)).abs() < 2e-3,
                "m={m} alpha2[{s}]"
            );
            for t in 0..m {
                let (a, b) = (est.params.sigma()[(s, t)], truth.sigma()[(s, t)]);
                assert!((a - b).abs() < 2e-3, "m={m} sigma[{s},{t}]: {a} vs {b}");
            }
        }
    }
}

#[test]
fn large_sample_errors_are_small() {
    let sigma = vec![
        vec![0.0, 0.5, 0.0, 0.0, 0.4],
        vec![0.5, 0.0, 0.5, 0.0, 0.0],
        vec![0.0, 0.5, 0.0, 0.5, 0.0],
        vec![0.0, 0.0, 0.5, 0.0, 0.5],
        vec![0.4, 0.0, 0.0, 0.5, 0.0],
    ];
    let p = BCParameters::from_rows(vec![0.2, 0.0, -0.2, 0.1, 0.0], &sigma, Alpha2::Shared(0.3))
        .unwrap();
    let cfg = GibbsConfig {
        n_iter: 201,
        burn_in: 200,
        seed: 17,
        ..GibbsConfig::default()
    };
    let n = 5000;
    let data = sample(&p, &cfg, n).unwrap();
    let est = fit_network(&data, &FitConfig::with_lambda(default_lambda(5, n))).unwrap();
    let mean_abs = |v: Vec<f64>| v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
    let tau_err = mean_abs((0..5).map(|s| est.params.tau()[s] - p.tau()[s]).collect());
    let a2_err = mean_abs(
        (0..5)
            .map(|s| est.params.alpha2_at(s) - p.alpha2_at(s))
            .collect(),
    );
    let sig_err = mean_abs(
        (0..5)
            .flat_map(|s| (s + 1..5).map(move |t| (s, t)))
            .map(|(s, t)| est.params.sigma()[(s, t)] - p.sigma()[(s, t)])
            .collect(),
    );
    assert!(
        tau_err < 0.1 && a2_err < 0.1 && sig_err < 0.1,
        "{tau_err} {a2_err} {sig_err}"
    );
    for (s, t) in [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)] {
        assert_ne!(est.support[(s, t)], 0);
    }
}

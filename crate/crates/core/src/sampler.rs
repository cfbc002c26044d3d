//! Gibbs sampling of spin configurations.
//!
//! Each node update draws one uniform `u ∈ [0,1)` and assigns `-1` on
//! `[0, p₋)`, `0` on `[p₋, p₋ + p₀)` and `+1` otherwise, where the
//! probabilities come from the node's conditional law at inverse
//! temperature β.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BcError, Result};
use crate::model::{conditional_probs, BCParameters, InverseTemperature, Spin, SpinConfig};
use crate::rng::{rng_for, ChainRng};

/// Order in which nodes are visited within one sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    /// Nodes `0..m` in turn.
    #[default]
    Sequential,
    /// `m` updates of uniformly chosen nodes.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    /// Total sweeps of a single long chain ([`run_chain`]).
    pub n_iter: usize,
    /// Sweeps discarded before recording. Independent-chain sampling
    /// ([`sample`]) runs exactly this many sweeps per row.
    pub burn_in: usize,
    /// Keep every `thinning`-th sweep after burn-in.
    pub thinning: usize,
    pub seed: u64,
    pub beta: InverseTemperature,
    pub scan: ScanOrder,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 10_000,
            burn_in: 2000,
            thinning: 1,
            seed: 0,
            beta: InverseTemperature::default(),
            scan: ScanOrder::Sequential,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(BcError::InvalidConfig("n_iter must be positive".into()));
        }
        if self.burn_in >= self.n_iter {
            return Err(BcError::InvalidConfig(format!(
                "burn_in ({}) must be smaller than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thinning == 0 {
            return Err(BcError::InvalidConfig("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// `n × m` observations with entries in `{-1, 0, +1}`, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleMatrix {
    n: usize,
    m: usize,
    data: Vec<Spin>,
    labels: Option<Vec<String>>,
}

impl SampleMatrix {
    pub fn new(n: usize, m: usize, data: Vec<Spin>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(BcError::EmptySample);
        }
        if data.len() != n * m {
            return Err(BcError::DimensionMismatch {
                expected: n * m,
                got: data.len(),
            });
        }
        if let Some(&bad) = data.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(BcError::InvalidSpin(i64::from(bad)));
        }
        Ok(Self {
            n,
            m,
            data,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<Spin>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(BcError::DimensionMismatch {
                expected: m,
                got: r.len(),
            });
        }
        Self::new(n, m, rows.concat())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m {
            return Err(BcError::DimensionMismatch {
                expected: self.m,
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of node `s`: the header name when present, otherwise `V{s+1}`.
    pub fn label(&self, s: usize) -> String {
        self.labels
            .as_ref()
            .map_or_else(|| format!("V{}", s + 1), |l| l[s].clone())
    }

    pub fn row(&self, i: usize) -> &[Spin] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Spin]> {
        self.data.chunks_exact(self.m)
    }

    pub fn get(&self, i: usize, s: usize) -> Spin {
        self.data[i * self.m + s]
    }

    pub fn column(&self, s: usize) -> impl Iterator<Item = Spin> + '_ {
        self.rows().map(move |r| r[s])
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.m);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        let mut out = Self::new(idx.len(), self.m, data)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// New matrix with columns reordered: column `j` is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        crate::model::check_permutation(perm, self.m)?;
        let mut data = Vec::with_capacity(self.data.len());
        for r in self.rows() {
            data.extend(perm.iter().map(|&p| r[p]));
        }
        let mut out = Self::new(self.n, self.m, data)?;
        out.labels = self
            .labels
            .as_ref()
            .map(|l| perm.iter().map(|&p| l[p].clone()).collect());
        Ok(out)
    }
}

/// Parameters pre-multiplied by β with sparse neighbor lists, ready for
/// repeated node updates.
#[derive(Clone, Debug)]
pub struct GibbsKernel {
    tau: Vec<f64>,
    alpha2: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl GibbsKernel {
    pub fn new(p: &BCParameters, beta: InverseTemperature) -> Self {
        let b = beta.value();
        let m = p.m();
        let neighbors = (0..m)
            .map(|s| {
                (0..m)
                    .filter(|&t| t != s && p.sigma()[(s, t)] != 0.0)
                    .map(|t| (t, b * p.sigma()[(s, t)]))
                    .collect()
            })
            .collect();
        Self {
            tau: p.tau().iter().map(|v| b * v).collect(),
            alpha2: (0..m).map(|s| b * p.alpha2_at(s)).collect(),
            neighbors,
        }
    }

    pub fn m(&self) -> usize {
        self.tau.len()
    }

    #[inline]
    pub fn update_node(&self, s: usize, x: &mut [Spin], rng: &mut ChainRng) {
        let mut g = self.tau[s];
        for &(t, w) in &self.neighbors[s] {
            g += w * f64::from(x[t]);
        }
        let [pm, p0, _] = conditional_probs(g, self.alpha2[s]);
        let u: f64 = rng.random();
        x[s] = if u < pm {
            -1
        } else if u < pm + p0 {
            0
        } else {
            1
        };
    }

    pub fn sweep(&self, x: &mut [Spin], scan: ScanOrder, rng: &mut ChainRng) {
        let m = self.m();
        match scan {
            ScanOrder::Sequential => {
                for s in 0..m {
                    self.update_node(s, x, rng);
                }
            }
            ScanOrder::Random => {
                for _ in 0..m {
                    let s = rng.random_range(0..m);
                    self.update_node(s, x, rng);
                }
            }
        }
    }
}

/// One sweep starting from `state`; every node is updated once in
/// sequential order.
pub fn gibbs_sweep(
    state: &SpinConfig,
    p: &BCParameters,
    beta: InverseTemperature,
    rng: &mut ChainRng,
) -> Result<SpinConfig> {
    if state.len() != p.m() {
        return Err(BcError::DimensionMismatch {
            expected: p.m(),
            got: state.len(),
        });
    }
    let mut x = state.clone();
    GibbsKernel::new(p, beta).sweep(x.as_mut_slice(), ScanOrder::Sequential, rng);
    Ok(x)
}

fn random_state(m: usize, rng: &mut ChainRng) -> Vec<Spin> {
    (0..m).map(|_| rng.random_range(-1..=1)).collect()
}

/// Draw `n` observations, each the final state of its own chain.
///
/// Chain `i` is seeded from `(cfg.seed, i)`, starts from a uniformly random
/// configuration and runs `cfg.burn_in` sweeps. Rows are computed in
/// parallel; the output does not depend on the thread count.
pub fn sample(p: &BCParameters, cfg: &GibbsConfig, n: usize) -> Result<SampleMatrix> {
    cfg.validate()?;
    if n == 0 {
        return Err(BcError::InvalidConfig(
            "number of observations must be at least 1".into(),
        ));
    }
    let kernel = GibbsKernel::new(p, cfg.beta);
    let m = p.m();
    let rows: Vec<Vec<Spin>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(cfg.seed, &[i as u64]);
            let mut x = random_state(m, &mut rng);
            for _ in 0..cfg.burn_in {
                kernel.sweep(&mut x, cfg.scan, &mut rng);
            }
            x
        })
        .collect();
    SampleMatrix::new(n, m, rows.concat())
}

/// One long chain of `cfg.n_iter` sweeps; after `cfg.burn_in` sweeps every
/// `cfg.thinning`-th state is recorded.
pub fn run_chain(p: &BCParameters, cfg: &GibbsConfig) -> Result<SampleMatrix> {
    cfg.validate()?;
    let kernel = GibbsKernel::new(p, cfg.beta);
    let m = p.m();
    let mut rng = rng_for(cfg.seed, &[u64::MAX]);
    let mut x = random_state(m, &mut rng);
    let mut data = Vec::with_capacity((cfg.n_iter - cfg.burn_in) / cfg.thinning * m);
    for sweep in 1..=cfg.n_iter {
        kernel.sweep(&mut x, cfg.scan, &mut rng);
        if sweep > cfg.burn_in && (sweep - cfg.burn_in).is_multiple_of(cfg.thinning) {
            data.extend_from_slice(&x);
        }
    }
    SampleMatrix::new(data.len() / m, m, data)
}

/// Proportions of `-1`, `0` and `+1`, per node and pooled over all nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagnetisationStats {
    pub per_node: Vec<[f64; 3]>,
    pub pooled: [f64; 3],
}

pub fn magnetisation_stats(samples: &SampleMatrix) -> Result<MagnetisationStats> {
    let (n, m) = (samples.n(), samples.m());
    if n == 0 || m == 0 {
        return Err(BcError::EmptySample);
    }
    let mut counts = vec![[0usize; 3]; m];
    for r in samples.rows() {
        for (c, &v) in counts.iter_mut().zip(r) {
            c[(v + 1) as usize] += 1;
        }
    }
    let per_node = counts
        .iter()
        .map(|c| c.map(|k| k as f64 / n as f64))
        .collect();
    let mut pooled = [0.0; 3];
    for c in &counts {
        for k in 0..3 {
            pooled[k] += c[k] as f64;
        }
    }
    let total = (n * m) as f64;
    Ok(MagnetisationStats {
        per_node,
        pooled: pooled.map(|v| v / total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Alpha2;
    use nalgebra::DMatrix;

    fn ring(m: usize, tau: f64, sigma: f64, alpha2: f64) -> BCParameters {
        let adj = DMatrix::from_fn(m, m, |i, j| {
            u8::from(i != j && ((i + 1) % m == j || (j + 1) % m == i))
        });
        BCParameters::homogeneous(&adj, tau, sigma, alpha2).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = GibbsConfig::default();
        assert!(c.validate().is_ok());
        c.burn_in = c.n_iter;
        assert!(c.validate().is_err());
        let c = GibbsConfig {
            thinning: 0,
            ..GibbsConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(sample(&ring(3, 0.0, 0.0, 0.0), &GibbsConfig::default(), 0).is_err());
    }

    #[test]
    fn beta_zero_updates_are_uniform() {
        let p = ring(5, 3.0, 2.0, -1.0);
        let beta = InverseTemperature::new(0.0).unwrap();
        let mut rng = rng_for(3, &[]);
        let mut state = SpinConfig::zeros(5);
        let mut counts = [0usize; 3];
        for _ in 0..6000 {
            state = gibbs_sweep(&state, &p, beta, &mut rng).unwrap();
            for &v in state.as_slice() {
                counts[(v + 1) as usize] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / 30_000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.015, "{counts:?}");
        }
    }

    #[test]
    fn huge_zero_cost_gives_zeros() {
        let p = ring(4, 0.5, 1.0, 0.0)
            .with_alpha2(Alpha2::Shared(50.0))
            .unwrap();
        let mut rng = rng_for(1, &[]);
        let state = SpinConfig::new(vec![1, -1, 1, 1]).unwrap();
        let next = gibbs_sweep(&state, &p, InverseTemperature::default(), &mut rng).unwrap();
        assert_eq!(next.as_slice(), &[0, 0, 0, 0]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = ring(5, 0.2, 0.5, 0.3);
        let cfg = GibbsConfig {
            burn_in: 50,
            n_iter: 100,
            seed: 42,
            ..GibbsConfig::default()
        };
        let a = sample(&p, &cfg, 40).unwrap();
        let b = sample(&p, &cfg, 40).unwrap();
        assert_eq!(a, b);
        let c = sample(
            &p,
            &GibbsConfig {
                seed: 43,
                ..cfg.clone()
            },
            40,
        )
        .unwrap();
        assert_ne!(a, c);
        // a row depends only on (seed, row index)
        let d = sample(&p, &cfg, 10).unwrap();
        assert_eq!(d.row(7), a.row(7));
        let ch1 = run_chain(
            &p,
            &GibbsConfig {
                thinning: 3,
                ..cfg.clone()
            },
        )
        .unwrap();
        let ch2 = run_chain(&p, &GibbsConfig { thinning: 3, ..cfg }).unwrap();
        assert_eq!(ch1, ch2);
        assert_eq!(ch1.n(), 50 / 3);
    }

    #[test]
    fn sample_matrix_validation() {
        assert_eq!(SampleMatrix::new(0, 3, vec![]), Err(BcError::EmptySample));
        assert!(matches!(
            SampleMatrix::new(1, 2, vec![0, 2]),
            Err(BcError::InvalidSpin(2))
        ));
        assert!(SampleMatrix::from_rows(&[vec![0, 1], vec![1]]).is_err());
        let s = SampleMatrix::from_rows(&[vec![0, 1, -1], vec![1, 1, 0]]).unwrap();
        let p = s.permute_columns(&[2, 0, 1]).unwrap();
        assert_eq!(p.row(0), &[-1, 0, 1]);
        assert_eq!(s.select_rows(&[1]).unwrap().row(0), &[1, 1, 0]);
    }

    #[test]
    fn magnetisation_examples() {
        let zeros = SampleMatrix::from_rows(&[vec![0; 4]]).unwrap();
        let st = magnetisation_stats(&zeros).unwrap();
        assert_eq!(st.pooled, [0.0, 1.0, 0.0]);
        assert!(st.per_node.iter().all(|p| *p == [0.0, 1.0, 0.0]));

        let alt =
            SampleMatrix::from_rows(&[vec![1; 3], vec![-1; 3], vec![1; 3], vec![-1; 3]]).unwrap();
        let st = magnetisation_stats(&alt).unwrap();
        assert_eq!(st.pooled, [0.5, 0.0, 0.5]);
        for p in &st.per_node {
            assert_eq!(p.iter().sum::<f64>(), 1.0);
        }
    }
}

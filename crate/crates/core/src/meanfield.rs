//! Mean-field self-consistency map, Gibbs free energy, fixed points and
//! bifurcation scans over the zero cost α².
//!
//! Each node sees the average field `τ + μ d σ`; the induced mean spin is
//!
//! ```text
//! F(μ) = 2 sinh(β(τ + μdσ)) e^{-βα²} / (1 + 2 cosh(β(τ + μdσ)) e^{-βα²})
//! ```
//!
//! and magnetisations are the solutions of `F(μ) = μ`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BcError, Result};
use crate::model::{conditional_probs, log_sum_exp3};
use crate::rng::rng_for;

/// Tolerance of the bisection refinement in [`find_fixed_points`].
pub const ROOT_TOL: f64 = 1e-10;
/// Step of the central difference used to classify stability.
pub const STABILITY_STEP: f64 = 1e-6;
/// Terminal values closer than this are merged in [`bifurcation_scan`].
pub const DEDUP_TOL: f64 = 1e-6;
pub const DEFAULT_ITERATES: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSpec {
    pub beta: f64,
    pub tau: f64,
    pub sigma: f64,
    /// Average degree.
    pub d: f64,
    pub alpha2: f64,
}

impl Default for MeanFieldSpec {
    fn default() -> Self {
        Self {
            beta: 2.0,
            tau: 0.0,
            sigma: 1.0,
            d: 5.0,
            alpha2: 2.0,
        }
    }
}

impl MeanFieldSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [self.beta, self.tau, self.sigma, self.d, self.alpha2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(BcError::InvalidConfig(
                "mean-field parameters must be finite".into(),
            ));
        }
        if self.d <= 0.0 {
            return Err(BcError::InvalidConfig(
                "average degree d must be positive".into(),
            ));
        }
        if self.beta < 0.0 {
            return Err(BcError::InvalidConfig("beta must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_alpha2(self, alpha2: f64) -> Self {
        Self { alpha2, ..self }
    }

    fn probs(&self, mu: f64) -> [f64; 3] {
        conditional_probs(
            self.beta * (self.tau + mu * self.d * self.sigma),
            self.beta * self.alpha2,
        )
    }
}

/// The self-consistency map `F(μ)`.
pub fn mf_map(mu: f64, spec: &MeanFieldSpec) -> f64 {
    let [pm, _, pp] = spec.probs(mu);
    pp - pm
}

/// Expected fraction of nonzero spins `ψ(μ)`.
pub fn nonzero_fraction(mu: f64, spec: &MeanFieldSpec) -> f64 {
    let [pm, _, pp] = spec.probs(mu);
    pp + pm
}

/// `G(μ) = ½dσμ² − β⁻¹ log(1 + 2e^{−βα²} cosh(βτ + βdσμ))`.
pub fn free_energy(mu: f64, spec: &MeanFieldSpec) -> Result<f64> {
    if spec.beta == 0.0 {
        return Err(BcError::ZeroBeta);
    }
    let h = spec.beta * (spec.tau + spec.d * spec.sigma * mu);
    let a = spec.beta * spec.alpha2;
    Ok(0.5 * spec.d * spec.sigma * mu * mu - log_sum_exp3(0.0, h - a, -h - a) / spec.beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attracting,
    Repelling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub mu: f64,
    /// `F'(μ)` by central difference.
    pub slope: f64,
    pub stability: Stability,
}

fn classify(mu: f64, spec: &MeanFieldSpec) -> FixedPoint {
    let h = STABILITY_STEP;
    let slope = (mf_map(mu + h, spec) - mf_map(mu - h, spec)) / (2.0 * h);
    let stability = if slope.abs() < 1.0 {
        Stability::Attracting
    } else {
        Stability::Repelling
    };
    FixedPoint {
        mu,
        slope,
        stability,
    }
}

/// All solutions of `F(μ) = μ` in `[-1, 1]` that produce a sign change of
/// `F(μ) − μ` on a uniform grid of `grid_size` points, refined by bisection.
pub fn find_fixed_points(spec: &MeanFieldSpec, grid_size: usize) -> Result<Vec<FixedPoint>> {
    spec.validate()?;
    if grid_size < 3 {
        return Err(BcError::InvalidConfig(
            "grid_size must be at least 3".into(),
        ));
    }
    let f = |mu: f64| mf_map(mu, spec) - mu;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| -1.0 + 2.0 * i as f64 / (grid_size - 1) as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&g| f(g)).collect();
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..grid_size {
        if vals[i] == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if i + 1 < grid_size && vals[i + 1] != 0.0 && (vals[i] > 0.0) != (vals[i + 1] > 0.0) {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            let lo_pos = vals[i] > 0.0;
            while hi - lo > ROOT_TOL {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm > 0.0) == lo_pos {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 10.0 * ROOT_TOL);
    Ok(roots.into_iter().map(|mu| classify(mu, spec)).collect())
}

/// Iterate the map `n` times from `mu0`.
pub fn iterate_map(mu0: f64, spec: &MeanFieldSpec, n: usize) -> f64 {
    (0..n).fold(mu0, |mu, _| mf_map(mu, spec))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub alpha2_min: f64,
    pub alpha2_max: f64,
    pub n_points: usize,
    pub n_iterates: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            alpha2_min: 0.0,
            alpha2_max: 4.0,
            n_points: 81,
            n_iterates: DEFAULT_ITERATES,
            n_starts: 50,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha2_min.is_finite() && self.alpha2_max.is_finite())
            || self.alpha2_max < self.alpha2_min
        {
            return Err(BcError::InvalidConfig(
                "alpha2 range must be finite with min <= max".into(),
            ));
        }
        if self.n_points == 0 || self.n_iterates == 0 || self.n_starts == 0 {
            return Err(BcError::InvalidConfig(
                "n_points, n_iterates and n_starts must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.alpha2_min];
        }
        let step = (self.alpha2_max - self.alpha2_min) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| self.alpha2_min + step * i as f64)
            .collect()
    }
}

/// Distinct terminal magnetisations at one value of α².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub alpha2: f64,
    pub terminal: Vec<f64>,
}

/// For each α² on the grid, iterate the map from `n_starts` uniform starts
/// in `[-1, 1]` and keep the distinct terminal values (sorted, merged at
/// [`DEDUP_TOL`]). Starting points for grid index `i` come from the stream
/// `(seed, i)`.
pub fn bifurcation_scan(base: &MeanFieldSpec, cfg: &ScanConfig) -> Result<Vec<ScanPoint>> {
    base.validate()?;
    cfg.validate()?;
    let points = cfg
        .grid()
        .into_par_iter()
        .enumerate()
        .map(|(i, alpha2)| {
            let spec = base.with_alpha2(alpha2);
            let mut rng = rng_for(cfg.seed, &[i as u64]);
            let mut ends: Vec<f64> = (0..cfg.n_starts)
                .map(|_| iterate_map(rng.random_range(-1.0..=1.0), &spec, cfg.n_iterates))
                .collect();
            ends.sort_by(f64::total_cmp);
            let mut terminal: Vec<f64> = Vec::new();
            for v in ends {
                match terminal.last() {
                    Some(&last) if (v - last).abs() < DEDUP_TOL => {}
                    _ => terminal.push(v),
                }
            }
            ScanPoint { alpha2, terminal }
        })
        .collect();
    Ok(points)
}

/// Smallest α² after which every later scan point has a single terminal
/// value, provided some earlier point had three or more.
pub fn collapse_point(scan: &[ScanPoint]) -> Option<f64> {
    let last_multi = scan.iter().rposition(|p| p.terminal.len() >= 3)?;
    let rest = &scan[last_multi + 1..];
    if rest.is_empty() || rest.iter().any(|p| p.terminal.len() != 1) {
        return None;
    }
    Some(rest[0].alpha2)
}

/// Free energy of the ordered phase minus that of the disordered phase at
/// the given α², or `None` when no attracting nonzero fixed point exists.
fn phase_gap(base: &MeanFieldSpec, alpha2: f64, grid_size: usize) -> Result<Option<f64>> {
    let spec = base.with_alpha2(alpha2);
    let fps = find_fixed_points(&spec, grid_size)?;
    let ordered = fps
        .iter()
        .filter(|f| f.stability == Stability::Attracting && f.mu.abs() > 1e-6)
        .map(|f| free_energy(f.mu, &spec))
        .collect::<Result<Vec<_>>>()?;
    let Some(g) = ordered.into_iter().reduce(f64::min) else {
        return Ok(None);
    };
    Ok(Some(g - free_energy(0.0, &spec)?))
}

/// α² in `[lo, hi]` at which the ordered and disordered minima of the free
/// energy have equal depth (the first-order transition), located by
/// bisection. `None` if the gap does not change sign on the interval.
/// Requires `τ = 0`, so that `μ = 0` is a fixed point.
pub fn coexistence_point(
    base: &MeanFieldSpec,
    lo: f64,
    hi: f64,
    grid_size: usize,
) -> Result<Option<f64>> {
    base.validate()?;
    if base.tau != 0.0 {
        return Err(BcError::InvalidConfig("coexistence needs tau = 0".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(BcError::InvalidConfig("need finite lo < hi".into()));
    }
    // A missing ordered phase counts as the disordered phase winning.
    let gap =
        |a: f64| -> Result<f64> { Ok(phase_gap(base, a, grid_size)?.unwrap_or(f64::INFINITY)) };
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (gap(a)?, gap(b)?);
    if !(ga < 0.0 && gb > 0.0) {
        return Ok(None);
    }
    while b - a > ROOT_TOL {
        let mid = 0.5 * (a + b);
        if gap(mid)? < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

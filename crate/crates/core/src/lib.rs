//! Three-state (`-1`, `0`, `+1`) Blume–Capel spin networks.
//!
//! The energy of a configuration `x` is
//!
//! ```text
//! H(x) = −Σ_s τ_s x_s − Σ_{s<t} σ_st x_s x_t + Σ_s α²_s x_s²
//! ```
//!
//! with `P(x) ∝ exp(−β H(x))`. The crate covers exact enumeration for small
//! networks ([`model`]), Gibbs sampling ([`sampler`]), the mean-field map
//! ([`meanfield`]), lasso pseudo-likelihood estimation ([`plfit`]),
//! desparsified confidence intervals ([`inference`]), simulation studies
//! ([`experiments`]) and the `bcnet` command line ([`cli`]).
//!
//! Estimation works on the scale where `β` is absorbed into the parameters:
//! data drawn at `β` with parameters `θ` are fitted by `β θ`.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod io;
pub mod meanfield;
pub mod model;
pub mod plfit;
pub mod rng;
pub mod sampler;

pub use error::{BcError, Result};

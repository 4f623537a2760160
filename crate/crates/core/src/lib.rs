//! Supervised classification of multivariate time series with hidden Markov
//! models (HMM), hidden semi-Markov models (HSMM) and their order-p
//! autoregressive variants.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; randomness is always driven by an explicit seed.
//! File formats, the CLI and the parallel runners live in the companion
//! `semimarkov` crate.
//!
//! Conventions:
//!
//! - States are 0-based in memory (`0..n_states`). File formats use 1-based
//!   labels and convert at the boundary.
//! - All probability computations are carried out in log space.
//! - HSMMs are right censored: the first run starts at `t = 0` and the last
//!   run ends exactly at `T - 1`. Sojourn terms use the full pmf of every run.

#![no_std]

extern crate alloc;

pub mod decode;
pub mod emission;
mod error;
pub mod evaluate;
pub mod features;
pub mod fit;
pub mod likelihood;
pub mod math;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod sojourn;

pub use error::{Error, Result};
pub use model::{Emission, Family, LabeledSeries, ModelSpec, Params, Priors, SojournFamily};
pub use sojourn::SojournDist;

/// Version of this crate, recorded in output manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

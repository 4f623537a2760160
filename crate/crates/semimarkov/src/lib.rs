//! File formats, parallel runners and the `semimarkov` command-line tool,
//! built on the `no_std` core crate [`semimarkov_core`].
//!
//! - [`io`]: series, raw-acceleration, feature and decoding CSV files; JSON.
//! - [`manifest`]: provenance records attached to every output.
//! - [`runner`]: rayon drivers whose results do not depend on thread count.
//! - [`cli`]: the six subcommands.

pub use semimarkov_core as core;

pub mod cli;
pub mod io;
pub mod manifest;
pub mod report;
pub mod runner;

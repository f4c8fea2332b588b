//! File formats, synthetic data, and experiment drivers around
//! `spangraph-core`.

pub mod bench;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;
pub mod run;
pub mod synth;

pub use error::{Error, Result};

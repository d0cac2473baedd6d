//! Experiment runner around `bfdca-core`: image and k-space files, a flat
//! configuration format, the `prepare` / `run` / `curves` / `selfcheck`
//! commands, and the multi-image train / validation / test protocol.

pub mod clock;
pub mod config;
pub mod curves;
pub mod data;
pub mod error;
pub mod imageio;
pub mod kspace;
pub mod methods;
pub mod run;
pub mod selfcheck;
pub mod trace;

pub use config::{ClockKind, ExperimentConfig, Method, Source};
pub use error::{CliError, Result};

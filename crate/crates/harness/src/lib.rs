//! Experiment harness: seeded problem generators, flat-file configs, metric
//! and certificate logging, and log-log rate fits.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod generators;
pub mod metrics;

pub use config::Config;
pub use error::{HarnessError, Result};
pub use experiment::{compare, run_experiment, RunOptions, RunOutput, Summary};
pub use fit::{fit_rate, RateFit};

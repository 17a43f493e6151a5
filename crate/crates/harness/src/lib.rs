//! Experiment harness for GAMP reconstruction from quantized measurements.
//!
//! Instance generation, the LMMSE and grid-posterior baselines, the Monte
//! Carlo runner, spec files and CSV output. The `qgamp` binary wraps these.

pub mod config;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod instance;
pub mod lmmse;
pub mod oracle;

pub use error::{HarnessError, Result};
pub use experiment::{
    run_experiment, write_trials_csv, Estimator, ExperimentOutput, ExperimentSpec, QuantizerRecipe, Summary, TrialFlag,
    TrialRecord,
};
pub use instance::{generate_instance, trial_rng, Instance};
pub use lmmse::lmmse_estimate;
pub use oracle::{grid_posterior_oracle, GridSpec};

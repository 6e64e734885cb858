//! Experiment drivers, configuration and reports.

pub mod compactness;
pub mod config;
pub mod lemmas;
pub mod report;
pub mod selftest;
pub mod sweep;

pub use compactness::{run_compactness_probe, CompactnessReport};
pub use config::ExperimentConfig;
pub use lemmas::{run_lemma_suite, LemmaReport};
pub use report::{Check, LinearFit};
pub use selftest::run_selftest;
pub use sweep::{run_gamma_sweep, SweepReport};

//! Experiment runner for the Ising-Kac Glauber chain and the Φ⁴₂ sampler:
//! configuration, replica scheduling, CSV and binary outputs, and the
//! studies built on top of the core crate.

pub mod config;
pub mod error;
pub mod experiments;
pub mod measure;
pub mod ode;
pub mod records;
pub mod scheduler;
pub mod snapshot;
pub mod studies;

pub use config::{ExperimentConfig, Mode, Observable, TestFunction};
pub use error::{LabError, LabResult};
pub use experiments::run_experiment;

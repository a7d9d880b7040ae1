//! Experiment runner for `squad-core`: seeded Monte Carlo sweeps,
//! analytical tables, cost curves and the validation suite, all exported as
//! CSV.

pub mod commands;
pub mod output;
pub mod settings;
pub mod validation;

use settings::Origin;

#[derive(Debug, thiserror::Error)]
pub enum ExpError {
    #[error("{origin}: {message}")]
    Config { origin: Origin, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] squad_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

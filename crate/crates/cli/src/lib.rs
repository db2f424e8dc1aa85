//! Command implementations behind the `dtn-helmholtz` binary.

pub mod commands;
pub mod config;

use dtn_helmholtz::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("comparison outside tolerance: {0}")]
    Tolerance(String),
}

impl CliError {
    /// 1 validation, 2 no convergence, 3 resonance, 4 comparison failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Core(Error::NotConverged { .. }) => 2,
            CliError::Core(
                Error::NearDirichletResonance { .. } | Error::NearNeumannResonance { .. },
            ) => 3,
            CliError::Core(_) => 1,
            CliError::Tolerance(_) => 4,
        }
    }
}

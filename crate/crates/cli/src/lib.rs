//! Library half of the `frfkit` command-line tool. Every subcommand is a
//! plain function returning the text it would print or write, so the
//! binary stays a thin argument parser.

pub mod commands;
pub mod io;
pub mod model_file;

use frfkit_core::baselines::BaselineError;
use frfkit_core::hybrid::HybridError;
use frfkit_core::interpolate::InterpolationError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed input files.
    #[error("{0}")]
    Input(String),
    /// Fitting or optimization failed on valid input.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<InterpolationError> for CliError {
    fn from(e: InterpolationError) -> Self {
        match e {
            InterpolationError::SingularSystem | InterpolationError::Kernel(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<HybridError> for CliError {
    fn from(e: HybridError) -> Self {
        match e {
            HybridError::InvalidInput(m) => CliError::Input(m),
            HybridError::Interpolation(e) => e.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::InvalidInput(m) => CliError::Input(m),
            BaselineError::Interpolation(e) => e.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

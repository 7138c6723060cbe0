use filtersel::classify::ClassifyError;
use filtersel::filters::FilterError;
use filtersel::selection::SelectionError;
use filtersel::spectra::SpectraError;
use thiserror::Error;

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_GUARD: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Guard(_) => EXIT_GUARD,
        }
    }

    pub fn data(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }
}

impl From<SelectionError> for CliError {
    fn from(err: SelectionError) -> Self {
        match err {
            SelectionError::GuardExceeded { .. } => CliError::Guard(err.to_string()),
            SelectionError::KTooLarge { .. }
            | SelectionError::KTooSmall { .. }
            | SelectionError::ZeroIterations => CliError::Config(err.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(err: ClassifyError) -> Self {
        match err {
            ClassifyError::Selection(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SpectraError> for CliError {
    fn from(err: SpectraError) -> Self {
        CliError::Data(err.to_string())
    }
}

/// Filter synthesis problems come from flags, so they count as configuration.
pub fn synthesis_error(err: FilterError) -> CliError {
    CliError::Config(format!("filter synthesis: {err}"))
}

use plate_core::PlateError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const DECAY_FAILURE: i32 = 4;
    pub const IO: i32 = 5;
    pub const VERIFICATION: i32 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(#[source] PlateError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => exit::CONFIG,
            AppError::Solver(_) => exit::SOLVER,
            AppError::Io(_) => exit::IO,
        }
    }
}

impl From<PlateError> for AppError {
    fn from(e: PlateError) -> Self {
        match e {
            PlateError::InvalidConfig(m) => AppError::Config(m),
            PlateError::CflViolation { .. } => AppError::Config(e.to_string()),
            PlateError::Io(io) => AppError::Io(io),
            other => AppError::Solver(other),
        }
    }
}

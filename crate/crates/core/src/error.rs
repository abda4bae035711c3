use thiserror::Error;

/// Errors produced by the simulator, the analytic models and the experiment runner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the physical domain of the model.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    /// The linearised update is only a contraction while the decay deficit stays below one.
    #[error("step size too large: decay deficit {deficit} >= 1")]
    StepSize { deficit: f64 },

    #[error("target {target_mv} mV unreachable with amplitude <= {amp_max} V (max reachable {reachable_mv} mV)")]
    Saturation {
        target_mv: f64,
        amp_max: f64,
        reachable_mv: f64,
    },

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("dataset is not linearly separable: {0}")]
    NotSeparable(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable kind, used for error records and FFI status codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Argument(_) => "argument",
            Error::Initialization(_) => "initialization",
            Error::StepSize { .. } => "step_size",
            Error::Saturation { .. } => "saturation",
            Error::Parse { .. } => "parse",
            Error::Config { .. } => "config",
            Error::NotSeparable(_) => "not_separable",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or matrix outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was called with parameters of the wrong family.
    #[error("misuse: {0}")]
    Misuse(String),

    /// Malformed user input (files, labels, configuration).
    #[error("input error: {0}")]
    Input(String),

    #[error("input error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("scatter matrix of component {component} is singular")]
    SingularScatter { component: usize },

    #[error("{model} scale solver did not converge after {iterations} iterations (relative objective gap {gap:.3e})")]
    ScaleNotConverged {
        model: String,
        iterations: usize,
        gap: f64,
    },

    /// A component's effective size fell below p + 1 during EM.
    #[error("component {component} collapsed (effective size {size:.3}, need at least {min:.0}){}", start.map(|s| format!(" in start {s}")).unwrap_or_default())]
    Collapse {
        start: Option<usize>,
        component: usize,
        size: f64,
        min: f64,
    },

    #[error("density evaluation produced NaN at observation {observation}, component {component}")]
    NanDensity { observation: usize, component: usize },

    #[error("all {} starts failed: {}", .0.len(), .0.join("; "))]
    AllStartsFailed(Vec<String>),

    #[error("every grid cell failed: {}", .0.join("; "))]
    AllCellsFailed(Vec<String>),

    #[error("k-means initialisation left an empty cluster after {0} reseeds")]
    EmptyCluster(usize),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 1 for input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Parse { .. } | Error::Io(_) | Error::Misuse(_) => 1,
            _ => 2,
        }
    }

    pub fn is_numerical(&self) -> bool {
        self.exit_code() == 2
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(format!("json: {e}"))
    }
}

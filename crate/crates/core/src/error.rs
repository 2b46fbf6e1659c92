use thiserror::Error;

/// Crate-wide error type.
///
/// `Config`, `Domain`, `Data` and `Infeasible` are user-facing input problems
/// (CLI exit code 1); the rest are internal or environment failures (exit 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("fit error for {load_case}/{component}: {message}")]
    Fit {
        load_case: String,
        component: String,
        message: String,
    },

    #[error("search space exhausted: {0}")]
    Exhausted(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by user input rather than internal failures.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::Data(_) | Error::Infeasible(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {y} is outside the range of `{label}` (max {max} at domain bound)")]
    OutOfRange { label: String, y: f64, max: f64 },

    #[error("`{label}` is not monotone near r = {at}")]
    NotMonotone { label: String, at: f64 },

    #[error("`{label}` violates its comparison class: {reason}")]
    ClassViolation { label: String, reason: String },

    #[error("phi is not a valid nondecreasing envelope: {0}")]
    InvalidPhi(String),

    #[error("invalid interval: t = {t} precedes t0 = {t0}")]
    InvalidInterval { t0: f64, t: f64 },

    #[error("impulse sequence cannot be materialized to t = {requested} (capability {available})")]
    HorizonExceeded { requested: f64, available: f64 },

    #[error("invalid impulse sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid input signal: {0}")]
    InvalidInput(String),

    #[error("no AL envelope declared for the {0} map")]
    MissingEnvelope(&'static str),

    #[error("non-finite state produced by the {map} map at t = {t}")]
    NonFiniteState { map: &'static str, t: f64 },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("input is not identically zero on the trajectory window (|u| = {norm} at t = {t})")]
    NonZeroInput { t: f64, norm: f64 },

    #[error("trajectory and input are inconsistent: {0}")]
    InconsistentInput(String),

    #[error("Gronwall hypothesis fails at t = {t}: y = {lhs} > {rhs}")]
    HypothesisFailed { t: f64, lhs: f64, rhs: f64 },

    #[error("expression error: {0}")]
    Expr(String),

    #[error("config error in {source_name} at line {line}, column {column}: {message}")]
    Config {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Wraps a serde_json parse error with the name of the document it came from.
    pub fn config(source_name: impl Into<String>, err: serde_json::Error) -> Self {
        Error::Config {
            source_name: source_name.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

/// Deserializes JSON, reporting the failing field path and its line.
///
/// Errors inside tagged enums carry no position from serde; the line is then
/// that of the first occurrence of the failing key.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, source_name: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let (mut line, mut column) = (inner.line(), inner.column());
        if line == 0 {
            if let Some(key) = path.rsplit('.').find(|k| !k.is_empty() && !k.starts_with('[') && *k != "?") {
                if let Some(at) = text.find(&format!("\"{key}\"")) {
                    line = text[..at].matches('\n').count() + 1;
                    column = at - text[..at].rfind('\n').map_or(0, |i| i + 1) + 1;
                }
            }
        }
        let message = if path == "." { inner.to_string() } else { format!("{path}: {inner}") };
        Error::Config {
            source_name: source_name.into(),
            line,
            column,
            message,
        }
    })
}

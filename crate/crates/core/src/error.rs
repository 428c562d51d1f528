use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("field direction is {angle_deg:.2} deg off the NV axis (limit {limit_deg:.2} deg)")]
    FieldMisaligned { angle_deg: f64, limit_deg: f64 },

    #[error("field magnitude {0} G is outside the model window [0, 1500] G")]
    FieldOutOfRange(f64),

    #[error("sites are {distance:.4} nm apart, below the minimum separation {min:.2} nm")]
    CoincidentSites { distance: f64, min: f64 },

    #[error("degenerate radius {0} nm")]
    DegenerateRadius(f64),

    #[error("no consistent geometry: {0}")]
    NoSolution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Hilbert space of {spins} spins exceeds the limit of {max} spins")]
    DimensionLimit { spins: usize, max: usize },

    #[error("unknown pulse channel `{0}`")]
    UnknownChannel(String),

    #[error("fit did not converge after {restarts} restarts")]
    NonConvergence { restarts: usize },

    #[error("zero degrees of freedom ({points} points, {params} parameters)")]
    ZeroDof { points: usize, params: usize },

    #[error("optimizer budget exceeded after {evaluated} of {total} map cells")]
    BudgetExceeded { evaluated: usize, total: usize },

    #[error("schema error{}: {message}", location(.line, .field))]
    Schema {
        message: String,
        line: Option<usize>,
        field: Option<String>,
    },

    #[error("unsupported {kind} version {found} (expected {expected})")]
    VersionMismatch {
        kind: String,
        found: u32,
        expected: u32,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn location(line: &Option<usize>, field: &Option<String>) -> String {
    match (line, field) {
        (Some(l), Some(f)) => format!(" at line {l}, field `{f}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn schema(message: impl Into<String>) -> Self {
        Error::Schema {
            message: message.into(),
            line: None,
            field: None,
        }
    }

    pub(crate) fn missing_field(field: &str) -> Self {
        Error::Schema {
            message: format!("missing required field `{field}`"),
            line: None,
            field: Some(field.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

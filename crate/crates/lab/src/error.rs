use serde::{Deserialize, Serialize};

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("unknown {what} `{id}`")]
    NotFound { what: &'static str, id: String },

    #[error("holdout locked")]
    HoldoutLocked,

    #[error("{0}")]
    BadRequest(String),

    #[error("session file integrity check failed: {0}")]
    Integrity(String),

    #[error("unsupported session file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Core(#[from] pathlattice::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn not_found(what: &'static str, id: impl ToString) -> Self {
        LabError::NotFound { what, id: id.to_string() }
    }

    pub fn code(&self) -> &'static str {
        use pathlattice::Error as E;
        match self {
            LabError::NotFound { .. } => "not_found",
            LabError::HoldoutLocked => "holdout_locked",
            LabError::BadRequest(_) => "bad_request",
            LabError::Integrity(_) => "integrity",
            LabError::Version { .. } => "version_mismatch",
            LabError::Core(E::FilterStarvation { .. }) => "filter_starvation",
            LabError::Core(E::FitBeforeBest) => "fit_before_best",
            LabError::Core(E::IndexOutOfRange { .. }) => "not_found",
            LabError::Core(E::Io(_)) | LabError::Io(_) => "io",
            LabError::Core(_) => "invalid",
            LabError::Json(_) => "malformed_json",
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self.code() {
            "not_found" => 404,
            "holdout_locked" => 403,
            "fit_before_best" => 409,
            "filter_starvation" | "integrity" | "version_mismatch" => 422,
            "io" => 500,
            _ => 400,
        }
    }

    pub fn payload(&self) -> ErrorPayload {
        let acceptance_rate = match self {
            LabError::Core(pathlattice::Error::FilterStarvation { acceptance_rate, .. }) => Some(*acceptance_rate),
            _ => None,
        };
        ErrorPayload {
            error: ErrorBody {
                code: self.code().to_string(),
                message: self.to_string(),
                acceptance_rate,
            },
        }
    }
}

/// Machine-readable error shape shared by the HTTP API and the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub error: ErrorBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
}

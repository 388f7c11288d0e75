use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("title `{0}` is already active in the catalog")]
    DuplicateArm(String),

    #[error("title `{0}` is not an active arm")]
    InactiveArm(String),

    #[error("title `{0}` is unknown")]
    UnknownArm(String),

    #[error("event at {event} h precedes launch at {launch} h")]
    EventBeforeLaunch { event: f64, launch: f64 },

    #[error("label `{label}` is not part of the {group} vocabulary")]
    UnknownLabel { group: &'static str, label: String },

    #[error("schema fingerprint mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("metric is undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("runs are not aligned: {0}")]
    Misaligned(String),

    #[error("empty catalog")]
    EmptyCatalog,

    #[error("title `{0}` is missing from a ranking")]
    MissingFromRanking(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable kind, used by the CLI error document.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DuplicateArm(_) => "duplicate_arm",
            Error::InactiveArm(_) => "inactive_arm",
            Error::UnknownArm(_) => "unknown_arm",
            Error::EventBeforeLaunch { .. } => "event_before_launch",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::SchemaMismatch { .. } => "schema_mismatch",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Misaligned(_) => "misaligned",
            Error::EmptyCatalog => "empty_catalog",
            Error::MissingFromRanking(_) => "missing_from_ranking",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

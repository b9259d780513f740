use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cloud has {got} points, need more than {k}")]
    TooFewPoints { got: usize, k: usize },
    #[error("direction is not unit length (norm {norm})")]
    InvalidDirection { norm: f64 },
    #[error("no valid plane candidate in cloud")]
    DegenerateCloud,
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("inverse kinematics did not converge")]
    NoSolution,
    #[error("selection is empty")]
    EmptySelection,
    #[error("approach direction is degenerate (device at selection centroid)")]
    DegenerateDirection,
    #[error("start configuration is invalid")]
    InvalidStart,
    #[error("no goal configuration is valid")]
    NoValidGoal,
    #[error("planning budget exhausted without a path")]
    NoPath,
    #[error("planning cancelled")]
    Cancelled,
    #[error("session has no interaction zones")]
    NoZones,
    #[error("no robot has been placed")]
    RobotNotPlaced,
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("invariant violated: {0}")]
    Invalid(String),
    #[error("ply: {0}")]
    Ply(String),
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Stable name of the variant, used on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::InvalidDirection { .. } => "InvalidDirection",
            Error::DegenerateCloud => "DegenerateCloud",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NoSolution => "NoSolution",
            Error::EmptySelection => "EmptySelection",
            Error::DegenerateDirection => "DegenerateDirection",
            Error::InvalidStart => "InvalidStart",
            Error::NoValidGoal => "NoValidGoal",
            Error::NoPath => "NoPath",
            Error::Cancelled => "Cancelled",
            Error::NoZones => "NoZones",
            Error::RobotNotPlaced => "RobotNotPlaced",
            Error::NothingToUndo => "NothingToUndo",
            Error::Invalid(_) => "Invalid",
            Error::Ply(_) => "Ply",
            Error::Catalog(_) => "Catalog",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

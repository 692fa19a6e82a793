use thiserror::Error;

/// Errors surfaced by the simulator and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("composite channel is rank deficient (slot {slot})")]
    SingularChannel { slot: u64 },

    #[error("coordinated schedule of {requested} users exceeds {antennas} transmit antennas")]
    InfeasibleSchedule { requested: usize, antennas: usize },

    #[error("unsupported antenna configuration: {0}")]
    UnsupportedAntennas(String),

    #[error("closed form requires cache read rate >= N*D_A ({required}), got {actual}")]
    UnsupportedRegime { required: f64, actual: f64 },

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("placement violates cache invariants: {0}")]
    InvalidPlacement(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

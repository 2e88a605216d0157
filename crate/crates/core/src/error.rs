use thiserror::Error;

use crate::protocol::Context;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("projection onto an impossible branch (probability {probability:e})")]
    ZeroProbabilityProjection { probability: f64 },
    #[error("vector has zero norm and cannot be normalised")]
    ZeroNorm,
    #[error("matrix is not unitary (max deviation of U†U from identity {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not a Hermitian idempotent projector")]
    NotProjector,
    #[error("matrix is not a density matrix: {0}")]
    NotDensityMatrix(&'static str),
    #[error("Kraus operators are not trace preserving (max deviation {0:e})")]
    NotTracePreserving(f64),
    #[error("projectors do not sum to the identity")]
    IncompleteMeasurement,
    #[error("Bob cannot measure in context {0}")]
    InvalidContext(Context),
    #[error("round {0} is a bet round but Alice's win/loss is not known yet")]
    SettleBeforeComplete(u64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("round {0} carries no macrorealist ground truth")]
    MissingGroundTruth(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed record file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

//! Simulator and statistics engine for the quantum three-box game.
//!
//! * [`hilbert`]: states, unitaries, projectors and channels on the 3-box space.
//! * [`noise`]: the experimental error model.
//! * [`protocol`]: round state machine with a quantum and a macrorealist engine.
//! * [`lg_stats`]: Leggett-Garg estimation and significance.
//! * [`mr_search`]: exhaustive and numerical search over macrorealist models.
//! * [`records`]: CSV record files.
//!
//! The linear algebra and closed-form statistics are generic over [`Scalar`]
//! (`f32` or `f64`); the aliases below fix the precision used by the engines.

pub mod config;
pub mod error;
pub mod hilbert;
pub mod lg_stats;
pub mod mr_search;
pub mod noise;
pub mod protocol;
pub mod records;
pub mod scalar;

pub use config::{ContextSchedule, SessionConfig};
pub use error::{Error, Result};
pub use hilbert::BoxLabel;
pub use noise::{NoiseParams, RepopulationTag};
pub use protocol::{BobOutcome, Context, EngineKind, GameEngine, RoundRecord};
pub use scalar::Scalar;

pub type StateVectorF64 = hilbert::StateVector<f64>;
pub type DensityMatrixF64 = hilbert::DensityMatrix<f64>;
pub type UnitaryF64 = hilbert::Unitary<f64>;
pub type ProjectorF64 = hilbert::Projector<f64>;
pub type ChannelF64 = hilbert::Channel<f64>;
pub type MrStrategyF64 = protocol::MrStrategy<f64>;
pub type StochasticMatrixF64 = protocol::StochasticMatrix<f64>;

pub type StateVectorF32 = hilbert::StateVector<f32>;
pub type DensityMatrixF32 = hilbert::DensityMatrix<f32>;
pub type UnitaryF32 = hilbert::Unitary<f32>;
pub type ProjectorF32 = hilbert::Projector<f32>;
pub type MrStrategyF32 = protocol::MrStrategy<f32>;

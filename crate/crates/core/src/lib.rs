//! Circuit construction, noise, sampling and decoding for erasure-aware
//! magic-state injection on the surface and color codes.

pub mod builders;
pub mod circuit;
pub mod decoder;
pub mod dem;
pub mod error;
pub mod faults;
pub mod fit;
pub mod matching;
pub mod noise;
pub mod propagate;
pub mod protocol;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod tableau;

pub use circuit::{Circuit, Coord, Instruction, Op, Qubit, Role};
pub use error::{Error, Result};
pub use noise::{Cadence, ErasurePlan, NoiseParams};
pub use protocol::{PostSelectionPolicy, RunResult, Scenario};
pub use sampler::{FrameSampler, ShotRecord};
pub use stats::Estimate;

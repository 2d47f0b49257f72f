//! Co-evolutionary genetic-algorithm learning in symmetric Cournot
//! oligopolies.
//!
//! The numerical core is generic over the scalar type: the market models and
//! engines take any [`Real`] (`f32`, `f64`), the quantity codec any
//! [`Scalar`] including exact rationals. The aliases below fix the common
//! choices.

pub mod algorithms;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod market;
pub mod markov;
pub mod operators;
pub mod scalar;
pub mod stats;

pub use algorithms::{AlgorithmKind, GenerationRecord, InitMode, SimulationParams, TraceOptions};
pub use encoding::Chromosome;
pub use error::{Error, Result};
pub use market::ModelSpec;
pub use operators::FitnessScheme;
pub use scalar::{Real, Scalar};

pub type MarketModel = market::MarketModel<f64>;
pub type MarketModelF32 = market::MarketModel<f32>;
pub type QuantityCodec = encoding::QuantityCodec<f64>;
pub type QuantityCodecF32 = encoding::QuantityCodec<f32>;
/// Codec over exact rationals.
pub type ExactCodec = encoding::QuantityCodec<num_rational::BigRational>;
pub type NashSolution = market::NashSolution<f64>;
pub type Simulation = algorithms::Simulation<f64>;
pub type SimulationF32 = algorithms::Simulation<f32>;

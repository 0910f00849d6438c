//! Responsibility perspective transfer toolkit.

pub mod corpus;
pub mod eval;
pub mod io;
pub mod pairs;
pub mod pipeline;
pub mod rng;
mod scalar;
pub mod scorer;
pub mod synthetic;

pub use scalar::Scalar;
pub mod prompt;
pub mod transfer;

/// Perception regressor at the precision used by the pipeline.
pub type Regressor = scorer::PerspectiveRegressor<f64>;
/// Single-precision regressor.
pub type RegressorF32 = scorer::PerspectiveRegressor<f32>;
/// Toy seq2seq model at the precision used by the pipeline.
pub type ToyModel = transfer::ToySeq2Seq<f32>;
/// Double-precision toy model, handy for gradient checks.
pub type ToyModelF64 = transfer::ToySeq2Seq<f64>;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Character-level attention encoder-decoder for generating four-line
//! classical Chinese poems (quatrains) from a topic keyword.
//!
//! The math is generic over [`numeric::Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which is what training and
//! gradient checks use.

pub mod analyzer;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod generator;
pub mod model;
pub mod numeric;
pub mod trainer;

pub use error::{Error, Result};

pub type Matrix = numeric::Matrix<f64>;
pub type ParamStore = numeric::ParamStore<f64>;
pub type Seq2Seq = model::Seq2Seq<f64>;
pub type LanguageModel = model::LanguageModel<f64>;
pub type EncoderStates = model::EncoderStates<f64>;
pub type AttentionTrace = model::AttentionTrace<f64>;
pub type Checkpoint = model::Checkpoint<f64>;

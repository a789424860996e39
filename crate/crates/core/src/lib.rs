//! Unsupervised inflection-table generation with a character-level LSTM
//! language model and attention pooling.

pub mod checkpoint;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evaluator;
pub mod generator;
pub mod manifest;
pub mod model;
pub mod nn;
pub mod synthetic;
pub mod trainer;
pub mod transfer;

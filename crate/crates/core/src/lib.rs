//! Desk-scale machine unlearning: a small autodiff engine, synthetic data with
//! standardized deletion splits, teacher-student unlearning methods and a
//! retrain-free evaluation suite.

pub mod curriculum;
pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod unlearn;

pub use error::{Error, Result};

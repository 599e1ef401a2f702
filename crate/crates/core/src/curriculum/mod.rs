//! Loss-based curriculum weighting.

pub mod lambert;
pub mod superloss;

pub use lambert::lambert_w0;
pub use superloss::{apply_curriculum, superloss_sigma, Curriculum, SuperLossParams, Weighted};

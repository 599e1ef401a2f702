//! Retrain-free evaluation: accuracies, membership inference, deletion
//! capacity, transfer, scaling curves and leaderboard aggregation.

pub mod capacity;
pub mod leaderboard;
pub mod metrics;
pub mod mia;
pub mod report;
pub mod scaling;
pub mod transfer;

pub use capacity::deletion_capacity;
pub use leaderboard::{composite, Leaderboard, RunSummary};
pub use metrics::{accuracy, chance_level, evaluate, mean_loss, per_sample_loss, Accuracies};
pub use mia::{mia_success, MiaAttack, MiaOutcome};
pub use report::{EvalReport, REFERENCE_FLOS_PER_SECOND};
pub use scaling::{flos_to_reach, scaling_curve};
pub use transfer::transfer_eval;

//! Teacher-student unlearning: configuration, taxonomy, training loop and methods.

pub mod config;
pub mod methods;
pub mod run;
pub mod taxonomy;
pub mod trace;
pub mod train;

pub use config::{Method, TrainConfig, UnlearnConfig};
pub use methods::{bad_teacher_loss, relabelled_train_labels, saliency, top_fraction};
pub use run::{exact_retrain, unlearn, UnlearnRun};
pub use taxonomy::{Corruption, Density, KnowledgeMeasure, ParamScope, Placement, Retention, TeacherSpec};
pub use trace::{Phase, Trace, TraceRow};
pub use train::{fit, train_original, AccessLog, Budget, Objective, Stepper, TrainedModel};

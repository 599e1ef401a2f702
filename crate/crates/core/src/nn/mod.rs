//! Dense reverse-mode autodiff, feed-forward classifiers, optimizers,
//! parameter masks and low-rank adapters.

pub mod adapter;
pub mod flops;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use adapter::LowRankAdapter;
pub use flops::{count_flos, count_flos_for};
pub use loss::{kl_loss, LossSpec};
pub use model::{Activation, ForwardOut, Layer, Model};
pub use optim::{OptimizerKind, OptimizerState, ParamMask};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

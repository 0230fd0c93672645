//! Residual vector quantization: codebooks with EMA learning and a norm
//! constraint, the quantizer cascade, and the training loop.
//!
//! There is no autodiff here. An encoder trained through the quantizer should
//! use the straight-through estimator: treat the gradient of `quantized` with
//! respect to the input as the identity.

mod codebook;
mod schedule;
mod stack;
mod train;

pub use codebook::{Assignments, Codebook, EmaMode};
pub use schedule::{vq_replacement_gate, Granularity, TrainingSchedule};
pub use stack::{
    batch_commitment_loss, commitment_loss, gumbel_select, DropoutConfig, DropoutMode, GumbelConfig, InitMethod,
    QuantizeResult, RvqStack, DEFAULT_CODEBOOK_SIZES,
};
pub use train::{evaluate, train_rvq, EvalSummary, StepRecord, TrainConfig, TrainingReport};

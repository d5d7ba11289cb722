//! Small neural-network stack: dense, convolution and LSTM layers over a
//! flat parameter vector, a multi-head policy/value network with
//! backpropagation through time, RMSProp and finite-difference checking.

mod checkpoint;
mod gradcheck;
mod layers;
mod net;
mod optim;
mod tensor;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, relative_error, GradCheck};
pub use layers::{axpy, dot, entropy, orthogonal, sigmoid, softmax, Alloc, Conv2d, Dense, Lstm, LstmCache, LstmState};
pub use net::{NetConfig, NetInput, NetMode, NetOutput, PolicyNet, StepGrad, Tape};
pub use optim::{clip_global_norm, OptimStep, RmsProp, RmsPropConfig};
pub use tensor::{Precision, Tensor};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch at {stage}: expected {expected}, got {got}")]
    Shape { stage: &'static str, expected: usize, got: usize },
    #[error("{0}")]
    Mode(&'static str),
    #[error("backward called without a recorded forward pass")]
    NoForward,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

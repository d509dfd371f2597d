//! A small CPU CNN engine: 'same'-padded 2-D convolution, batch
//! normalization, ReLU, max pooling, inverted dropout, a dense layer and
//! softmax cross-entropy, trained with SGD + momentum.
//!
//! Tensors are row-major `batch × height × width × channels`. Everything is
//! generic over [`Scalar`] so the same code runs in `f32` for training and in
//! `f64` for finite-difference gradient checks.

mod checkpoint;
pub mod gradcheck;
mod layers;
mod network;
mod optim;
mod spec;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{
    batchnorm_backward, batchnorm_forward, conv_backward, conv_forward, dense_backward, dense_forward,
    dense_softmax_xent, dropout, maxpool_backward, maxpool_forward, relu_backward, relu_forward,
    softmax_rows, softmax_xent, BatchNorm, BatchNormCache, ConvGrads, DenseGrads, BN_DECAY, BN_EPSILON,
};
pub use network::{ForwardTrace, Layer, LayerGrads, Network, ParamKind};
pub use optim::sgdm_step;
pub use spec::{LayerSpec, NetworkSpec, Shape3};
pub use tensor::{Scalar, Tensor};
pub use train::{train, EpochStats, LabeledSet, TrainingConfig, TrainingOutcome};

/// Train mode uses batch statistics and active dropout; infer mode uses
/// running statistics and no dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

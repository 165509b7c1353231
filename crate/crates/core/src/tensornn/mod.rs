//! Small trainable networks: dense and channels-last 1-D convolution layers,
//! softmax cross-entropy, Adam with decoupled weight decay, freezing,
//! JSON checkpoints and a finite-difference gradient audit.

mod checkpoint;
mod gradcheck;
mod layer;
mod network;
mod optim;
mod train;

pub use checkpoint::{NetworkCheckpoint, TrainMeta, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, grad_check_detail, grad_check_floored, GradAudit};
pub use layer::{Activation, Layer, LayerKind, LayerSpec, LEAKY_SLOPE};
pub use network::{
    argmax, softmax, softmax_cross_entropy, Forward, Gradients, HeadMutation, Network, ParamGrad, Standardizer,
    Trace, GROWTH_INIT_GAIN,
};
pub use optim::{Adam, Moments};
pub use train::{accuracy, train, train_lr_grid, train_with, History, Samples, TrainConfig};

//! Tensors, layers, backpropagation and the SGDM trainer for the
//! two-convolution pigment-network classifier.

mod gradcheck;
mod io;
mod layers;
mod model;
mod tensor;
mod train;

pub use gradcheck::{finite_difference_check, GradCheck, GRAD_CHECK_FLOOR};
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC};
pub use layers::{
    clipped_relu, clipped_relu_backward, cross_entropy, fc_softmax_forward, maxpool, maxpool_backward, same_padding,
    softmax, BatchNormLayer, BnCache, BnMode, ConvLayer, FcLayer, PoolSpec, PROB_FLOOR,
};
pub use model::{CnnArch, CnnGrads, CnnModel, ConvSpec, ForwardCache, TrainingMeta};
pub use tensor::Tensor4;
pub use train::{
    accuracy, finalize_batch_norm, image_to_tensor, predict, predict_batch, sgdm_step, train_cnn, write_log_csv,
    LogEntry, Prediction, TrainOptions,
};

use crate::data::PnLabel;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in tensor")]
    NonFinite,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {0} has no training samples")]
    EmptyClass(PnLabel),
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("invalid network architecture")]
    InvalidArch,
    #[error("invalid training options: {0}")]
    InvalidOptions(&'static str),
    #[error("label index {0} out of range")]
    BadLabel(usize),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("I/O error: {0}")]
    Io(String),
}

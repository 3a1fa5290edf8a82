//! Bag of visual features: upright SURF-style descriptors, a k-means
//! vocabulary, word histograms and a linear max-margin classifier.

mod classifier;
mod io;
mod kmeans;
mod surf;

pub use classifier::{
    describe_all, encode, encode_descriptors, fit_linear, label_of, predict_bof, predict_bof_batch, train_bof,
    write_bof_log_csv, BofLogEntry, BofMeta, BofModel, BofParams, BofPrediction,
};
pub use io::{decode_bof, encode_bof, load_bof, save_bof, BOF_MAGIC};
pub use kmeans::{kmeans, squared_distance, KMeansResult, Vocabulary, KMEANS_MAX_ITER, KMEANS_TOL};
pub use surf::{
    detect_describe, octave_filter_sizes, Descriptor, DescriptorSet, Keypoint, SurfParams, DESCRIPTOR_LEN,
    MIN_IMAGE_SIDE,
};

use crate::data::PnLabel;

#[derive(Debug, thiserror::Error)]
pub enum BofError {
    #[error("image is {width}x{height}, descriptors need at least 32x32")]
    TooSmallImage { width: usize, height: usize },
    #[error("{found} descriptors cannot form {needed} clusters")]
    InsufficientDescriptors { found: usize, needed: usize },
    #[error("class {label} has {count} training images, at least 2 are needed")]
    EmptyClass { label: PnLabel, count: usize },
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("I/O error: {0}")]
    Io(String),
}

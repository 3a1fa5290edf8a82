//! Pigment-network extraction: PCA grayscale projection, contrast
//! enhancement, smoothing and subtraction, intermeans thresholding,
//! component denoising and colorization.

mod components;
mod compose;
mod contrast;
mod filter;
mod pca;
mod pipeline;
mod threshold;

pub use components::{label_components, remove_small_components, Connectivity};
pub use compose::{colorize, complement, Complement};
pub use contrast::{clahe, hist_eq, TileGrid};
pub use filter::{box_filter, box_filter_10, gaussian_filter, gaussian_kernel, subtract_enhanced, SubtractOrder};
pub use pca::{pca_grayscale, PcaResult};
pub use pipeline::{
    extract_batch, extract_pigment_network, par_map, ColorSpace, Enhancer, PipelineConfig, PnResult, Smoother, Stage,
    StageImage,
};
pub use threshold::{binarize, class_means, intermeans_bin, intermeans_threshold};

use crate::imagecore::ImageError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("image {width}x{height} is smaller than the {cols}x{rows} tile grid")]
    TileTooSmall { width: usize, height: usize, cols: usize, rows: usize },
    #[error("image dimensions differ")]
    DimMismatch,
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("invalid threshold: level {level} with offset {offset}")]
    InvalidLevel { level: f64, offset: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

//! Raster types, colour conversion, resizing and image I/O.

mod color;
mod io;
mod resize;
mod types;

pub use color::{apply_channel_weights, rgb_to_hsv, rgb_to_lab, srgb_pixel_to_hsv, srgb_pixel_to_lab};
pub use io::{decode_image, encode_binary_png, encode_gray_png, encode_png, load_image, save_png};
pub use resize::resize_image;
pub use types::{BinaryImage, ChannelWeights, GrayImage, PlanarImage, RgbImage};

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("unreadable image: {0}")]
    UnreadableFile(String),
    #[error("unsupported image format (expected PNG, JPEG or BMP)")]
    UnsupportedFormat,
    #[error("failed to write image: {0}")]
    Write(String),
    #[error("image dimensions must be at least 1x1")]
    EmptyDimensions,
    #[error("pixel buffer has {actual} values, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unsupported channel count {0}")]
    ChannelCount(usize),
    #[error("image contains non-finite values")]
    NonFinite,
    #[error("gray values must lie in [0, 1]")]
    OutOfRange,
    #[error("channel weights must have at least one non-zero component")]
    ZeroWeights,
}

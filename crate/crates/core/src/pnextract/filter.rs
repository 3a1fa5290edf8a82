//! Smoothing filters and the smoothed/enhanced difference.

use super::PipelineError;
use crate::imagecore::GrayImage;

/// Separable correlation with replicate padding. `kernel[i]` weighs offset
/// `i - anchor`.
fn separable(img: &GrayImage, kernel: &[f64], anchor: usize) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let clamp = |v: isize, len: usize| v.clamp(0, len as isize - 1) as usize;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                acc += k * row[clamp(x as isize + i as isize - anchor as isize, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (i, &k) in kernel.iter().enumerate() {
            let sy = clamp(y as isize + i as isize - anchor as isize, h);
            let src_row = &tmp[sy * w..(sy + 1) * w];
            for (o, &s) in out[y * w..(y + 1) * w].iter_mut().zip(src_row) {
                *o += k * s;
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out
}

/// Uniform mean over a `size x size` window. For even sizes the window
/// extends one pixel further right/down than left/up.
pub fn box_filter(img: &GrayImage, size: usize) -> GrayImage {
    assert!(size >= 1, "box size must be positive");
    let kernel = vec![1.0 / size as f64; size];
    let anchor = (size - 1) / 2;
    GrayImage::from_raw(img.width(), img.height(), separable(img, &kernel, anchor))
}

pub fn box_filter_10(img: &GrayImage) -> GrayImage {
    box_filter(img, 10)
}

/// Normalised 1-D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

pub fn gaussian_filter(img: &GrayImage, sigma: f64) -> Result<GrayImage, PipelineError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(PipelineError::InvalidParameter("gaussian sigma must be positive"));
    }
    let kernel = gaussian_kernel(sigma);
    let anchor = kernel.len() / 2;
    Ok(GrayImage::from_raw(img.width(), img.height(), separable(img, &kernel, anchor)))
}

/// Which image is subtracted from which.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtractOrder {
    #[default]
    SmoothedMinusEnhanced,
    EnhancedMinusSmoothed,
}

/// Differences below this are rounding noise from the smoothing sums.
const SUBTRACT_FLOOR: f64 = 1e-12;

/// Per-pixel `max(0, smoothed - enhanced)`.
pub fn subtract_enhanced(smoothed: &GrayImage, enhanced: &GrayImage) -> Result<GrayImage, PipelineError> {
    if (smoothed.width(), smoothed.height()) != (enhanced.width(), enhanced.height()) {
        return Err(PipelineError::DimMismatch);
    }
    let data = smoothed
        .data()
        .iter()
        .zip(enhanced.data())
        .map(|(s, e)| if s - e > SUBTRACT_FLOOR { s - e } else { 0.0 })
        .collect();
    Ok(GrayImage::from_raw(smoothed.width(), smoothed.height(), data))
}

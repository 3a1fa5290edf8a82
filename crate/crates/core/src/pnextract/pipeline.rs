use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    box_filter_10, clahe, colorize, gaussian_filter, hist_eq, intermeans_threshold, pca_grayscale,
    remove_small_components, subtract_enhanced, Complement, Connectivity, PipelineError, SubtractOrder, TileGrid,
};
use crate::imagecore::{
    apply_channel_weights, encode_binary_png, encode_gray_png, encode_png, resize_image, rgb_to_hsv, rgb_to_lab,
    BinaryImage, ChannelWeights, GrayImage, ImageError, RgbImage,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoother {
    #[default]
    Box10,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorSpace {
    #[default]
    Lab,
    Hsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enhancer {
    #[default]
    Clahe,
    GlobalHistEq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub resize: (usize, usize),
    pub color_space: ColorSpace,
    pub channel_weights: ChannelWeights,
    pub enhancer: Enhancer,
    pub clahe_tiles: TileGrid,
    pub clahe_bins: usize,
    pub clahe_clip: f64,
    pub smoother: Smoother,
    pub gaussian_sigma: f64,
    pub subtract_order: SubtractOrder,
    pub threshold_bins: usize,
    pub threshold_offset: f64,
    pub min_component_px: usize,
    pub connectivity: Connectivity,
    pub background: [u8; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            resize: (512, 512),
            color_space: ColorSpace::Lab,
            channel_weights: ChannelWeights::default(),
            enhancer: Enhancer::Clahe,
            clahe_tiles: TileGrid::new(8, 8),
            clahe_bins: 128,
            clahe_clip: 0.01,
            smoother: Smoother::Box10,
            gaussian_sigma: 2.0,
            subtract_order: SubtractOrder::SmoothedMinusEnhanced,
            threshold_bins: 256,
            threshold_offset: 0.008,
            min_component_px: 100,
            connectivity: Connectivity::Eight,
            background: [255, 255, 255],
        }
    }
}

impl PipelineConfig {
    pub const MAX_THRESHOLD_OFFSET: f64 = 0.05;

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = PipelineError::InvalidParameter;
        if self.resize.0 == 0 || self.resize.1 == 0 {
            return Err(bad("resize dimensions must be positive"));
        }
        if self.clahe_tiles.cols == 0 || self.clahe_tiles.rows == 0 {
            return Err(bad("CLAHE tile grid must be positive"));
        }
        if self.clahe_tiles.cols > self.resize.0 || self.clahe_tiles.rows > self.resize.1 {
            return Err(bad("CLAHE tile grid exceeds the resized image"));
        }
        if self.clahe_bins < 2 {
            return Err(bad("CLAHE needs at least two bins"));
        }
        if !(self.clahe_clip > 0.0 && self.clahe_clip <= 1.0) {
            return Err(bad("CLAHE clip fraction must lie in (0, 1]"));
        }
        if !(self.gaussian_sigma > 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(bad("gaussian sigma must be positive"));
        }
        if !(2..=256).contains(&self.threshold_bins) {
            return Err(bad("threshold histogram needs 2..=256 bins"));
        }
        if !(0.0..=Self::MAX_THRESHOLD_OFFSET).contains(&self.threshold_offset) {
            return Err(bad("threshold offset must lie in [0, 0.05]"));
        }
        if self.min_component_px == 0 {
            return Err(bad("minimum component size must be at least 1"));
        }
        Ok(())
    }
}

/// Intermediate images, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Resized,
    PcaGray,
    Enhanced,
    Smoothed,
    Subtracted,
    BinaryRaw,
    BinaryClean,
    Complemented,
    Colorized,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Resized,
        Stage::PcaGray,
        Stage::Enhanced,
        Stage::Smoothed,
        Stage::Subtracted,
        Stage::BinaryRaw,
        Stage::BinaryClean,
        Stage::Complemented,
        Stage::Colorized,
    ];

    /// File stem used when stages are written to disk.
    pub fn file_stem(self) -> &'static str {
        match self {
            Stage::Resized => "01_resized",
            Stage::PcaGray => "02_pca_gray",
            Stage::Enhanced => "03_enhanced",
            Stage::Smoothed => "04_smoothed",
            Stage::Subtracted => "05_subtracted",
            Stage::BinaryRaw => "06_binary_raw",
            Stage::BinaryClean => "07_binary_clean",
            Stage::Complemented => "08_complemented",
            Stage::Colorized => "09_colorized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageImage {
    Rgb(RgbImage),
    Gray(GrayImage),
    Binary(BinaryImage),
}

impl StageImage {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            StageImage::Rgb(i) => (i.width(), i.height()),
            StageImage::Gray(i) => (i.width(), i.height()),
            StageImage::Binary(i) => (i.width(), i.height()),
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        match self {
            StageImage::Rgb(i) => encode_png(i),
            StageImage::Gray(i) => encode_gray_png(i),
            StageImage::Binary(i) => encode_binary_png(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnResult {
    /// Pigment-network pixels are `true`.
    pub mask: BinaryImage,
    pub colorized: RgbImage,
    /// The eight intermediate stages (everything except `Colorized`).
    pub stages: Vec<(Stage, StageImage)>,
    /// Intermeans level before the offset is applied.
    pub threshold_level: f64,
    /// Offset actually subtracted; capped at `threshold_level`.
    pub offset_used: f64,
    pub detected: bool,
    /// PCA saw a constant first component.
    pub degenerate: bool,
}

impl PnResult {
    pub fn stage(&self, stage: Stage) -> Option<&StageImage> {
        self.stages.iter().find(|(s, _)| *s == stage).map(|(_, img)| img)
    }

    /// Writes all nine stage PNGs into `dir`.
    pub fn write_stages(&self, dir: &Path) -> Result<(), ImageError> {
        std::fs::create_dir_all(dir).map_err(|e| ImageError::Write(format!("{}: {e}", dir.display())))?;
        for (stage, img) in &self.stages {
            write_file(&dir.join(format!("{}.png", stage.file_stem())), &img.encode_png()?)?;
        }
        write_file(&dir.join(format!("{}.png", Stage::Colorized.file_stem())), &encode_png(&self.colorized)?)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ImageError> {
    std::fs::write(path, bytes).map_err(|e| ImageError::Write(format!("{}: {e}", path.display())))
}

/// Runs the full extraction chain on one image.
pub fn extract_pigment_network(img: &RgbImage, cfg: &PipelineConfig) -> Result<PnResult, PipelineError> {
    cfg.validate()?;
    let resized = resize_image(img, cfg.resize.0, cfg.resize.1);
    let converted = match cfg.color_space {
        ColorSpace::Lab => rgb_to_lab(&resized),
        ColorSpace::Hsv => rgb_to_hsv(&resized),
    };
    let weighted = apply_channel_weights(&converted, cfg.channel_weights)?;
    let (gray, pca) = pca_grayscale(&weighted)?;

    let enhanced = match cfg.enhancer {
        Enhancer::Clahe => clahe(&gray, cfg.clahe_tiles, cfg.clahe_bins, cfg.clahe_clip)?,
        Enhancer::GlobalHistEq => hist_eq(&gray, cfg.clahe_bins),
    };
    let smoothed = match cfg.smoother {
        Smoother::Box10 => box_filter_10(&enhanced),
        Smoother::Gaussian => gaussian_filter(&enhanced, cfg.gaussian_sigma)?,
    };
    let subtracted = match cfg.subtract_order {
        SubtractOrder::SmoothedMinusEnhanced => subtract_enhanced(&smoothed, &enhanced)?,
        SubtractOrder::EnhancedMinusSmoothed => subtract_enhanced(&enhanced, &smoothed)?,
    };

    let threshold_level = intermeans_threshold(&subtracted, cfg.threshold_bins)?;
    let offset_used = cfg.threshold_offset.min(threshold_level);
    let binary_raw = super::binarize(&subtracted, threshold_level, offset_used)?;
    let binary_clean = if pca.degenerate {
        BinaryImage::zeros(binary_raw.width(), binary_raw.height())
    } else {
        remove_small_components(&binary_raw, cfg.min_component_px, cfg.connectivity)
    };
    let complemented = binary_clean.complement();
    let colorized = colorize(&binary_clean, &resized, cfg.background)?;
    let detected = !binary_clean.is_empty();

    Ok(PnResult {
        mask: binary_clean.clone(),
        colorized,
        stages: vec![
            (Stage::Resized, StageImage::Rgb(resized)),
            (Stage::PcaGray, StageImage::Gray(gray)),
            (Stage::Enhanced, StageImage::Gray(enhanced)),
            (Stage::Smoothed, StageImage::Gray(smoothed)),
            (Stage::Subtracted, StageImage::Gray(subtracted)),
            (Stage::BinaryRaw, StageImage::Binary(binary_raw)),
            (Stage::BinaryClean, StageImage::Binary(binary_clean)),
            (Stage::Complemented, StageImage::Binary(complemented)),
        ],
        threshold_level,
        offset_used,
        detected,
        degenerate: pca.degenerate,
    })
}

/// Runs `f` over `items` on a pool of `jobs` threads, preserving order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool construction");
    pool.install(|| items.par_iter().map(&f).collect())
}

/// Extracts pigment networks from many images on `jobs` threads.
pub fn extract_batch(images: &[RgbImage], cfg: &PipelineConfig, jobs: usize) -> Vec<Result<PnResult, PipelineError>> {
    par_map(images, jobs, |img| extract_pigment_network(img, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn offset_out_of_range_rejected() {
        let cfg = PipelineConfig { threshold_offset: 0.06, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig { min_component_px: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn constant_image_not_detected() {
        let img = RgbImage::filled(40, 30, [180, 120, 90]);
        let cfg = PipelineConfig { resize: (64, 64), ..Default::default() };
        let res = extract_pigment_network(&img, &cfg).unwrap();
        assert!(!res.detected);
        assert!(res.degenerate);
        assert!(res.colorized.pixels().all(|p| p == [255, 255, 255]));
        assert_eq!(res.stages.len(), 8);
        assert!(res.stages.iter().all(|(_, s)| s.dims() == (64, 64)));
        assert!((0.0..=1.0).contains(&res.threshold_level));
    }

    #[test]
    fn stage_names_are_ordered() {
        let names: Vec<_> = Stage::ALL.iter().map(|s| s.file_stem()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }
}

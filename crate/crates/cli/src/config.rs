//! Flat key-value configuration files (TOML syntax) and flag overrides.

use std::path::Path;

use pnkit_core::bof::BofParams;
use pnkit_core::imagecore::ChannelWeights;
use pnkit_core::nn::{CnnArch, TrainOptions};
use pnkit_core::pnextract::{ColorSpace, Connectivity, Enhancer, PipelineConfig, Smoother, SubtractOrder, TileGrid};
use serde::Deserialize;

use crate::error::CliError;

/// Every key a config file may set. Unknown keys are an error.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,

    /// `[width, height]` after resizing.
    pub resize: Option<[usize; 2]>,
    pub color_space: Option<ColorSpace>,
    pub weights: Option<[f64; 3]>,
    pub enhancer: Option<Enhancer>,
    /// `[cols, rows]`.
    pub clahe_tiles: Option<[usize; 2]>,
    pub clahe_bins: Option<usize>,
    pub clahe_clip: Option<f64>,
    pub smoother: Option<Smoother>,
    pub gaussian_sigma: Option<f64>,
    pub subtract_order: Option<SubtractOrder>,
    pub threshold_bins: Option<usize>,
    pub threshold_offset: Option<f64>,
    pub min_component: Option<usize>,
    /// 4 or 8.
    pub connectivity: Option<u8>,
    pub background: Option<[u8; 3]>,

    pub train_fraction: Option<f64>,
    /// CNN input `[height, width]`.
    pub input_size: Option<[usize; 2]>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub validation_frequency: Option<usize>,
    pub shuffle: Option<bool>,

    pub vocab_size: Option<usize>,
    pub max_vocab_descriptors: Option<usize>,
    pub bof_lambda: Option<f64>,
    pub bof_epochs: Option<usize>,
    pub bof_learning_rate: Option<f64>,
    pub surf_octaves: Option<usize>,
    pub surf_threshold: Option<f64>,
    pub surf_max_keypoints: Option<usize>,
}

pub fn parse_config_str(text: &str) -> Result<FileConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
}

pub fn load_config_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::error::io_err(path, e))?;
    parse_config_str(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub seed: u64,
    pub jobs: usize,
    pub pipeline: PipelineConfig,
    pub train_fraction: f64,
    pub arch: CnnArch,
    pub train: TrainOptions,
    pub bof: BofParams,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            pipeline: PipelineConfig::default(),
            train_fraction: 0.8,
            arch: CnnArch::default(),
            train: TrainOptions::default(),
            bof: BofParams::default(),
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl CliConfig {
    /// Defaults overlaid with the file's keys.
    pub fn from_file(f: &FileConfig) -> Result<Self, CliError> {
        let mut c = Self::default();
        set(&mut c.seed, f.seed);
        set(&mut c.jobs, f.jobs);

        let p = &mut c.pipeline;
        set(&mut p.resize, f.resize.map(|[w, h]| (w, h)));
        set(&mut p.color_space, f.color_space);
        if let Some(w) = f.weights {
            p.channel_weights = ChannelWeights::new(w).map_err(|e| CliError::Config(e.to_string()))?;
        }
        set(&mut p.enhancer, f.enhancer);
        set(&mut p.clahe_tiles, f.clahe_tiles.map(|[c, r]| TileGrid::new(c, r)));
        set(&mut p.clahe_bins, f.clahe_bins);
        set(&mut p.clahe_clip, f.clahe_clip);
        set(&mut p.smoother, f.smoother);
        set(&mut p.gaussian_sigma, f.gaussian_sigma);
        set(&mut p.subtract_order, f.subtract_order);
        set(&mut p.threshold_bins, f.threshold_bins);
        set(&mut p.threshold_offset, f.threshold_offset);
        set(&mut p.min_component_px, f.min_component);
        if let Some(n) = f.connectivity {
            p.connectivity = match n {
                4 => Connectivity::Four,
                8 => Connectivity::Eight,
                _ => return Err(CliError::Config(format!("connectivity must be 4 or 8, got {n}"))),
            };
        }
        set(&mut p.background, f.background);

        set(&mut c.train_fraction, f.train_fraction);
        if let Some([h, w]) = f.input_size {
            c.arch = CnnArch::with_input(h, w);
        }
        let t = &mut c.train;
        set(&mut t.learning_rate, f.learning_rate);
        set(&mut t.momentum, f.momentum);
        set(&mut t.max_epochs, f.epochs);
        set(&mut t.batch_size, f.batch_size);
        set(&mut t.validation_frequency, f.validation_frequency);
        set(&mut t.shuffle_each_epoch, f.shuffle);

        let b = &mut c.bof;
        set(&mut b.vocab_size, f.vocab_size);
        set(&mut b.max_vocab_descriptors, f.max_vocab_descriptors);
        set(&mut b.lambda, f.bof_lambda);
        set(&mut b.epochs, f.bof_epochs);
        set(&mut b.learning_rate, f.bof_learning_rate);
        set(&mut b.surf.octaves, f.surf_octaves);
        set(&mut b.surf.threshold, f.surf_threshold);
        set(&mut b.surf.max_keypoints, f.surf_max_keypoints);
        Ok(c)
    }

    /// Loads `path` when given, otherwise starts from the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::from_file(&load_config_file(p)?),
            None => Ok(Self::default()),
        }
    }

    /// Propagates the seed and checks every section.
    pub fn finish(mut self) -> Result<Self, CliError> {
        self.train.seed = self.seed;
        self.bof.seed = self.seed;
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        if self.jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Config("train_fraction must lie in (0, 1)".into()));
        }
        self.pipeline.validate().map_err(|e| cfg(&e))?;
        self.arch.validate().map_err(|e| cfg(&e))?;
        self.train.validate().map_err(|e| cfg(&e))?;
        self.bof.validate().map_err(|e| cfg(&e))?;
        Ok(self)
    }
}

//! Dataset ingestion, stratified splitting, derived-dataset building and
//! synthetic test images.

mod build;
mod csvio;
mod split;
mod synth;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub use build::{
    build_pn_dataset, class_counts, id_labels, load_labeled_dataset, load_manifest_dataset, pn_file_name,
    resolve_image, BuildReport, FAILURES_FILE, MANIFEST_FILE,
};
pub use csvio::{
    parse_labels_csv, parse_manifest, write_labels_csv, write_manifest, ManifestRow, OverrideTable, LABELS_HEADER,
    MANIFEST_HEADER, OVERRIDES_HEADER, OVERRIDE_RANGE,
};
pub use split::stratified_split;
pub use synth::{synth_background, synth_network_image, SynthParams};

/// Pigment-network class. `Atypical` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PnLabel {
    Typical,
    Atypical,
}

impl PnLabel {
    pub const ALL: [PnLabel; 2] = [PnLabel::Typical, PnLabel::Atypical];

    /// Class index used by the classifiers: typical 0, atypical 1.
    pub fn index(self) -> usize {
        match self {
            PnLabel::Typical => 0,
            PnLabel::Atypical => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PnLabel::Typical => "typical",
            PnLabel::Atypical => "atypical",
        }
    }
}

impl fmt::Display for PnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PnLabel {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "typical" => Ok(PnLabel::Typical),
            "atypical" => Ok(PnLabel::Atypical),
            _ => Err(DataError::BadLabel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub id: String,
    pub path: PathBuf,
    pub label: PnLabel,
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("no image found for id {0:?}")]
    MissingImage(String),
    #[error("bad label {0:?} (expected typical or atypical)")]
    BadLabel(String),
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),
    #[error("invalid image id {0:?}")]
    BadId(String),
    #[error("bad CSV header: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("threshold offset {0} outside [0.001, 0.011]")]
    OffsetOutOfRange(f64),
    #[error("train fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("class {label} has {size} items in the {part} set")]
    ClassTooSmall { label: PnLabel, size: usize, part: &'static str },
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

//! Pigment-network isolation and typical/atypical classification for
//! dermoscopic skin-lesion images.
//!
//! * [`imagecore`] raster types, colour conversion and resizing.
//! * [`pnextract`] the extraction pipeline from RGB photograph to PN mask.
//! * [`nn`] a small CNN with hand-written backpropagation and an SGDM trainer.
//! * [`bof`] bag-of-visual-features descriptors, vocabulary and linear classifier.
//! * [`eval`] confusion matrices, SE/SP/PR/AC, ROC/AUC and detection rates.
//! * [`data`] dataset ingestion, splitting, derived-dataset building and synthetic images.

pub mod bof;
pub mod data;
pub mod eval;
pub mod imagecore;
pub mod nn;
pub mod pnextract;

mod container;

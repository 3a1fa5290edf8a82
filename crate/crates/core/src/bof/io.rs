//! `PNKITBOF1` model file: the shared container layout with the parameters
//! in the JSON header, the centroid matrix (row per word) and the weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::{BofMeta, BofModel, BofParams};
use super::kmeans::Vocabulary;
use super::surf::{Descriptor, DESCRIPTOR_LEN};
use super::BofError;
use crate::container::{read_container, reject_leftovers, take_tensor, write_container};

pub const BOF_MAGIC: &[u8] = b"PNKITBOF1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    k: usize,
    descriptor_len: usize,
    classes: [String; 2],
    params: BofParams,
    meta: Option<BofMeta>,
}

pub fn encode_bof(model: &BofModel) -> Result<Vec<u8>, BofError> {
    let header = Header {
        format_version: FORMAT_VERSION,
        k: model.vocabulary.k(),
        descriptor_len: DESCRIPTOR_LEN,
        classes: ["typical".into(), "atypical".into()],
        params: model.params.clone(),
        meta: model.meta.clone(),
    };
    let centroids: Vec<f64> = model.vocabulary.centroids.iter().flatten().copied().collect();
    write_container(BOF_MAGIC, &header, &[("centroids", &centroids), ("weights", &model.weights)])
        .map_err(BofError::Format)
}

pub fn decode_bof(bytes: &[u8]) -> Result<BofModel, BofError> {
    let (header, mut table): (Header, _) = read_container(bytes, BOF_MAGIC, 2).map_err(BofError::Format)?;
    if header.format_version != FORMAT_VERSION {
        return Err(BofError::Format(format!("unsupported version {}", header.format_version)));
    }
    if header.descriptor_len != DESCRIPTOR_LEN || header.classes != ["typical", "atypical"] {
        return Err(BofError::Format("unsupported descriptor length or class names".into()));
    }
    header.params.validate().map_err(|e| BofError::Format(e.to_string()))?;
    let k = header.k;
    if k < 2 || k != header.params.vocab_size {
        return Err(BofError::Format(format!("bad vocabulary size {k}")));
    }
    let len = k.checked_mul(DESCRIPTOR_LEN).ok_or_else(|| BofError::Format("vocabulary too large".into()))?;
    let flat = take_tensor(&mut table, "centroids", Some(len)).map_err(BofError::Format)?;
    let weights = take_tensor(&mut table, "weights", Some(k + 1)).map_err(BofError::Format)?;
    reject_leftovers(&table).map_err(BofError::Format)?;
    let centroids = flat
        .chunks_exact(DESCRIPTOR_LEN)
        .map(|c| {
            let mut d: Descriptor = [0.0; DESCRIPTOR_LEN];
            d.copy_from_slice(c);
            d
        })
        .collect();
    Ok(BofModel { params: header.params, vocabulary: Vocabulary { centroids }, weights, meta: header.meta })
}

pub fn save_bof(model: &BofModel, path: &Path) -> Result<(), BofError> {
    std::fs::write(path, encode_bof(model)?).map_err(|e| BofError::Io(format!("{}: {e}", path.display())))
}

pub fn load_bof(path: &Path) -> Result<BofModel, BofError> {
    let bytes = std::fs::read(path).map_err(|e| BofError::Io(format!("{}: {e}", path.display())))?;
    decode_bof(&bytes)
}

//! `PNKITCNN1` model file: the shared container layout with a JSON header
//! holding the architecture and training metadata.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{CnnArch, CnnModel, TrainingMeta};
use super::NnError;
use crate::container::{read_container, reject_leftovers, take_tensor, write_container};

pub const MODEL_MAGIC: &[u8] = b"PNKITCNN1";
const FORMAT_VERSION: u32 = 1;
const MAX_TENSORS: u32 = 64;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    arch: CnnArch,
    bn_epsilon: [f64; 2],
    bn_momentum: [f64; 2],
    meta: Option<TrainingMeta>,
}

const EXTRA_TENSORS: [&str; 5] =
    ["input_mean", "bn1.running_mean", "bn1.running_var", "bn2.running_mean", "bn2.running_var"];

fn tensors(model: &CnnModel) -> Vec<(&'static str, &Vec<f64>)> {
    let mut out: Vec<(&'static str, &Vec<f64>)> = CnnModel::PARAM_NAMES.into_iter().zip(model.params()).collect();
    let extra = [
        &model.input_mean,
        &model.bn1.running_mean,
        &model.bn1.running_var,
        &model.bn2.running_mean,
        &model.bn2.running_var,
    ];
    out.extend(EXTRA_TENSORS.into_iter().zip(extra));
    out
}

pub fn encode_model(model: &CnnModel) -> Result<Vec<u8>, NnError> {
    let header = Header {
        format_version: FORMAT_VERSION,
        arch: model.arch.clone(),
        bn_epsilon: [model.bn1.epsilon, model.bn2.epsilon],
        bn_momentum: [model.bn1.momentum_stat, model.bn2.momentum_stat],
        meta: model.meta.clone(),
    };
    let list: Vec<(&str, &[f64])> = tensors(model).into_iter().map(|(n, v)| (n, v.as_slice())).collect();
    write_container(MODEL_MAGIC, &header, &list).map_err(NnError::Format)
}

pub fn decode_model(bytes: &[u8]) -> Result<CnnModel, NnError> {
    let (header, mut table): (Header, _) = read_container(bytes, MODEL_MAGIC, MAX_TENSORS).map_err(NnError::Format)?;
    if header.format_version != FORMAT_VERSION {
        return Err(NnError::Format(format!("unsupported version {}", header.format_version)));
    }
    let arch = header.arch;
    arch.validate().map_err(|_| NnError::Format("invalid architecture".into()))?;
    for (eps, mom) in header.bn_epsilon.iter().zip(&header.bn_momentum) {
        if !(*eps > 0.0 && eps.is_finite()) || !(0.0..=1.0).contains(mom) {
            return Err(NnError::Format("invalid batch-norm constants".into()));
        }
    }

    // Expected sizes, checked before the model allocates anything.
    let (ci, c1, c2) = (arch.input.2, arch.conv1.filters, arch.conv2.filters);
    let kernel = |k: (usize, usize), i: usize, o: usize| k.0.checked_mul(k.1)?.checked_mul(i)?.checked_mul(o);
    let (fh, fw) = arch.spatial_chain()[2];
    let fc_in = fh.checked_mul(fw).and_then(|v| v.checked_mul(c2));
    let sizes = [
        kernel(arch.conv1.kernel, ci, c1),
        Some(c1),
        Some(c1),
        Some(c1),
        kernel(arch.conv2.kernel, c1, c2),
        Some(c2),
        Some(c2),
        Some(c2),
        fc_in.and_then(|v| v.checked_mul(arch.classes)),
        Some(arch.classes),
    ];
    let mut params = Vec::with_capacity(sizes.len());
    for (name, size) in CnnModel::PARAM_NAMES.iter().zip(sizes) {
        let size = size.ok_or_else(|| NnError::Format("tensor size overflow".into()))?;
        params.push(take_tensor(&mut table, name, Some(size)).map_err(NnError::Format)?);
    }
    let input_mean = take_tensor(&mut table, "input_mean", Some(ci)).map_err(NnError::Format)?;
    let running: Vec<Vec<f64>> = [("bn1", c1), ("bn2", c2)]
        .iter()
        .flat_map(|(p, c)| [(format!("{p}.running_mean"), *c), (format!("{p}.running_var"), *c)])
        .map(|(n, c)| take_tensor(&mut table, &n, Some(c)).map_err(NnError::Format))
        .collect::<Result<_, _>>()?;
    reject_leftovers(&table).map_err(NnError::Format)?;
    if running[1].iter().chain(&running[3]).any(|v| *v < 0.0) {
        return Err(NnError::Format("negative running variance".into()));
    }

    let mut model = CnnModel::zeros(arch).map_err(|_| NnError::Format("invalid architecture".into()))?;
    for (slot, values) in model.params_mut().into_iter().zip(params) {
        *slot = values;
    }
    model.input_mean = input_mean;
    let mut running = running.into_iter();
    model.bn1.running_mean = running.next().expect("4 tensors");
    model.bn1.running_var = running.next().expect("4 tensors");
    model.bn2.running_mean = running.next().expect("4 tensors");
    model.bn2.running_var = running.next().expect("4 tensors");
    model.bn1.epsilon = header.bn_epsilon[0];
    model.bn2.epsilon = header.bn_epsilon[1];
    model.bn1.momentum_stat = header.bn_momentum[0];
    model.bn2.momentum_stat = header.bn_momentum[1];
    model.meta = header.meta;
    Ok(model)
}

pub fn save_model(model: &CnnModel, path: &Path) -> Result<(), NnError> {
    let bytes = encode_model(model)?;
    std::fs::write(path, bytes).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<CnnModel, NnError> {
    let bytes = std::fs::read(path).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))?;
    decode_model(&bytes)
}

use std::fs;
use std::path::{Path, PathBuf};

use super::csvio::{parse_labels_csv, parse_manifest, write_manifest, ManifestRow, OverrideTable};
use super::{DataError, LabeledImage, PnLabel};
use crate::imagecore::{encode_png, load_image};
use crate::pnextract::{extract_pigment_network, par_map, PipelineConfig};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const FAILURES_FILE: &str = "failures.csv";

const IMAGE_EXTENSIONS: [&str; 8] = ["bmp", "png", "jpg", "jpeg", "BMP", "PNG", "JPG", "JPEG"];

/// Finds the image for `id` under `root`: `<root>/<id>.<ext>`, the PH2
/// layout `<root>/<id>/<id>_Dermoscopic_Image/<id>.bmp`, or a derived
/// `<root>/<id>_pn.png`.
pub fn resolve_image(root: &Path, id: &str) -> Option<PathBuf> {
    let flat = IMAGE_EXTENSIONS.iter().map(|ext| root.join(format!("{id}.{ext}")));
    let ph2 = IMAGE_EXTENSIONS
        .iter()
        .map(|ext| root.join(id).join(format!("{id}_Dermoscopic_Image")).join(format!("{id}.{ext}")));
    flat.chain(ph2).chain(std::iter::once(root.join(pn_file_name(id)))).find(|p| p.is_file())
}

pub fn pn_file_name(id: &str) -> String {
    format!("{id}_pn.png")
}

/// Reads a labels CSV and resolves every image under `root`.
pub fn load_labeled_dataset(root: &Path, labels: &Path) -> Result<Vec<LabeledImage>, DataError> {
    let file = fs::File::open(labels).map_err(|e| DataError::Io(format!("{}: {e}", labels.display())))?;
    let rows = parse_labels_csv(file)?;
    rows.into_iter()
        .map(|(id, label)| match resolve_image(root, &id) {
            Some(path) => Ok(LabeledImage { id, path, label }),
            None => Err(DataError::MissingImage(id)),
        })
        .collect()
}

/// Loads a directory produced by [`build_pn_dataset`].
pub fn load_manifest_dataset(dir: &Path) -> Result<Vec<LabeledImage>, DataError> {
    let path = dir.join(MANIFEST_FILE);
    let file = fs::File::open(&path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    let rows = parse_manifest(file)?;
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    rows.into_iter()
        .map(|r| {
            let path = dir.join(pn_file_name(&r.image_id));
            if path.is_file() {
                Ok(LabeledImage { id: r.image_id, path, label: r.label })
            } else {
                Err(DataError::MissingImage(r.image_id))
            }
        })
        .collect()
}

pub fn class_counts(items: &[LabeledImage]) -> [usize; 2] {
    let mut counts = [0; 2];
    for i in items {
        counts[i.label.index()] += 1;
    }
    counts
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    /// One row per input item, sorted by id.
    pub rows: Vec<ManifestRow>,
    /// `(id, message)` for items whose extraction failed.
    pub failures: Vec<(String, String)>,
}

impl BuildReport {
    pub fn detected(&self) -> usize {
        self.rows.iter().filter(|r| r.detected).count()
    }
}

/// Extracts every item's pigment network into `out` as `<id>_pn.png` and
/// writes `manifest.csv`. Per-image failures are recorded, not fatal.
pub fn build_pn_dataset(
    items: &[LabeledImage],
    cfg: &PipelineConfig,
    overrides: &OverrideTable,
    out: &Path,
    jobs: usize,
) -> Result<BuildReport, DataError> {
    cfg.validate().map_err(|e| DataError::Config(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| DataError::Io(format!("{}: {e}", out.display())))?;
    let mut sorted: Vec<&LabeledImage> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let outcomes = par_map(&sorted, jobs, |item| -> Result<ManifestRow, String> {
        let mut local = cfg.clone();
        if let Some(off) = overrides.get(&item.id) {
            local.threshold_offset = off;
        }
        let img = load_image(&item.path).map_err(|e| e.to_string())?;
        let res = extract_pigment_network(&img, &local).map_err(|e| e.to_string())?;
        let png = encode_png(&res.colorized).map_err(|e| e.to_string())?;
        let target = out.join(pn_file_name(&item.id));
        fs::write(&target, png).map_err(|e| format!("{}: {e}", target.display()))?;
        Ok(ManifestRow {
            image_id: item.id.clone(),
            label: item.label,
            detected: res.detected,
            threshold_level: Some(res.threshold_level),
            offset_used: Some(res.offset_used),
        })
    });

    let mut report = BuildReport::default();
    for (item, outcome) in sorted.iter().zip(outcomes) {
        match outcome {
            Ok(row) => report.rows.push(row),
            Err(msg) => {
                report.rows.push(ManifestRow {
                    image_id: item.id.clone(),
                    label: item.label,
                    detected: false,
                    threshold_level: None,
                    offset_used: None,
                });
                report.failures.push((item.id.clone(), msg));
            }
        }
    }

    let manifest = out.join(MANIFEST_FILE);
    let file = fs::File::create(&manifest).map_err(|e| DataError::Io(format!("{}: {e}", manifest.display())))?;
    write_manifest(&report.rows, file)?;

    let failures = out.join(FAILURES_FILE);
    if report.failures.is_empty() {
        let _ = fs::remove_file(&failures);
    } else {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&failures)
            .map_err(|e| DataError::Io(e.to_string()))?;
        w.write_record(["image_id", "error"]).map_err(|e| DataError::Io(e.to_string()))?;
        for (id, msg) in &report.failures {
            w.write_record([id, msg]).map_err(|e| DataError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| DataError::Io(e.to_string()))?;
    }
    Ok(report)
}

/// `(id, label)` pairs, handy for writing split files.
pub fn id_labels(items: &[LabeledImage]) -> Vec<(String, PnLabel)> {
    items.iter().map(|i| (i.id.clone(), i.label)).collect()
}

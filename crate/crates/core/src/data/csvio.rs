//! The three CSV files: labels, per-image threshold overrides, and the
//! derived-dataset manifest.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{DataError, PnLabel};

pub const LABELS_HEADER: [&str; 2] = ["image_id", "pn_label"];
pub const OVERRIDES_HEADER: [&str; 2] = ["image_id", "offset"];
pub const MANIFEST_HEADER: [&str; 5] = ["image_id", "label", "detected", "threshold_level", "offset_used"];

/// Allowed range for a per-image threshold offset.
pub const OVERRIDE_RANGE: std::ops::RangeInclusive<f64> = 0.001..=0.011;

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let header = rdr.headers().map_err(|e| DataError::Csv(e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(DataError::BadHeader {
            expected: expected.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn records<R: Read>(
    input: R,
    expected: &[&str],
) -> Result<impl Iterator<Item = Result<csv::StringRecord, DataError>>, DataError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, expected)?;
    let width = expected.len();
    Ok(rdr.into_records().map(move |r| {
        let r = r.map_err(|e| DataError::Csv(e.to_string()))?;
        if r.len() != width {
            return Err(DataError::Csv(format!("expected {width} fields, found {}", r.len())));
        }
        Ok(r)
    }))
}

fn check_id(id: &str) -> Result<(), DataError> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(DataError::BadId(id.to_string()));
    }
    Ok(())
}

/// Parses `image_id,pn_label` rows. Ids must be unique and non-empty.
pub fn parse_labels_csv<R: Read>(input: R) -> Result<Vec<(String, PnLabel)>, DataError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for rec in records(input, &LABELS_HEADER)? {
        let rec = rec?;
        let id = rec[0].to_string();
        check_id(&id)?;
        let label: PnLabel = rec[1].parse()?;
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId(id));
        }
        out.push((id, label));
    }
    if out.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(out)
}

/// Per-image threshold offsets replacing the configured default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverrideTable(BTreeMap<String, f64>);

impl OverrideTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, offset: f64) -> Result<(), DataError> {
        if !OVERRIDE_RANGE.contains(&offset) {
            return Err(DataError::OffsetOutOfRange(offset));
        }
        let id = id.into();
        check_id(&id)?;
        if self.0.insert(id.clone(), offset).is_some() {
            return Err(DataError::DuplicateId(id));
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.0.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parse<R: Read>(input: R) -> Result<Self, DataError> {
        let mut table = Self::new();
        for rec in records(input, &OVERRIDES_HEADER)? {
            let rec = rec?;
            let offset: f64 = rec[1].parse().map_err(|_| DataError::Csv(format!("bad offset {:?}", &rec[1])))?;
            table.insert(&rec[0], offset)?;
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(OVERRIDES_HEADER).map_err(csv_err)?;
        for (id, off) in &self.0 {
            w.write_record([id.as_str(), &off.to_string()]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| DataError::Io(e.to_string()))
    }
}

/// One row of the derived-dataset manifest. `threshold_level` and
/// `offset_used` are absent when the image failed to process.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub image_id: String,
    pub label: PnLabel,
    pub detected: bool,
    pub threshold_level: Option<f64>,
    pub offset_used: Option<f64>,
}

fn csv_err(e: csv::Error) -> DataError {
    DataError::Io(e.to_string())
}

fn opt_f64(s: &str) -> Result<Option<f64>, DataError> {
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| DataError::Csv(format!("bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(DataError::Csv(format!("non-finite number {s:?}")));
    }
    Ok(Some(v))
}

pub fn parse_manifest<R: Read>(input: R) -> Result<Vec<ManifestRow>, DataError> {
    let mut seen = std::collections::HashSet::new();
    let mut rows = Vec::new();
    for rec in records(input, &MANIFEST_HEADER)? {
        let rec = rec?;
        let image_id = rec[0].to_string();
        check_id(&image_id)?;
        if !seen.insert(image_id.clone()) {
            return Err(DataError::DuplicateId(image_id));
        }
        let detected = match &rec[2] {
            "true" => true,
            "false" => false,
            other => return Err(DataError::Csv(format!("bad detected flag {other:?}"))),
        };
        rows.push(ManifestRow {
            image_id,
            label: rec[1].parse()?,
            detected,
            threshold_level: opt_f64(&rec[3])?,
            offset_used: opt_f64(&rec[4])?,
        });
    }
    Ok(rows)
}

pub fn write_manifest<W: Write>(rows: &[ManifestRow], out: W) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(MANIFEST_HEADER).map_err(csv_err)?;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.image_id.as_str(),
            r.label.as_str(),
            if r.detected { "true" } else { "false" },
            &fmt(r.threshold_level),
            &fmt(r.offset_used),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::Io(e.to_string()))
}

/// Writes `image_id,pn_label` rows.
pub fn write_labels_csv<W: Write>(items: &[(String, PnLabel)], out: W) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(LABELS_HEADER).map_err(csv_err)?;
    for (id, label) in items {
        w.write_record([id.as_str(), label.as_str()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DataError::Io(e.to_string()))
}

//! Binary layout shared by the model files:
//!
//! ```text
//! magic bytes
//! u32 LE  header length, then that many bytes of JSON
//! u32 LE  tensor count
//! per tensor: u16 LE name length, UTF-8 name, u64 LE value count, f64 LE values
//! ```

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub(crate) fn write_container<H: Serialize>(
    magic: &[u8],
    header: &H,
    tensors: &[(&str, &[f64])],
) -> Result<Vec<u8>, String> {
    let json = serde_json::to_vec(header).map_err(|e| e.to_string())?;
    let hlen = u32::try_from(json.len()).map_err(|_| "header too large".to_string())?;
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&hlen.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, values) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if n > self.buf.len() {
            return Err("unexpected end of data".into());
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().expect("slice of length N"))
    }
}

/// Parses the container. Every length is checked against the remaining
/// input before anything is allocated.
pub(crate) fn read_container<H: DeserializeOwned>(
    bytes: &[u8],
    magic: &[u8],
    max_tensors: u32,
) -> Result<(H, BTreeMap<String, Vec<f64>>), String> {
    let mut r = Reader { buf: bytes };
    if r.take(magic.len()).ok() != Some(magic) {
        return Err("bad magic".into());
    }
    let hlen = u32::from_le_bytes(r.array()?) as usize;
    let header: H = serde_json::from_slice(r.take(hlen)?).map_err(|e| format!("header: {e}"))?;
    let count = u32::from_le_bytes(r.array()?);
    if count > max_tensors {
        return Err(format!("{count} tensors"));
    }
    let mut table = BTreeMap::new();
    for _ in 0..count {
        let nlen = u16::from_le_bytes(r.array()?) as usize;
        let name = std::str::from_utf8(r.take(nlen)?).map_err(|_| "tensor name is not UTF-8".to_string())?;
        let n = u64::from_le_bytes(r.array()?);
        let needed =
            usize::try_from(n).ok().and_then(|n| n.checked_mul(8)).ok_or_else(|| "tensor too large".to_string())?;
        let values: Vec<f64> =
            r.take(needed)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite value in {name}"));
        }
        if table.insert(name.to_string(), values).is_some() {
            return Err(format!("duplicate tensor {name}"));
        }
    }
    if !r.buf.is_empty() {
        return Err("trailing bytes".into());
    }
    Ok((header, table))
}

/// Removes a tensor, checking its length when `expected` is given.
pub(crate) fn take_tensor(
    table: &mut BTreeMap<String, Vec<f64>>,
    name: &str,
    expected: Option<usize>,
) -> Result<Vec<f64>, String> {
    let v = table.remove(name).ok_or_else(|| format!("missing tensor {name}"))?;
    match expected {
        Some(len) if v.len() != len => Err(format!("tensor {name} has {} values, expected {len}", v.len())),
        _ => Ok(v),
    }
}

pub(crate) fn reject_leftovers(table: &BTreeMap<String, Vec<f64>>) -> Result<(), String> {
    match table.keys().next() {
        Some(name) => Err(format!("unknown tensor {name}")),
        None => Ok(()),
    }
}

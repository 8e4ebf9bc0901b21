//! On-disk formats.
//!
//! Trajectory datasets (`.gfmt`):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GFMT"
//! 4       4     version (u32 LE) = 1
//! 8       4     N (u32 LE)
//! 12      4     T (u32 LE)
//! 16      4     D (u32 LE)
//! 20      4·NTD f32 LE payload, row-major [N][T][D]
//! ```
//!
//! Metadata lives in a sibling `.json` file with the same stem.
//!
//! Model checkpoints (`.gfmc`):
//!
//! ```text
//! 0       4     magic "GFMC"
//! 4       4     version (u32 LE) = 1
//! 8       8     header length H (u64 LE)
//! 16      H     UTF-8 JSON header
//! 16+H    8·P   f64 LE parameter payload
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::trajectory::{DatasetMeta, TrajectoryDataset};

pub const DATASET_MAGIC: &[u8; 4] = b"GFMT";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GFMC";
pub const VERSION: u32 = 1;
const DATASET_HEADER: usize = 20;

/// Path of the JSON sidecar for a dataset file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_dataset(ds: &TrajectoryDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let dims = [ds.n(), ds.t(), ds.d()];
    let mut out = Vec::with_capacity(DATASET_HEADER + 4 * ds.data.len());
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for dim in dims {
        let dim = u32::try_from(dim).map_err(|_| Error::invalid(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    for &v in &ds.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4-byte slice")))
        .ok_or_else(|| Error::format(offset as u64, "truncated header"))
}

/// Parses a GFMT payload; returns `(n, t, d, values)`.
pub fn decode_dataset_payload(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    if bytes.len() < 4 || &bytes[..4] != DATASET_MAGIC {
        return Err(Error::format(0, "bad magic, expected GFMT"));
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let n = read_u32(bytes, 8)? as usize;
    let t = read_u32(bytes, 12)? as usize;
    let d = read_u32(bytes, 16)? as usize;
    let count = n
        .checked_mul(t)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| Error::format(8, "dimension product overflows"))?;
    let payload = &bytes[DATASET_HEADER..];
    if payload.len() != count * 4 {
        return Err(Error::format(
            DATASET_HEADER as u64,
            format!(
                "payload holds {} bytes but N·T·D = {n}·{t}·{d} needs {}",
                payload.len(),
                count * 4
            ),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    Ok((n, t, d, values))
}

pub fn save_dataset(ds: &TrajectoryDataset, path: &Path) -> Result<()> {
    let bytes = encode_dataset(ds)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), &ds.meta)
}

pub fn load_dataset(path: &Path) -> Result<TrajectoryDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (n, t, d, data) = decode_dataset_payload(&bytes)?;
    let meta: DatasetMeta = read_json(&sidecar_path(path))?;
    if (meta.n, meta.t, meta.d) != (n, t, d) {
        return Err(Error::format(
            8,
            format!(
                "header dims ({n}, {t}, {d}) disagree with metadata ({}, {}, {})",
                meta.n, meta.t, meta.d
            ),
        ));
    }
    Ok(TrajectoryDataset { data, meta })
}

/// Rounds every value to `f32`, matching what a save/load round trip returns.
pub fn quantize(ds: &TrajectoryDataset) -> TrajectoryDataset {
    TrajectoryDataset {
        data: ds.data.iter().map(|&v| v as f32 as f64).collect(),
        meta: ds.meta.clone(),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(0, format!("{}: {e}", path.display())))
}

pub fn encode_checkpoint<H: Serialize>(header: &H, params: &[f64]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for &p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_checkpoint<H: DeserializeOwned>(bytes: &[u8]) -> Result<(H, Vec<f64>)> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "bad magic, expected GFMC"));
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let len = bytes
        .get(8..16)
        .map(|b| u64::from_le_bytes(b.try_into().expect("8-byte slice")))
        .ok_or_else(|| Error::format(8, "truncated header length"))? as usize;
    let end = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format(16, "header runs past end of file"))?;
    let header: H = serde_json::from_slice(&bytes[16..end])
        .map_err(|e| Error::format(16, format!("header json: {e}")))?;
    let payload = &bytes[end..];
    if !payload.len().is_multiple_of(8) {
        return Err(Error::format(end as u64, "payload is not a whole number of f64 values"));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, params))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{OptimizerConfig, OptimizerKind};
    use crate::smallnet::InitScheme;
    use crate::trajectory::generate_linreg_trajectories;

    fn small() -> TrajectoryDataset {
        let cfg = OptimizerConfig::trajectory_default(OptimizerKind::Sgd);
        generate_linreg_trajectories(&cfg, 3, 1, InitScheme::StdNormal).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.gfmt");
        let b = dir.path().join("b.gfmt");
        let ds = small();
        save_dataset(&ds, &a).unwrap();
        let loaded = load_dataset(&a).unwrap();
        assert_eq!(loaded.data, quantize(&ds).data);
        assert_eq!(loaded.meta, ds.meta);
        save_dataset(&loaded, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(
            fs::read(sidecar_path(&a)).unwrap(),
            fs::read(sidecar_path(&b)).unwrap()
        );
    }

    #[test]
    fn truncated_and_inconsistent_payloads() {
        let bytes = encode_dataset(&small()).unwrap();
        for cut in [0, 3, 10, 19, 21, bytes.len() - 1] {
            assert!(matches!(
                decode_dataset_payload(&bytes[..cut]),
                Err(Error::Format { .. })
            ));
        }
        let mut wrong = bytes.clone();
        wrong[8..12].copy_from_slice(&4u32.to_le_bytes());
        assert!(matches!(
            decode_dataset_payload(&wrong),
            Err(Error::Format { offset: 20, .. })
        ));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(
            decode_dataset_payload(&magic),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut version = bytes;
        version[4] = 9;
        assert!(matches!(
            decode_dataset_payload(&version),
            Err(Error::Format { offset: 4, .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let params = vec![1.5, -2.25, f64::MIN_POSITIVE];
        let bytes = encode_checkpoint(&serde_json::json!({"kind": "gfm"}), &params).unwrap();
        let (h, p): (serde_json::Value, Vec<f64>) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(h["kind"], "gfm");
        assert_eq!(p, params);
        assert!(decode_checkpoint::<serde_json::Value>(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode_checkpoint::<serde_json::Value>(&bytes[..12]).is_err());
    }
}

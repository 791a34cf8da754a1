//! Binary design matrix and its JSON manifest.
//!
//! `design.bin`: magic `SNMD`, u32 version, u64 rows, u64 cols (all little
//! endian), then `rows·cols` f32 LE values in row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{atomic_write, read_json, write_json};
use crate::dataset::CohortDataset;
use crate::error::{Error, Result};
use crate::losses::SurvivalLabel;
use crate::math::Matrix;
use crate::preprocess::{DropRecord, ModalityBlock, PreprocessConfig};

pub const DESIGN_MAGIC: &[u8; 4] = b"SNMD";
pub const DESIGN_VERSION: u32 = 1;
pub const DESIGN_FILE: &str = "design.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub id: String,
    pub cancer_type: String,
    pub class: usize,
    pub os_days: f64,
    pub event: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub n_samples: usize,
    pub n_features: usize,
    pub cancers: Vec<String>,
    pub blocks: Vec<ModalityBlock>,
    pub samples: Vec<SampleInfo>,
    pub dropped: Vec<DropRecord>,
    pub preprocess: PreprocessConfig,
}

pub fn encode_design(x: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * x.data().len());
    out.extend_from_slice(DESIGN_MAGIC);
    out.extend_from_slice(&DESIGN_VERSION.to_le_bytes());
    out.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(x.cols() as u64).to_le_bytes());
    for &v in x.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_design(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != DESIGN_MAGIC {
        return Err(Error::Format("not a design matrix (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != DESIGN_VERSION {
        return Err(Error::Format(format!("unsupported design matrix version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let body = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("design matrix dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "design matrix body is {} bytes, {rows}x{cols} needs {expected}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Writes `design.bin` then `manifest.json`, each atomically.
pub fn write_dataset(dir: &Path, x: &Matrix, manifest: &Manifest) -> Result<()> {
    if x.rows() != manifest.n_samples || x.cols() != manifest.n_features {
        return Err(Error::Contract("manifest does not describe the design matrix".into()));
    }
    atomic_write(&dir.join(DESIGN_FILE), &encode_design(x))?;
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

pub fn load_dataset(dir: &Path) -> Result<(CohortDataset, Manifest)> {
    let design = dir.join(DESIGN_FILE);
    if !design.exists() {
        return Err(Error::Ingestion(format!(
            "{} not found; run `ingest` first",
            design.display()
        )));
    }
    let bytes = std::fs::read(&design).map_err(|e| Error::io(&design, e))?;
    let x = decode_design(&bytes)?;
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.n_samples != x.rows()
        || manifest.n_features != x.cols()
        || manifest.samples.len() != x.rows()
    {
        return Err(Error::Alignment(format!(
            "manifest describes {}x{}, design matrix is {}x{}",
            manifest.n_samples,
            manifest.n_features,
            x.rows(),
            x.cols()
        )));
    }
    let s = &manifest.samples;
    let ds = CohortDataset::new(
        x,
        s.iter().map(|i| i.id.clone()).collect(),
        s.iter().map(|i| i.cancer_type.clone()).collect(),
        s.iter().map(|i| SurvivalLabel::new(i.os_days, i.event)).collect(),
        s.iter().map(|i| i.class).collect(),
    )?;
    Ok((ds, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_round_trip() {
        let x = Matrix::from_rows(&[vec![1.0, -2.5, 0.0], vec![3.25, 1e-3, 7.0]]).unwrap();
        let bytes = encode_design(&x);
        assert_eq!(&bytes[..4], b"SNMD");
        let y = decode_design(&bytes).unwrap();
        assert_eq!(y.shape(), (2, 3));
        assert_eq!(encode_design(&y), bytes);
        assert!(decode_design(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_design(b"XXXX").is_err());
    }
}

//! Checkpoint files.
//!
//! Binary layout (little endian): magic `SNMO`, u32 format version, u32
//! layer count (encoder layers plus head), `(u32 n_in, u32 n_out)` per
//! layer, u8 head kind (0 survival, 1 classification), then every layer's
//! weights (row-major `n_in×n_out`) followed by its biases, as f32. A JSON
//! sidecar with the same stem holds the configuration and metrics.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{atomic_write, read_json, write_json, SCHEMA_VERSION};
use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::math::{ActivationConstants, Linear, Matrix};
use crate::model::{EncoderConfig, HeadKind, ModelParams};
use crate::training::TrainConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SNMO";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_EXT: &str = "snmo";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub schema_version: u32,
    pub task: Task,
    pub encoder: EncoderConfig,
    pub head: HeadKind,
    pub seed: u64,
    pub fold: Option<usize>,
    pub metrics: BTreeMap<String, f64>,
    pub train_config: Option<TrainConfig>,
}

impl CheckpointMeta {
    pub fn new(params: &ModelParams, task: Task, seed: u64, fold: Option<usize>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            task,
            encoder: params.config.clone(),
            head: params.head,
            seed,
            fold,
            metrics: BTreeMap::new(),
            train_config: None,
        }
    }
}

pub fn encode_params(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * params.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for l in &params.layers {
        out.extend_from_slice(&(l.n_in() as u32).to_le_bytes());
        out.extend_from_slice(&(l.n_out() as u32).to_le_bytes());
    }
    out.push(params.head.code());
    for l in &params.layers {
        for &v in l.weight.data().iter().chain(&l.bias) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

/// Decodes the layer tensors and head kind.
pub fn decode_params(bytes: &[u8]) -> Result<(Vec<Linear>, HeadKind)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n_layers = r.u32()? as usize;
    if n_layers < 2 {
        return Err(Error::Format(format!("checkpoint has {n_layers} layers, need >= 2")));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        shapes.push((r.u32()? as usize, r.u32()? as usize));
    }
    if shapes.windows(2).any(|w| w[0].1 != w[1].0) {
        return Err(Error::Format("checkpoint layer shapes do not chain".into()));
    }
    let head_out = shapes[n_layers - 1].1;
    let head = match r.take(1)?[0] {
        0 if head_out == 1 => HeadKind::Survival,
        1 => HeadKind::Classification { classes: head_out },
        code => {
            return Err(Error::Format(format!(
                "head kind {code} inconsistent with {head_out} outputs"
            )))
        }
    };
    let mut layers = Vec::with_capacity(n_layers);
    for (n_in, n_out) in shapes {
        let w = r.f32s(n_in * n_out)?;
        let bias = r.f32s(n_out)?;
        layers.push(Linear {
            weight: Matrix::from_vec(n_in, n_out, w)?,
            bias,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint body",
            bytes.len() - r.pos
        )));
    }
    Ok((layers, head))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Parameters as they will read back from disk (f32-rounded).
pub fn quantize(params: &ModelParams) -> ModelParams {
    let (layers, _) = decode_params(&encode_params(params)).expect("own encoding decodes");
    ModelParams {
        layers,
        ..params.clone()
    }
}

pub fn save_checkpoint(path: &Path, params: &ModelParams, meta: &CheckpointMeta) -> Result<()> {
    params.check_consistent()?;
    atomic_write(path, &encode_params(params))?;
    write_json(&sidecar_path(path), meta)
}

/// Loads a checkpoint; without a sidecar the architecture is inferred from
/// the binary with SELU and no dropout.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (layers, head) =
        decode_params(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let inferred = EncoderConfig::new(
        layers[0].n_in(),
        layers[..layers.len() - 1].iter().map(Linear::n_out).collect(),
    );
    let side = sidecar_path(path);
    let meta = if side.exists() {
        let meta: CheckpointMeta = read_json(&side)?;
        if meta.encoder.layer_shapes(meta.head) != inferred.layer_shapes(head) || meta.head != head {
            return Err(Error::Format(format!(
                "{} disagrees with the architecture in {}",
                side.display(),
                path.display()
            )));
        }
        meta
    } else {
        let task = match head {
            HeadKind::Survival => Task::Survival,
            HeadKind::Classification { .. } => Task::Classification,
        };
        CheckpointMeta {
            schema_version: SCHEMA_VERSION,
            task,
            encoder: inferred,
            head,
            seed: 0,
            fold: None,
            metrics: BTreeMap::new(),
            train_config: None,
        }
    };
    let params = ModelParams {
        config: meta.encoder.clone(),
        head,
        layers,
        consts: ActivationConstants::default(),
    };
    params.check_consistent()?;
    Ok((params, meta))
}

/// `path` itself if it is a file, else every `*.snmo` inside it, sorted.
pub fn checkpoint_paths(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut v: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(CHECKPOINT_EXT))
        .collect();
    v.sort();
    if v.is_empty() {
        return Err(Error::Contract(format!("no checkpoints in {}", path.display())));
    }
    Ok(v)
}

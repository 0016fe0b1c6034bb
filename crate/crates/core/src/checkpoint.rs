//! Single-file checkpoints: one line of JSON manifest, then the tensors as
//! little-endian f64 in manifest order.
//!
//! The manifest records the model configuration, the schema it was built
//! for (type and relation names), each tensor's name, shape and byte offset
//! into the blob, the optimizer constants, and free-form training metadata.
//! Encoding is deterministic, so save -> load -> save reproduces the bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GqeError, Result};
use crate::fsutil::write_atomic;
use crate::kgraph::TypedGraph;
use crate::model::{Mode, ModelParams, Psi, Variant};
use crate::numkernel::DenseMatrix;
use crate::training::{AdamConstants, TrainConfig};

pub const CHECKPOINT_FORMAT: &str = "gqe-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Byte offset into the blob that follows the manifest line.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub variant: Variant,
    pub psi: Psi,
    pub mode: Mode,
    pub dim: usize,
    pub node_types: Vec<String>,
    pub relations: Vec<String>,
    pub tensors: Vec<TensorEntry>,
    pub optimizer: AdamConstants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// Everything stored besides the tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckpointExtras {
    pub optimizer: AdamConstants,
    pub train_config: Option<TrainConfig>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

pub fn encode_checkpoint(params: &ModelParams, g: &TypedGraph, extras: &CheckpointExtras) -> Vec<u8> {
    let mut offset = 0;
    let tensors = params
        .tensors
        .iter()
        .zip(&params.names)
        .map(|(t, name)| {
            let e = TensorEntry {
                name: name.clone(),
                rows: t.rows(),
                cols: t.cols(),
                offset,
            };
            offset += 8 * t.len();
            e
        })
        .collect();
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        variant: params.variant,
        psi: params.psi,
        mode: params.mode,
        dim: params.dim,
        node_types: g.node_types().iter().map(|t| t.name.clone()).collect(),
        relations: g.relations().iter().map(|r| r.name.clone()).collect(),
        tensors,
        optimizer: extras.optimizer,
        train_config: extras.train_config.clone(),
        metadata: extras.metadata.clone(),
    };
    let mut out = serde_json::to_vec(&manifest).expect("manifest serializes");
    out.push(b'\n');
    out.reserve(offset);
    for t in &params.tensors {
        for x in t.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Reads only the manifest line.
pub fn decode_manifest(bytes: &[u8]) -> Result<(CheckpointManifest, &[u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| GqeError::Schema("checkpoint has no manifest line".into()))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes[..nl])?;
    if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
        return Err(GqeError::Schema("not a gqe checkpoint".into()));
    }
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != CHECKPOINT_VERSION {
        return Err(GqeError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    Ok((serde_json::from_value(value)?, &bytes[nl + 1..]))
}

pub fn decode_checkpoint(bytes: &[u8], g: &TypedGraph) -> Result<(ModelParams, CheckpointExtras)> {
    let (m, blob) = decode_manifest(bytes)?;
    let types: Vec<&str> = g.node_types().iter().map(|t| t.name.as_str()).collect();
    let rels: Vec<&str> = g.relations().iter().map(|r| r.name.as_str()).collect();
    if m.node_types != types || m.relations != rels {
        return Err(GqeError::Schema(
            "checkpoint was built for a different graph schema (node types or relations differ)".into(),
        ));
    }
    let expected_len: usize = m.tensors.iter().map(|t| 8 * t.rows * t.cols).sum();
    if blob.len() != expected_len {
        return Err(GqeError::Schema(format!(
            "checkpoint blob has {} bytes, manifest describes {expected_len}",
            blob.len()
        )));
    }
    let mut tensors = Vec::with_capacity(m.tensors.len());
    for e in &m.tensors {
        let n = e.rows * e.cols;
        let bytes = blob
            .get(e.offset..e.offset + 8 * n)
            .ok_or_else(|| GqeError::Schema(format!("tensor {} lies outside the blob", e.name)))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(DenseMatrix::from_vec(e.rows, e.cols, values)?);
    }
    let params = ModelParams::from_tensors(g, m.variant, m.psi, m.mode, m.dim, tensors)?;
    if params.names.iter().ne(m.tensors.iter().map(|t| &t.name)) {
        return Err(GqeError::Schema("checkpoint tensor names do not match the model layout".into()));
    }
    Ok((
        params,
        CheckpointExtras {
            optimizer: m.optimizer,
            train_config: m.train_config,
            metadata: m.metadata,
        },
    ))
}

/// Writes atomically; returns false when the file already held these bytes.
pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    g: &TypedGraph,
    extras: &CheckpointExtras,
) -> Result<bool> {
    write_atomic(path, &encode_checkpoint(params, g, extras))
}

pub fn load_checkpoint(path: &Path, g: &TypedGraph) -> Result<(ModelParams, CheckpointExtras)> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => GqeError::MissingInput {
            path: path.to_path_buf(),
            hint: "run `gqe train` first to produce a checkpoint".into(),
        },
        _ => GqeError::io(path, e),
    })?;
    decode_checkpoint(&bytes, g)
}

//! Binary parameter checkpoints.
//!
//! Layout: magic `AEOSMTCH`, `u32` version, `u64` metadata length, JSON
//! metadata (model config, feature layout, normalization stats, tensor names
//! and shapes), then every tensor as little-endian `f64` in column-major order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::MatcherError;
use crate::features::{FeatureLayout, NormStats};
use crate::model::{Matcher, ModelConfig};
use crate::tape::Mat;

const MAGIC: &[u8; 8] = b"AEOSMTCH";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    config: ModelConfig,
    layout: FeatureLayout,
    norm: NormStats,
    tau_s: f64,
    tensors: Vec<(String, usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Matcher,
    pub norm: NormStats,
    pub tau_s: f64,
}

pub fn write_checkpoint<W: Write>(
    mut out: W,
    model: &Matcher,
    norm: &NormStats,
    tau_s: f64,
) -> Result<(), MatcherError> {
    let meta = Meta {
        config: model.config,
        layout: model.layout.clone(),
        norm: norm.clone(),
        tau_s,
        tensors: model
            .param_names()
            .iter()
            .zip(model.params())
            .map(|(n, m)| (n.clone(), m.nrows(), m.ncols()))
            .collect(),
    };
    let json = serde_json::to_vec(&meta).map_err(|e| MatcherError::Checkpoint(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for m in model.params() {
        for v in m.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint. With `expected_layout`, a checkpoint built for a
/// different feature layout is refused.
pub fn read_checkpoint<R: Read>(
    mut input: R,
    expected_layout: Option<&FeatureLayout>,
) -> Result<Checkpoint, MatcherError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(MatcherError::Checkpoint("not a matcher checkpoint".into()));
    }
    let mut u32b = [0u8; 4];
    input.read_exact(&mut u32b)?;
    let version = u32::from_le_bytes(u32b);
    if version != CHECKPOINT_VERSION {
        return Err(MatcherError::Checkpoint(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let mut u64b = [0u8; 8];
    input.read_exact(&mut u64b)?;
    let len = u64::from_le_bytes(u64b) as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let meta: Meta = serde_json::from_slice(&json).map_err(|e| MatcherError::Checkpoint(e.to_string()))?;
    if let Some(layout) = expected_layout {
        if *layout != meta.layout {
            return Err(MatcherError::Layout(
                "checkpoint was trained on a different feature layout".into(),
            ));
        }
    }
    let mut named = Vec::with_capacity(meta.tensors.len());
    let mut buf = [0u8; 8];
    for (name, rows, cols) in &meta.tensors {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        named.push((name.clone(), Mat::from_vec(*rows, *cols, data)));
    }
    let mut model = Matcher::new(meta.config, meta.layout, 0)?;
    model.load_params(named)?;
    Ok(Checkpoint {
        model,
        norm: meta.norm,
        tau_s: meta.tau_s,
    })
}

pub fn save_checkpoint(path: &Path, model: &Matcher, norm: &NormStats, tau_s: f64) -> Result<(), MatcherError> {
    write_checkpoint(std::io::BufWriter::new(std::fs::File::create(path)?), model, norm, tau_s)
}

pub fn load_checkpoint(path: &Path, expected_layout: Option<&FeatureLayout>) -> Result<Checkpoint, MatcherError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?), expected_layout)
}

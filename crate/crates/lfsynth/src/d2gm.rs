//! Generator model files.

use std::fs;
use std::path::Path;

use lfsynth_core::synth::{GeneratorModel, Regime, SynthError, Tensor};

use crate::error::{Error, IoContext, Result};

pub const MAGIC: &[u8; 4] = b"D2GM";
pub const VERSION: u8 = 1;

/// Serialises with parameters rounded to `f32`.
pub fn encode(model: &GeneratorModel) -> Vec<u8> {
    let tensors = model.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, model.regime.code(), model.train_qp]);
    out.extend_from_slice(&(tensors.len() as u16).to_le_bytes());
    for t in tensors {
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn format_err(msg: &str) -> Error {
    Error::ModelFormatError(msg.to_string())
}

pub fn decode(bytes: &[u8]) -> Result<GeneratorModel> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = pos.checked_add(n).and_then(|end| bytes.get(pos..end)).ok_or_else(|| format_err("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(format_err("bad magic"));
    }
    let head = take(3)?;
    if head[0] != VERSION {
        return Err(format_err(&format!("unsupported version {}", head[0])));
    }
    let regime = Regime::from_code(head[1]).ok_or_else(|| format_err("unknown regime"))?;
    let train_qp = head[2];
    let count = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes"));
    let mut tensors = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let rank = take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| format_err("tensor too large"))?;
        let raw = take(n.checked_mul(4).ok_or_else(|| format_err("tensor too large"))?)?;
        let data: Vec<f64> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(format_err("non-finite parameter"));
        }
        tensors.push(Tensor::from_vec(&shape, data).expect("length matches shape"));
    }
    if take(1).is_ok() {
        return Err(format_err("trailing bytes"));
    }
    GeneratorModel::from_tensors(tensors, regime, train_qp).map_err(|e| match e {
        SynthError::ModelShapeError => Error::ModelShapeError("tensor list does not form a generator".into()),
        other => other.into(),
    })
}

pub fn save_model(path: &Path, model: &GeneratorModel) -> Result<()> {
    fs::write(path, encode(model)).at(path)
}

pub fn load_model(path: &Path) -> Result<GeneratorModel> {
    let bytes = fs::read(path).at(path)?;
    decode(&bytes)
}

/// Checks a loaded model against the sweep size and reference count expected at run time.
pub fn ensure_compatible(model: &GeneratorModel, n_sweep: usize, n_refs: usize) -> Result<()> {
    if model.n_sweep() != n_sweep || model.n_refs() != n_refs {
        return Err(Error::ModelShapeError(format!(
            "model has {} sweep levels and {} references, expected {n_sweep} and {n_refs}",
            model.n_sweep(),
            model.n_refs()
        )));
    }
    Ok(())
}

/// File name of the model for a regime and QP inside a model directory.
pub fn model_file_name(regime: Regime, qp: u8) -> String {
    match regime {
        Regime::PerQp => format!("model_qp{qp:02}.d2gm"),
        Regime::MixedReconstructed => "model_mixed.d2gm".into(),
        Regime::Original => "model_original.d2gm".into(),
    }
}

/// Resolves `path` (a file, or a directory of models) to the model for `qp`.
pub fn resolve_model(path: &Path, qp: u8) -> Option<std::path::PathBuf> {
    if path.is_file() {
        return Some(path.to_path_buf());
    }
    [Regime::PerQp, Regime::MixedReconstructed, Regime::Original]
        .into_iter()
        .map(|r| path.join(model_file_name(r, qp)))
        .find(|p| p.is_file())
}

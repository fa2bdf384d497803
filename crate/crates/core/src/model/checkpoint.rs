//! Checkpoint files.
//!
//! Layout: the 8-byte magic `MEGAECK1`, the header length as a little-endian
//! `u64`, a UTF-8 JSON header, then every weight as a little-endian `f64`.
//! Tensors are written row-major in the order listed in the header, which is
//! `W0_m, W1_m, W2_m` per channel followed by `W3`.

use super::train::TrainConfig;
use super::{ModelDims, ModelError, ModelParams};
use crate::frame::{FilterConfig, FrameSpec};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"MEGAECK1";
const MAX_HEADER: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub dims: ModelDims,
    pub slope: f64,
    pub frame: FrameSpec,
    pub filters: FilterConfig,
    pub train: TrainConfig,
    pub tensors: Vec<TensorInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub frame: FrameSpec,
    pub filters: FilterConfig,
    pub train: TrainConfig,
    pub params: ModelParams,
}

pub fn write_checkpoint<W: Write>(mut w: W, ck: &Checkpoint) -> Result<(), ModelError> {
    let p = &ck.params;
    let tensors = p
        .tensor_names()
        .into_iter()
        .zip(p.tensors())
        .map(|(name, t)| TensorInfo { name, rows: t.nrows(), cols: t.ncols() })
        .collect();
    let header = CheckpointHeader {
        dims: p.dims,
        slope: p.slope,
        frame: ck.frame.clone(),
        filters: ck.filters.clone(),
        train: ck.train.clone(),
        tensors,
    };
    let json = serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for t in p.tensors() {
        for v in t.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, ModelError> {
    let bad = |m: String| ModelError::Checkpoint(m);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > MAX_HEADER {
        return Err(bad(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|e| bad(format!("header: {e}")))?;

    let mut params = ModelParams::zeros(header.dims, header.slope);
    let names = params.tensor_names();
    if header.tensors.len() != names.len() {
        return Err(bad(format!("{} tensors listed, {} expected", header.tensors.len(), names.len())));
    }
    let mut buf = [0u8; 8];
    for ((info, name), t) in header.tensors.iter().zip(names).zip(params.tensors_mut()) {
        if info.name != name || (info.rows, info.cols) != t.dim() {
            return Err(bad(format!(
                "tensor {} ({}x{}) does not match {name} {:?}",
                info.name,
                info.rows,
                info.cols,
                t.dim()
            )));
        }
        let mut values = Vec::with_capacity(t.len());
        for _ in 0..t.len() {
            r.read_exact(&mut buf).map_err(|_| bad(format!("payload truncated in {name}")))?;
            values.push(f64::from_le_bytes(buf));
        }
        *t = Array2::from_shape_vec(t.raw_dim(), values).expect("length matches shape");
    }
    if r.read(&mut buf)? != 0 {
        return Err(bad("trailing bytes after payload".into()));
    }
    params.validate()?;
    Ok(Checkpoint { frame: header.frame, filters: header.filters, train: header.train, params })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), ModelError> {
    write_checkpoint(std::io::BufWriter::new(std::fs::File::create(path)?), ck)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

//! Binary model checkpoints.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 6     | magic `PLSTM` followed by version byte `0x01` |
//! | 16    | `u32` embedding rows, embedding width, hidden size, sequence length |
//! | rest  | every parameter block as row-major `f64` |
//!
//! Blocks follow the model's parameter order: the embedding table, then for
//! each branch (softmax, sigmoid, relu, tanh) the forward direction's input,
//! output, forget and candidate gates (`W`, `U`, `b` each), the same for the
//! backward direction, then the head weights and bias.
//!
//! Gate mode, aggregation and dropout rates are not stored; the loader takes
//! them from the run configuration.

use std::fs;
use std::path::Path;

use plstm::{Error, ModelConfig, ParallelModel, ParamSet, Result};

pub const MAGIC: &[u8; 5] = b"PLSTM";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 6 + 16;

pub fn encode_checkpoint(model: &ParallelModel) -> Vec<u8> {
    let count = model.param_count();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * count);
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    for dim in [
        model.vocab_size(),
        model.embed_dim(),
        model.hidden(),
        model.seq_len,
    ] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for b in 0..model.block_count() {
        for v in model.block(b) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

/// Rebuilds a model from checkpoint bytes. Dimensions come from the header;
/// everything else not stored comes from `template`.
pub fn decode_checkpoint(bytes: &[u8], template: &ModelConfig) -> Result<ParallelModel> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("wrong magic bytes".into()));
    }
    match bytes.get(MAGIC.len()) {
        Some(&VERSION) => {}
        Some(v) => return Err(Error::Checkpoint(format!("unsupported version {v}"))),
        None => return Err(Error::Checkpoint("truncated header".into())),
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checkpoint("truncated header".into()));
    }
    let dim = |i: usize| {
        let at = 6 + 4 * i;
        u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
    };
    let config = ModelConfig {
        vocab_size: dim(0),
        embed_dim: dim(1),
        hidden: dim(2),
        seq_len: dim(3),
        ..template.clone()
    };
    let expected = HEADER_LEN as u128 + 8 * params_u128(dim(0), dim(1), dim(2));
    let actual = bytes.len() as u128;
    if actual < expected {
        return Err(Error::Checkpoint(format!(
            "payload holds {actual} bytes, header implies {expected}"
        )));
    }
    if actual > expected {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the parameters",
            actual - expected
        )));
    }
    let mut model = ParallelModel::zeros(&config).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut words = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for b in 0..model.block_count() {
        for v in model.block_mut(b) {
            *v = words.next().expect("length checked above");
        }
    }
    Ok(model)
}

// The parameter count formula widened so a corrupt header cannot overflow.
fn params_u128(v: usize, e: usize, h: usize) -> u128 {
    let (v, e, h) = (v as u128, e as u128, h as u128);
    v * e + 4 * (8 * (h * e + h * h + h) + 2 * h + 2)
}

pub fn save_checkpoint(model: &ParallelModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>, template: &ModelConfig) -> Result<ParallelModel> {
    decode_checkpoint(&fs::read(path)?, template)
}

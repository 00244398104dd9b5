//! Checkpoint format: one JSON header line, a newline, then the flat
//! little-endian f64 weight blob in the order layer1 W,U,b; layer2 W,U,b;
//! dense W,b.

use super::{ModelParams, TrainConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "lstm-checkpoint-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub input: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub seed: u64,
    pub epoch: usize,
    pub config: TrainConfig,
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    config: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        input: params.layer1.input,
        hidden: params.layer1.hidden,
        dropout: params.dropout,
        seed: config.seed,
        epoch,
        config: config.clone(),
    };
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer(&mut file, &header)?;
    file.write_all(b"\n")?;
    for v in params.flatten() {
        file.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointHeader)> {
    let bytes = std::fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::InvalidConfig(format!("{}: missing header line", path.display())))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..newline])?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::InvalidConfig(format!(
            "unsupported checkpoint format `{}`",
            header.format
        )));
    }

    let blob = &bytes[newline + 1..];
    if blob.len() % 8 != 0 {
        return Err(Error::InvalidConfig("truncated weight blob".into()));
    }
    let mut flat = Vec::with_capacity(blob.len() / 8);
    let mut cursor = std::io::Cursor::new(blob);
    let mut buf = [0u8; 8];
    while cursor.read_exact(&mut buf).is_ok() {
        flat.push(f64::from_le_bytes(buf));
    }

    let expected = {
        let h = header.hidden;
        let m = header.input;
        4 * h * m + 4 * h * h + 4 * h + 4 * h * h + 4 * h * h + 4 * h + h + 1
    };
    if flat.len() != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{expected} weights"),
            got: format!("{}", flat.len()),
        });
    }
    let params = ModelParams::from_flat(header.input, header.hidden, header.dropout, &flat);
    Ok((params, header))
}

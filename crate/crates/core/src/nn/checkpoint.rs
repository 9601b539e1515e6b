//! Model checkpoints.
//!
//! Layout: the magic `GTDA1`, a little-endian `u32` byte length followed by
//! a UTF-8 `key=value` config block, a little-endian `u64` parameter count,
//! then the parameters as little-endian `f64`.

use std::path::Path;

use super::{init_model, Cnn, ModelConfig};
use crate::error::{GtdaError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"GTDA1";

fn config_block(config: &ModelConfig) -> String {
    let channels: Vec<String> = config.channels.iter().map(|c| c.to_string()).collect();
    format!(
        "input_size={}\nchannels={}\nseed={}\n",
        config.input_size,
        channels.join(","),
        config.seed
    )
}

pub fn write_checkpoint(model: &Cnn, path: &Path) -> Result<()> {
    let block = config_block(model.config());
    let mut buf = Vec::with_capacity(32 + block.len() + 8 * model.num_params());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(block.len() as u32).to_le_bytes());
    buf.extend_from_slice(block.as_bytes());
    buf.extend_from_slice(&(model.num_params() as u64).to_le_bytes());
    for p in model.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| GtdaError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Cnn> {
    let bytes = std::fs::read(path).map_err(|e| GtdaError::io(path, e))?;
    let bad = |msg: &str| GtdaError::Data(format!("{}: {msg}", path.display()));
    let mut rest = bytes
        .strip_prefix(CHECKPOINT_MAGIC.as_slice())
        .ok_or_else(|| bad("not a GTDA1 checkpoint"))?;
    let mut take = |n: usize| -> Result<&[u8]> {
        if rest.len() < n {
            return Err(bad("truncated checkpoint"));
        }
        let (head, tail) = rest.split_at(n);
        rest = tail;
        Ok(head)
    };
    let block_len = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let block = std::str::from_utf8(take(block_len)?).map_err(|_| bad("config block is not UTF-8"))?;
    let mut config = ModelConfig::default();
    for line in block.lines() {
        let (key, value) = line.split_once('=').ok_or_else(|| bad("malformed config line"))?;
        match key {
            "input_size" => config.input_size = value.parse().map_err(|_| bad("bad input_size"))?,
            "seed" => config.seed = value.parse().map_err(|_| bad("bad seed"))?,
            "channels" => {
                config.channels = value
                    .split(',')
                    .map(|c| c.parse().map_err(|_| bad("bad channels")))
                    .collect::<Result<_>>()?
            }
            _ => return Err(bad(&format!("unknown config key {key:?}"))),
        }
    }
    let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let raw = take(count * 8)?;
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut model = init_model(&config)?;
    model.set_params(params)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gtda");
        let cfg = ModelConfig { input_size: 16, channels: vec![3, 4], seed: 9 };
        let m = init_model(&cfg).unwrap();
        write_checkpoint(&m, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"GTDA1");
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.config(), m.config());
        assert_eq!(back.params(), m.params());

        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_checkpoint(&path).is_err());
        std::fs::write(&path, b"GTDA2....").unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}

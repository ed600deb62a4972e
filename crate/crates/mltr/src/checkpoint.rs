//! Parameter checkpoints and the training-state sidecar.
//!
//! Binary layout, all integers little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8 | magic `MLTRCKPT` |
//! | 4 | format version (`u32`) |
//! | 8 | seed (`u64`) |
//! | 4 + n | spec tag length (`u32`) and UTF-8 tag, e.g. `mlp-46-64-32-1` |
//! | 8 | value count (`u64`) |
//! | 8 each | values as IEEE-754 `f64` bit patterns |
//!
//! The text form carries the same header as `key value` lines followed by one
//! value per line in shortest round-trip decimal.

use std::io::{Read, Write};
use std::path::Path;

use mltr_core::{ParameterVector, RankerSpec};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const MAGIC: &[u8; 8] = b"MLTRCKPT";
pub const VERSION: u32 = 1;
const TEXT_HEADER: &str = "mltr-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub params: ParameterVector,
}

fn bad(msg: impl Into<String>) -> AppError {
    AppError::Checkpoint(msg.into())
}

fn read_array<const N: usize>(src: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    src.read_exact(&mut buf).map_err(|e| bad(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn rebuild(tag: &str, values: Vec<f64>) -> Result<ParameterVector> {
    let spec = RankerSpec::from_tag(tag).map_err(|e| bad(format!("spec tag {tag:?}: {e}")))?;
    ParameterVector::for_spec(&spec, values).map_err(|e| bad(format!("values do not fit {tag}: {e}")))
}

impl Checkpoint {
    pub fn new(seed: u64, params: ParameterVector) -> Self {
        Self { seed, params }
    }

    pub fn write_binary(&self, sink: &mut impl Write) -> std::io::Result<()> {
        let tag = self.params.spec().tag();
        sink.write_all(MAGIC)?;
        sink.write_all(&VERSION.to_le_bytes())?;
        sink.write_all(&self.seed.to_le_bytes())?;
        sink.write_all(&(tag.len() as u32).to_le_bytes())?;
        sink.write_all(tag.as_bytes())?;
        sink.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for v in self.params.values() {
            sink.write_all(&v.to_bits().to_le_bytes())?;
        }
        sink.flush()
    }

    pub fn read_binary(src: &mut impl Read) -> Result<Self> {
        if &read_array::<8>(src)? != MAGIC {
            return Err(bad("not a binary checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(read_array(src)?);
        if version != VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let seed = u64::from_le_bytes(read_array(src)?);
        let tag_len = u32::from_le_bytes(read_array(src)?) as usize;
        if tag_len > 4096 {
            return Err(bad("spec tag too long"));
        }
        let mut tag = vec![0u8; tag_len];
        src.read_exact(&mut tag).map_err(|e| bad(format!("truncated checkpoint: {e}")))?;
        let tag = String::from_utf8(tag).map_err(|_| bad("spec tag is not UTF-8"))?;
        let count = u64::from_le_bytes(read_array(src)?) as usize;
        let expected = RankerSpec::from_tag(&tag).map_err(|e| bad(format!("spec tag {tag:?}: {e}")))?.num_params();
        if count != expected {
            return Err(bad(format!("{tag} has {expected} parameters, checkpoint stores {count}")));
        }
        let values = (0..count)
            .map(|_| read_array::<8>(src).map(|b| f64::from_bits(u64::from_le_bytes(b))))
            .collect::<Result<Vec<_>>>()?;
        let mut rest = [0u8; 1];
        if src.read(&mut rest).map_err(|e| AppError::io("reading checkpoint", e))? != 0 {
            return Err(bad("trailing bytes after checkpoint values"));
        }
        Ok(Self {
            seed,
            params: rebuild(&tag, values)?,
        })
    }

    pub fn write_text(&self, sink: &mut impl Write) -> std::io::Result<()> {
        writeln!(sink, "{TEXT_HEADER} {VERSION}")?;
        writeln!(sink, "seed {}", self.seed)?;
        writeln!(sink, "spec {}", self.params.spec().tag())?;
        writeln!(sink, "values {}", self.params.len())?;
        for v in self.params.values() {
            writeln!(sink, "{v:?}")?;
        }
        sink.flush()
    }

    pub fn read_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key} line")))?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(|r| r.trim().to_string())
                .ok_or_else(|| bad(format!("expected `{key} ...`, found {line:?}")))
        };
        let version: u32 = field(TEXT_HEADER)?.parse().map_err(|_| bad("bad version"))?;
        if version != VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let seed = field("seed")?.parse().map_err(|_| bad("bad seed"))?;
        let tag = field("spec")?;
        let count: usize = field("values")?.parse().map_err(|_| bad("bad value count"))?;
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|_| bad(format!("bad value {l:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(bad(format!("header declares {count} values, found {}", values.len())));
        }
        Ok(Self {
            seed,
            params: rebuild(&tag, values)?,
        })
    }

    /// Writes the binary form, or the text form when the extension is `txt`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| AppError::io(format!("creating {}", path.display()), e))?;
        let mut w = std::io::BufWriter::new(file);
        let res = if is_text(path) {
            self.write_text(&mut w)
        } else {
            self.write_binary(&mut w)
        };
        res.map_err(|e| AppError::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| AppError::io(format!("reading {}", path.display()), e))?;
        if bytes.starts_with(MAGIC) {
            Self::read_binary(&mut bytes.as_slice())
        } else {
            let text = String::from_utf8(bytes).map_err(|_| bad(format!("{} is neither binary nor text", path.display())))?;
            Self::read_text(&text)
        }
    }
}

fn is_text(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "txt")
}

/// Training progress saved next to a checkpoint. Random streams are keyed by
/// `(seed, epoch, ...)`, so `seed` and `next_epoch` determine the generator
/// state for resuming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub seed: u64,
    pub spec: String,
    pub next_epoch: usize,
    pub best_epoch: Option<usize>,
    pub best_validation_ndcg: Option<f64>,
}

impl TrainingState {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("state serializes");
        std::fs::write(path, json + "\n").map_err(|e| AppError::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }
}

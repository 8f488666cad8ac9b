//! Checkpoint file: a line-oriented header followed by raw little-endian
//! `f32` tensor data in manifest order.
//!
//! ```text
//! timeaware-checkpoint 1
//! config {"vocab_size":...}
//! vocab_hash <hex | ->
//! vocab <n>
//! <n token lines>
//! tensors <m>
//! <name> <d0>x<d1>...
//! end
//! <binary>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Model, ModelConfig, ModelError, ParamStore, Tensor};
use crate::corpus::Vocab;

const MAGIC: &str = "timeaware-checkpoint 1";

/// Trained parameters with the vocabulary they were trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub vocab: Option<Vocab>,
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(mut w: W, ckpt: &Checkpoint) -> Result<(), ModelError> {
    let config = serde_json::to_string(&ckpt.model.config).map_err(|e| bad(e.to_string()))?;
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "config {config}")?;
    match &ckpt.vocab {
        Some(v) => {
            writeln!(w, "vocab_hash {}", v.hash())?;
            writeln!(w, "vocab {}", v.len())?;
            v.write(&mut w)?;
        }
        None => {
            writeln!(w, "vocab_hash -")?;
            writeln!(w, "vocab 0")?;
        }
    }
    let tensors = &ckpt.model.params.tensors;
    writeln!(w, "tensors {}", tensors.len())?;
    for t in tensors {
        let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
        writeln!(w, "{} {}", t.name, shape.join("x"))?;
    }
    writeln!(w, "end")?;
    for t in tensors {
        let mut buf = Vec::with_capacity(t.data.len() * 4);
        for x in &t.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn header_line<R: BufRead>(r: &mut R) -> Result<String, ModelError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(bad("truncated header"));
    }
    Ok(line.trim_end_matches('\n').to_string())
}

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str, ModelError> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| bad(format!("expected `{key}`, found {line:?}")))
}

fn count(s: &str) -> Result<usize, ModelError> {
    s.parse().map_err(|_| bad(format!("bad count {s:?}")))
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<Checkpoint, ModelError> {
    if header_line(&mut r)? != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let config: ModelConfig = serde_json::from_str(field(&header_line(&mut r)?, "config")?)
        .map_err(|e| bad(format!("config: {e}")))?;
    let hash = field(&header_line(&mut r)?, "vocab_hash")?.to_string();
    let n_vocab = count(field(&header_line(&mut r)?, "vocab")?)?;
    let vocab = if hash == "-" {
        if n_vocab != 0 {
            return Err(bad("vocabulary without hash"));
        }
        None
    } else {
        let mut lines = Vec::with_capacity(n_vocab);
        for _ in 0..n_vocab {
            lines.push(header_line(&mut r)?);
        }
        let v = Vocab::read(lines.join("\n").as_bytes())
            .map_err(|e| bad(format!("vocabulary: {e}")))?;
        if v.hash() != hash {
            return Err(bad("vocabulary hash mismatch"));
        }
        Some(v)
    };
    let n_tensors = count(field(&header_line(&mut r)?, "tensors")?)?;
    let mut manifest = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let line = header_line(&mut r)?;
        let (name, shape) = line
            .split_once(' ')
            .ok_or_else(|| bad(format!("bad manifest line {line:?}")))?;
        let shape = shape.split('x').map(count).collect::<Result<Vec<_>, _>>()?;
        manifest.push((name.to_string(), shape));
    }
    if header_line(&mut r)? != "end" {
        return Err(bad("missing end of header"));
    }
    let mut tensors = Vec::with_capacity(n_tensors);
    for (name, shape) in manifest {
        let n: usize = shape.iter().product();
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf)
            .map_err(|_| bad(format!("truncated data for {name}")))?;
        let data = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(Tensor { name, shape, data });
    }
    if !r.fill_buf()?.is_empty() {
        return Err(bad("trailing bytes after tensor data"));
    }
    let model = Model::from_params(config, ParamStore { tensors })?;
    if let Some(v) = &vocab {
        if v.len() != model.config.vocab_size {
            return Err(bad(format!(
                "vocabulary of {} tokens for vocab_size {}",
                v.len(),
                model.config.vocab_size
            )));
        }
    }
    Ok(Checkpoint { model, vocab })
}

/// Writes atomically: a temporary sibling file is renamed into place.
pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<(), ModelError> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp-ckpt");
    {
        let w = BufWriter::new(File::create(&tmp)?);
        write_checkpoint(w, ckpt)?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, ModelError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

//! Binary checkpoint format:
//!
//! ```text
//! "VRAE" | version u32 | latent u32 | hidden u32 | max_seq_len u32 | include_watch u32
//! repeated per tensor: rows u32 | cols u32 | rows*cols f64
//! crc32 u32 over every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::model::{ModelShape, VraeModel, VraeParams};
use super::SeqError;

pub const MAGIC: &[u8; 4] = b"VRAE";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes(m: &VraeModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let s = &m.shape;
    for v in [
        FORMAT_VERSION,
        s.latent_dim as u32,
        s.hidden_size as u32,
        s.max_seq_len as u32,
        s.include_watch as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (_, [rows, cols], data) in m.params.tensors() {
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        for x in data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], SeqError> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(SeqError::CorruptCheckpoint("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SeqError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, SeqError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<VraeModel, SeqError> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(SeqError::CorruptCheckpoint("missing VRAE magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(SeqError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 12 {
        return Err(SeqError::CorruptCheckpoint("too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(SeqError::CorruptCheckpoint("checksum mismatch".into()));
    }
    let mut cur = Cursor { buf: body, pos: 8 };
    let latent_dim = cur.u32()? as usize;
    let hidden_size = cur.u32()? as usize;
    let max_seq_len = cur.u32()? as usize;
    let include_watch = match cur.u32()? {
        0 => false,
        1 => true,
        other => return Err(SeqError::CorruptCheckpoint(format!("bad watch flag {other}"))),
    };
    let mut params = VraeParams::zeros(hidden_size, latent_dim);
    let expected: Vec<[usize; 2]> = params.tensors().iter().map(|t| t.1).collect();
    for (tensor, shape) in params.tensors_mut().into_iter().zip(expected) {
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        if [rows, cols] != shape {
            return Err(SeqError::CorruptCheckpoint(format!(
                "tensor shape {rows}x{cols}, expected {}x{}",
                shape[0], shape[1]
            )));
        }
        for x in tensor.iter_mut() {
            *x = cur.f64()?;
        }
    }
    if cur.pos != body.len() {
        return Err(SeqError::CorruptCheckpoint("trailing bytes".into()));
    }
    Ok(VraeModel {
        shape: ModelShape {
            latent_dim,
            hidden_size,
            max_seq_len,
            include_watch,
        },
        params,
    })
}

pub fn save_model(m: &VraeModel, path: &Path) -> Result<(), SeqError> {
    fs::write(path, to_bytes(m))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<VraeModel, SeqError> {
    from_bytes(&fs::read(path)?)
}

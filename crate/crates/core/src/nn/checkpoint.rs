//! Parameter checkpoint container.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      8 bytes   "POSEGAIL"
//! version    u32       1
//! precision  u8        0 = 64-bit values, 1 = 32-bit values
//! count      u32       number of named tensors
//! count records:
//!   name_len u32, name (UTF-8 bytes)
//!   rank     u32, extents (u64 each)
//!   values   f64 or f32 each, row-major
//! ```

use std::fs;
use std::path::Path;

use super::params::ParamSet;
use crate::autodiff::{Precision, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"POSEGAIL";
pub const VERSION: u32 = 1;

pub fn encode(params: &ParamSet, precision: Precision) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match precision {
        Precision::Test => 0,
        Precision::Train => 1,
    });
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for &v in t.data() {
            match precision {
                Precision::Test => out.extend_from_slice(&v.to_le_bytes()),
                Precision::Train => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(ParamSet, Precision)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let precision = match r.take(1)?[0] {
        0 => Precision::Test,
        1 => Precision::Train,
        p => return Err(Error::Checkpoint(format!("unknown precision tag {p}"))),
    };
    let count = r.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u64().map(|e| e as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = match precision {
            Precision::Test => r
                .take(8 * n)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            Precision::Train => r
                .take(4 * n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        };
        let t = Tensor::new(&shape, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        params.push(&name, t)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((params, precision))
}

pub fn save(path: &Path, params: &ParamSet, precision: Precision) -> Result<()> {
    fs::write(path, encode(params, precision))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ParamSet, Precision)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode(&fs::read(path)?)
}

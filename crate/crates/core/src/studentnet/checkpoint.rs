//! Binary checkpoint format.
//!
//! ```text
//! magic   b"FDSTNET\0"
//! u32     version (1)
//! u32     byte-order mark 0x01020304
//! u64 x4  input_channels, base_width, levels, seed
//! u32     tensor count
//! per tensor: u32 name_len, name bytes, u32 rank, u64 dims[rank], f64 values[...]
//! u64     FNV-1a 64 of every preceding byte
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use super::net::{NetConfig, StudentNet};
use super::params::ParamSet;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"FDSTNET\0";
const VERSION: u32 = 1;
const BYTE_ORDER_MARK: u32 = 0x0102_0304;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn encode_checkpoint(net: &StudentNet) -> Vec<u8> {
    let cfg = net.config();
    let params = net.params();
    let mut out = Vec::with_capacity(64 + params.total_len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&BYTE_ORDER_MARK.to_le_bytes());
    for v in [cfg.input_channels as u64, cfg.base_width as u64, cfg.levels as u64, cfg.seed] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for i in 0..params.len() {
        let name = params.name(i).as_bytes();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(params.shape(i).len() as u32).to_le_bytes());
        for &d in params.shape(i) {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in params.values(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Corrupt("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Corrupt("size overflows usize".into()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<StudentNet> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a student checkpoint (bad magic)".into()));
    }
    if bytes.len() < 8 + 8 + 8 {
        return Err(Error::Corrupt("checkpoint truncated".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let mut r = Reader { bytes: body, pos: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Unsupported(format!("checkpoint version {version}")));
    }
    if r.u32()? != BYTE_ORDER_MARK {
        return Err(Error::Format("checkpoint byte-order mark mismatch".into()));
    }
    if fnv1a(body) != stored {
        return Err(Error::Corrupt("checkpoint checksum mismatch".into()));
    }
    let config = NetConfig { input_channels: r.usize()?, base_width: r.usize()?, levels: r.usize()?, seed: r.u64()? };
    config.validate()?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| Error::Corrupt("parameter name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(Error::Corrupt(format!("parameter `{name}` has rank {rank}")));
        }
        let dims = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= body.len()))
            .ok_or_else(|| Error::Corrupt(format!("parameter `{name}` is larger than the file")))?;
        let raw = r.take(n * 8)?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        tensors.push((name, dims, values));
    }
    if r.pos != body.len() {
        return Err(Error::Corrupt("trailing bytes after parameter table".into()));
    }
    let params = ParamSet::from_tensors(tensors).expect("counts derived from shapes");
    StudentNet::from_parts(config, params)
}

pub fn save_checkpoint(net: &StudentNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<StudentNet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

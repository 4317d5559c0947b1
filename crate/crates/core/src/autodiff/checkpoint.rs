use std::collections::BTreeMap;

use super::{AutodiffError, ParamStore, Tensor};

const MAGIC: &[u8; 8] = b"HIPCKPT\n";
const VERSION: u32 = 1;

/// Serializes parameters (not optimizer state) with string metadata.
///
/// Layout, all integers little-endian: magic, `u32` version, `u32` metadata
/// count and length-prefixed key/value pairs, `u32` array count, then per
/// array a length-prefixed name, `u32` rank, `u64` dims and `f64` values.
pub fn write_checkpoint(store: &ParamStore, metadata: &BTreeMap<String, String>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let put_str = |out: &mut Vec<u8>, s: &str| {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    };
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    for (k, v) in metadata {
        put_str(&mut out, k);
        put_str(&mut out, v);
    }
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (i, name) in store.names().iter().enumerate() {
        let t = store.value_at(i);
        put_str(&mut out, name);
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], AutodiffError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            AutodiffError::Checkpoint(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, AutodiffError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, AutodiffError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, what: &str) -> Result<String, AutodiffError> {
        let n = self.u32(what)? as usize;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| AutodiffError::Checkpoint(format!("{what} is not UTF-8")))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(ParamStore, BTreeMap<String, String>), AutodiffError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8, "magic")? != MAGIC {
        return Err(AutodiffError::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(AutodiffError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut metadata = BTreeMap::new();
    for _ in 0..c.u32("metadata count")? {
        let k = c.string("metadata key")?;
        let v = c.string("metadata value")?;
        metadata.insert(k, v);
    }
    let mut store = ParamStore::new();
    for _ in 0..c.u32("array count")? {
        let name = c.string("array name")?;
        let rank = c.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u64("dimension")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= bytes.len() / 8)
            .ok_or_else(|| AutodiffError::Checkpoint(format!("array `{name}` is implausibly large")))?;
        let raw = c.take(n * 8, "array values")?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        store.insert(&name, Tensor::new(shape, data)?)?;
    }
    if c.pos != bytes.len() {
        return Err(AutodiffError::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    Ok((store, metadata))
}

//! Binary index file.
//!
//! ```text
//! magic   "T1IX"
//! version u16
//! dim     u32
//! count   u64
//! count × { id_len u16, id bytes (UTF-8), dim × f32 }
//! crc32   u32   over every preceding byte
//! ```
//! All integers and reals are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Index, IndexEntry};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const INDEX_MAGIC: &[u8; 4] = b"T1IX";
pub const INDEX_VERSION: u16 = 1;

pub fn encode_index<T: Real>(index: &Index<T>) -> Result<Vec<u8>> {
    let per_entry = 2 + 4 * index.dim();
    let mut buf = Vec::with_capacity(18 + index.len() * (per_entry + 16) + 4);
    buf.extend_from_slice(INDEX_MAGIC);
    buf.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    buf.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for entry in index.entries() {
        let id = entry.doc_id.as_bytes();
        let id_len = u16::try_from(id.len())
            .map_err(|_| Error::invalid(format!("doc id longer than {} bytes", u16::MAX)))?;
        buf.extend_from_slice(&id_len.to_le_bytes());
        buf.extend_from_slice(id);
        for v in entry.embedding.values() {
            let x = v
                .to_f32()
                .ok_or_else(|| Error::invalid("value not representable as f32"))?;
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or(Error::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode_index<T: Real>(bytes: &[u8]) -> Result<Index<T>> {
    if bytes.len() < INDEX_MAGIC.len() || &bytes[..4] != INDEX_MAGIC {
        return Err(Error::BadMagic);
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let version = u16::from_le_bytes(cur.array("header")?);
    if version != INDEX_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(cur.array("header")?) as usize;
    let count = u64::from_le_bytes(cur.array("header")?);
    if dim == 0 {
        return Err(Error::invalid("index dimension is zero"));
    }

    let mut entries = Vec::new();
    for _ in 0..count {
        let id_len = u16::from_le_bytes(cur.array("entry id length")?) as usize;
        let id = std::str::from_utf8(cur.take(id_len, "entry id")?)
            .map_err(|_| Error::invalid("doc id is not UTF-8"))?
            .to_owned();
        let raw = cur.take(4 * dim, "entry values")?;
        let values = raw
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64))
            .collect();
        entries.push(IndexEntry::new(id, Embedding::from_stored(values, true)?));
    }

    let body_end = cur.pos;
    let stored = u32::from_le_bytes(cur.array("checksum")?);
    if cur.pos != bytes.len() {
        return Err(Error::invalid("trailing bytes after checksum"));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let mut ids = std::collections::HashSet::with_capacity(entries.len());
    for e in &entries {
        if !ids.insert(e.doc_id.as_str()) {
            return Err(Error::DuplicateId(e.doc_id.clone()));
        }
    }
    Ok(Index::from_loaded(dim, entries))
}

pub fn save_index<T: Real>(index: &Index<T>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_index(index)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn load_index<T: Real>(path: impl AsRef<Path>) -> Result<Index<T>> {
    decode_index(&fs::read(path)?)
}

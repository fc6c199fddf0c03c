//! RFT1 named-tensor container format.
//!
//! One binary format carries network weights, PCA models, classifier
//! parameters, and feature caches:
//!
//! ```text
//! magic  "RFT1"  (4 bytes)
//! count  u32 LE  (number of entries)
//! entry* :
//!   name_len  u16 LE
//!   name      UTF-8 bytes
//!   rank      u8      (>= 1)
//!   extents   rank x u32 LE  (each >= 1)
//!   values    product(extents) x f32 LE in canonical row-major order
//! ```
//!
//! Round-trips are bit-exact. Writes go through a temp file followed by
//! a rename, so a partially written container is never visible under the
//! target path.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"RFT1";

/// An ordered collection of named tensors.
///
/// Entry order is preserved exactly as inserted, and names are unique.
#[derive(Debug, Clone, Default)]
pub struct Container {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry. Replaces any previous tensor under the same name.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        match self.index.get(&name) {
            Some(&i) => self.entries[i].1 = tensor,
            None => {
                self.index.insert(name.clone(), self.entries.len());
                self.entries.push((name, tensor));
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    /// Like [`get`](Self::get) but failing with `MissingTensor`.
    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Serializes to the RFT1 byte layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let count = u32::try_from(self.entries.len())
            .map_err(|_| Error::InvalidConfig("too many container entries".into()))?;
        out.extend_from_slice(&count.to_le_bytes());
        for (name, tensor) in &self.entries {
            let name_len = u16::try_from(name.len()).map_err(|_| {
                Error::InvalidConfig(format!("entry name too long: {name:?}"))
            })?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let rank = u8::try_from(tensor.rank()).map_err(|_| {
                Error::InvalidConfig(format!("rank of {name:?} exceeds 255"))
            })?;
            out.push(rank);
            for &e in tensor.shape() {
                let e = u32::try_from(e).map_err(|_| {
                    Error::InvalidConfig(format!("extent of {name:?} exceeds u32"))
                })?;
                out.extend_from_slice(&e.to_le_bytes());
            }
            for &v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses the RFT1 byte layout.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::CorruptFile(format!(
                "bad magic {:?}, expected \"RFT1\"",
                &magic[..4.min(magic.len())]
            )));
        }
        let count = r.u32()?;
        let mut container = Container::new();
        for i in 0..count {
            let name_len = r.u16()? as usize;
            let name_bytes = r.take(name_len)?;
            let name = std::str::from_utf8(name_bytes)
                .map_err(|_| Error::CorruptFile(format!("entry {i}: name is not UTF-8")))?
                .to_string();
            let rank = r.u8()? as usize;
            if rank == 0 {
                return Err(Error::CorruptFile(format!("entry {name:?}: rank 0")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let e = r.u32()? as usize;
                if e == 0 {
                    return Err(Error::CorruptFile(format!(
                        "entry {name:?}: zero extent"
                    )));
                }
                shape.push(e);
            }
            let n: usize = shape.iter().try_fold(1usize, |acc, &e| {
                acc.checked_mul(e).ok_or_else(|| {
                    Error::CorruptFile(format!("entry {name:?}: extent overflow"))
                })
            })?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| {
                Error::CorruptFile(format!("entry {name:?}: size overflow"))
            })?)?;
            let mut data = Vec::with_capacity(n);
            for chunk in raw.chunks_exact(4) {
                data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
            }
            if container.get(&name).is_some() {
                return Err(Error::CorruptFile(format!("duplicate entry {name:?}")));
            }
            container.insert(name, Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::CorruptFile(format!(
                "{} trailing bytes after last entry",
                bytes.len() - r.pos
            )));
        }
        Ok(container)
    }

    /// Reads a container file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::CorruptFile(msg) => {
                Error::CorruptFile(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    /// Writes a container file atomically (temp file + rename).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        write_atomic(path, &bytes)
    }
}

/// Writes `bytes` to `path` via a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(bytes)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::CorruptFile(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

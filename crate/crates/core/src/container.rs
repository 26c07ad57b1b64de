//! SPWT tensor container: the on-disk format for checkpoints and masks.
//!
//! Layout, all multi-byte integers little-endian:
//!
//! ```text
//! offset 0   magic bytes "SPWT"
//! offset 4   format version, u32 (currently 1)
//! offset 8   header length in bytes, u64
//! offset 16  JSON header (UTF-8, exactly `header length` bytes)
//! ...        zero padding up to the next 64-byte boundary
//! ...        tensor blobs, each starting on a 64-byte boundary
//! ```
//!
//! The JSON header holds `entries` (sorted by tensor name, offsets absolute
//! within the file) and a free-form `metadata` object. Serialization is
//! byte-deterministic: entries are sorted, metadata keys are sorted, and a
//! write -> read -> write cycle reproduces the file exactly. Writes go
//! through a temp file in the destination directory followed by a rename, so
//! a crash never leaves a half-written container behind.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SPWT";
pub const VERSION: u32 = 1;
pub const ALIGNMENT: usize = 64;

/// Element type of a stored tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::U8 => 1,
        }
    }
}

/// A named tensor: dtype, shape, and raw little-endian bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dtype: Dtype,
    shape: Vec<usize>,
    bytes: Vec<u8>,
}

impl Tensor {
    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        Self::check_len(&shape, values.len())?;
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Ok(Tensor { dtype: Dtype::F64, shape, bytes })
    }

    pub fn from_f32(shape: Vec<usize>, values: &[f32]) -> Result<Self> {
        Self::check_len(&shape, values.len())?;
        let mut bytes = Vec::with_capacity(values.len() * 4);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Ok(Tensor { dtype: Dtype::F32, shape, bytes })
    }

    pub fn from_u8(shape: Vec<usize>, values: &[u8]) -> Result<Self> {
        Self::check_len(&shape, values.len())?;
        Ok(Tensor { dtype: Dtype::U8, shape, bytes: values.to_vec() })
    }

    fn check_len(shape: &[usize], len: usize) -> Result<()> {
        let expected: usize = shape.iter().product();
        if expected != len {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {expected} elements, got {len}"
            )));
        }
        Ok(())
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn raw_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn as_f64(&self) -> Result<Vec<f64>> {
        if self.dtype != Dtype::F64 {
            return Err(Error::Format(format!("expected f64 tensor, found {:?}", self.dtype)));
        }
        Ok(self
            .bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn as_f32(&self) -> Result<Vec<f32>> {
        if self.dtype != Dtype::F32 {
            return Err(Error::Format(format!("expected f32 tensor, found {:?}", self.dtype)));
        }
        Ok(self
            .bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn as_u8(&self) -> Result<&[u8]> {
        if self.dtype != Dtype::U8 {
            return Err(Error::Format(format!("expected u8 tensor, found {:?}", self.dtype)));
        }
        Ok(&self.bytes)
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderEntry {
    dtype: Dtype,
    length: u64,
    name: String,
    offset: u64,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    entries: Vec<HeaderEntry>,
    metadata: BTreeMap<String, serde_json::Value>,
}

/// In-memory container: named tensors plus JSON metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    tensors: BTreeMap<String, Tensor>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

fn align_up(x: usize) -> usize {
    x.div_ceil(ALIGNMENT) * ALIGNMENT
}

impl Container {
    pub fn new() -> Self {
        Container::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Fetch a tensor, reporting a format error naming the missing tensor.
    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::Format(format!("missing tensor '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Set a metadata key to any JSON-serializable value.
    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Serialize) -> Result<()> {
        self.metadata.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).and_then(|v| v.as_str())
    }

    pub fn meta_u64(&self, key: &str) -> Option<u64> {
        self.metadata.get(key).and_then(|v| v.as_u64())
    }

    /// Serialize to the SPWT byte layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        // The header embeds absolute blob offsets, and those offsets depend
        // on the header's own length, so iterate to a fixed point. Offsets
        // grow monotonically with header size, so this settles fast.
        let mut data_start = ALIGNMENT.max(align_up(16));
        let header_json = loop {
            let header = self.header_at(data_start);
            let json = serde_json::to_vec(&header)?;
            let settled = align_up(16 + json.len());
            if settled == data_start {
                break json;
            }
            data_start = settled;
        };

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_json);
        out.resize(data_start, 0);
        for tensor in self.tensors.values() {
            out.resize(align_up(out.len()), 0);
            out.extend_from_slice(&tensor.bytes);
        }
        Ok(out)
    }

    fn header_at(&self, data_start: usize) -> Header {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut cursor = data_start;
        for (name, tensor) in &self.tensors {
            cursor = align_up(cursor);
            entries.push(HeaderEntry {
                dtype: tensor.dtype,
                length: tensor.bytes.len() as u64,
                name: name.clone(),
                offset: cursor as u64,
                shape: tensor.shape.clone(),
            });
            cursor += tensor.bytes.len();
        }
        Header { entries, metadata: self.metadata.clone() }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Format("file too short for SPWT header".into()));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic, not an SPWT container".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {version}, expected {VERSION}"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header_end = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format("header length exceeds file size".into()))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| Error::Format(format!("invalid header JSON: {e}")))?;

        let mut tensors = BTreeMap::new();
        let mut previous_name: Option<&str> = None;
        for entry in &header.entries {
            if let Some(prev) = previous_name {
                if entry.name.as_str() <= prev {
                    return Err(Error::Format(format!(
                        "entries not sorted: '{}' after '{prev}'",
                        entry.name
                    )));
                }
            }
            previous_name = Some(&entry.name);

            let offset = entry.offset as usize;
            let length = entry.length as usize;
            if offset % ALIGNMENT != 0 {
                return Err(Error::Format(format!(
                    "tensor '{}' offset {offset} not {ALIGNMENT}-byte aligned",
                    entry.name
                )));
            }
            let end = offset
                .checked_add(length)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| {
                    Error::Format(format!("tensor '{}' extends past end of file", entry.name))
                })?;
            let expected: usize = entry.shape.iter().product::<usize>() * entry.dtype.size();
            if expected != length {
                return Err(Error::Format(format!(
                    "tensor '{}': shape {:?} with dtype {:?} needs {expected} bytes, header says {length}",
                    entry.name, entry.shape, entry.dtype
                )));
            }
            tensors.insert(
                entry.name.clone(),
                Tensor {
                    dtype: entry.dtype,
                    shape: entry.shape.clone(),
                    bytes: bytes[offset..end].to_vec(),
                },
            );
        }
        Ok(Container { tensors, metadata: header.metadata })
    }

    /// Write atomically: serialize to a temp file in the target directory,
    /// then rename over the destination.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

/// Write `bytes` to `path` via a temp file in the same directory plus
/// rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

//! Versioned tensor container shared by generator and ranker checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic (7 bytes) | format_version | config_len | config JSON (canonical)
//! tensor_count | { name_len | name | ndim | dims... | f32 LE data }*
//! ```
//!
//! The config JSON is serialized with sorted keys and no whitespace.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorRecord {
    pub fn from_f64(name: &str, shape: &[usize], data: &[f64]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        TensorRecord {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub magic: [u8; 7],
    pub format_version: u32,
    pub config: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

/// Canonical JSON text: object keys sorted, compact.
pub fn canonical_json(v: &serde_json::Value) -> String {
    // serde_json's default map is ordered by key.
    v.to_string()
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

impl Container {
    pub fn tensor(&self, name: &str) -> Result<&TensorRecord> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("missing tensor {name:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.magic);
        put_u32(&mut out, self.format_version as usize);
        let json = canonical_json(&self.config);
        put_u32(&mut out, json.len());
        out.extend_from_slice(json.as_bytes());
        put_u32(&mut out, self.tensors.len());
        for t in &self.tensors {
            put_u32(&mut out, t.name.len());
            out.extend_from_slice(t.name.as_bytes());
            put_u32(&mut out, t.shape.len());
            for &d in &t.shape {
                put_u32(&mut out, d);
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], expect_magic: &[u8; 7]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 7] = r.take(7)?.try_into().expect("7 bytes");
        if &magic != expect_magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(expect_magic)
            )));
        }
        let format_version = r.u32()?;
        let json_len = r.u32()? as usize;
        let config = serde_json::from_slice(r.take(json_len)?)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(TensorRecord { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Container {
            magic,
            format_version,
            config,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, expect_magic: &[u8; 7]) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Container::from_bytes(&bytes, expect_magic)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

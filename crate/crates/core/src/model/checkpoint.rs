use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::params::Model;
use crate::error::{Error, Result};
use crate::numeric::Tensor;

pub const MAGIC: &[u8; 7] = b"KEYNET1";

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("extent {v} too large")))
    }

    fn text(&mut self) -> Result<&'a str> {
        let n = self.u32()?;
        std::str::from_utf8(self.take(n)?)
            .map_err(|_| Error::Checkpoint(format!("invalid UTF-8 before byte {}", self.pos)))
    }
}

fn put_text(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl Model {
    /// Serializes the configuration and every parameter.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        let records = self.config.to_records();
        out.extend_from_slice(&(records.len() as u32).to_le_bytes());
        for (k, v) in &records {
            put_text(&mut out, &format!("{k}={v}"));
        }
        out.extend_from_slice(&(self.params().len() as u32).to_le_bytes());
        for (name, t) in self.names().iter().zip(self.params()) {
            put_text(&mut out, name);
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

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
            return Err(Error::Checkpoint("missing KEYNET1 header".into()));
        }
        let mut cfg = ModelConfig::default();
        for _ in 0..r.u32()? {
            let rec = r.text()?;
            let (k, v) = rec
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("record `{rec}` lacks `=`")))?;
            if !cfg.apply(k, v)? {
                return Err(Error::Checkpoint(format!("unknown record `{k}`")));
            }
        }
        let count = r.u32()?;
        let mut named = Vec::with_capacity(count);
        for _ in 0..count {
            let name = r.text()?.to_string();
            let ndim = r.u32()?;
            let shape = (0..ndim).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let raw = r.take(numel.checked_mul(8).ok_or_else(|| {
                Error::Checkpoint(format!("parameter `{name}` is too large"))
            })?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(&shape, data)
                .map_err(|e| Error::Checkpoint(format!("parameter `{name}`: {e}")))?;
            named.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Model::from_parts(cfg, named)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Cache key: SHA-256 of the model id, a zero byte, then the text.
pub(crate) fn content_key(model_id: &str, text: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0u8]);
    h.update(text.as_bytes());
    h.finalize().into()
}

/// Append-only on-disk embedding store.
///
/// Record layout: 32-byte key, `u32` little-endian dimension, then that many
/// little-endian `f32` values. Reads are concurrent; appends are serialized.
pub struct EmbeddingCache {
    path: PathBuf,
    entries: RwLock<HashMap<[u8; 32], Vec<f32>>>,
    writer: Mutex<File>,
    dim: RwLock<Option<usize>>,
}

impl EmbeddingCache {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        let mut dim = None;
        if path.exists() {
            let mut buf = Vec::new();
            File::open(&path)
                .and_then(|mut f| f.read_to_end(&mut buf))
                .map_err(|e| Error::io(&path, e))?;
            let mut at = 0;
            while at < buf.len() {
                if buf.len() - at < 36 {
                    return Err(Error::Cache(format!("truncated record at byte {at}")));
                }
                let key: [u8; 32] = buf[at..at + 32].try_into().expect("32 bytes");
                let d = u32::from_le_bytes(buf[at + 32..at + 36].try_into().expect("4 bytes"))
                    as usize;
                at += 36;
                if buf.len() - at < 4 * d {
                    return Err(Error::Cache(format!("truncated vector at byte {at}")));
                }
                match dim {
                    None => dim = Some(d),
                    Some(prev) if prev != d => {
                        return Err(Error::Cache(format!(
                            "mixed dimensions {prev} and {d} in {}",
                            path.display()
                        )))
                    }
                    _ => {}
                }
                let values = buf[at..at + 4 * d]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect();
                at += 4 * d;
                entries.insert(key, values);
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(EmbeddingCache {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(writer),
            dim: RwLock::new(dim),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &[u8; 32]) -> Option<Vec<f32>> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    /// Stores a vector; a vector whose dimension differs from the cached
    /// ones is an error.
    pub fn put(&self, key: &[u8; 32], values: &[f32]) -> Result<()> {
        {
            let mut dim = self.dim.write().expect("cache lock");
            match *dim {
                Some(d) if d != values.len() => {
                    return Err(Error::Cache(format!(
                        "dimension {} does not match cached dimension {d}",
                        values.len()
                    )))
                }
                None => *dim = Some(values.len()),
                _ => {}
            }
        }
        let mut writer = self.writer.lock().expect("cache writer lock");
        let mut entries = self.entries.write().expect("cache lock");
        if entries.contains_key(key) {
            return Ok(());
        }
        let mut rec = Vec::with_capacity(36 + 4 * values.len());
        rec.extend_from_slice(key);
        rec.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for v in values {
            rec.extend_from_slice(&v.to_le_bytes());
        }
        writer
            .write_all(&rec)
            .and_then(|_| writer.flush())
            .map_err(|e| Error::io(&self.path, e))?;
        entries.insert(*key, values.to_vec());
        Ok(())
    }
}

//! Content-addressed on-disk cache for expensive intermediate results.
//!
//! Layout: `<root>/<kind>/<hexkey>`. Writes go to a temporary file in the
//! target directory and are renamed into place, so readers never observe a
//! partially written entry.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CacheKind {
    Scu,
    Embedding,
    Generation,
}

impl CacheKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheKind::Scu => "scu",
            CacheKind::Embedding => "embedding",
            CacheKind::Generation => "generation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub kind: CacheKind,
    pub model_id: String,
    pub payload_hash: [u8; 32],
}

impl CacheKey {
    /// `payload` must already contain everything that determines the result
    /// besides the model (prompt version, prompt text, input text).
    pub fn new(kind: CacheKind, model_id: &str, payload: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(kind.as_str().as_bytes());
        h.update([0u8]);
        h.update(model_id.as_bytes());
        h.update([0u8]);
        h.update(payload);
        Self {
            kind,
            model_id: model_id.to_string(),
            payload_hash: h.finalize().into(),
        }
    }

    pub fn hex(&self) -> String {
        hex::encode(self.payload_hash)
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind.as_str(), self.hex())
    }
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, key: &CacheKey) -> PathBuf {
        self.root.join(key.kind.as_str()).join(key.hex())
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<Vec<u8>>> {
        let path = self.entry_path(key);
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn put(&self, key: &CacheKey, value: &[u8]) -> Result<()> {
        let dir = self.root.join(key.kind.as_str());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
        tmp.write_all(value).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file()
            .sync_all()
            .map_err(|e| Error::io(tmp.path(), e))?;
        let path = self.entry_path(key);
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    /// Decodes an entry with `decode`; undecodable entries count as misses.
    pub fn get_decoded<T>(
        &self,
        key: &CacheKey,
        decode: impl FnOnce(&[u8]) -> Option<T>,
    ) -> Result<Option<T>> {
        let Some(bytes) = self.get(key)? else {
            return Ok(None);
        };
        match decode(&bytes) {
            Some(v) => Ok(Some(v)),
            None => {
                log::warn!("ignoring corrupt cache entry {key}");
                Ok(None)
            }
        }
    }
}

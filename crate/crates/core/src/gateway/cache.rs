use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub model_id: String,
    pub prompt_hash: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub response_index: usize,
}

impl CacheKey {
    /// Field order is fixed by the struct definition, and serde_json writes
    /// floats in shortest round-trip form, so the text is stable.
    pub fn stable_text(&self) -> String {
        serde_json::to_string(self).expect("cache key serializes")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.stable_text().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub key: CacheKey,
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: corrupt entry: {message}")]
    Corrupt { path: PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> ResponseCache {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let hex = key.digest();
        self.root.join(&hex[..2]).join(format!("{hex}.json"))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CachedResponse>, CacheError> {
        let path = self.path_for(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(CacheError::Io { path, source }),
        };
        let entry: CachedResponse = serde_json::from_str(&text).map_err(|e| CacheError::Corrupt {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if entry.key != *key {
            return Err(CacheError::Corrupt {
                path,
                message: "stored key differs from requested key".into(),
            });
        }
        Ok(Some(entry))
    }

    /// Store a response unless one is already present for the key.
    pub fn put(&self, key: &CacheKey, text: &str) -> Result<(), CacheError> {
        let path = self.path_for(key);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("cache path has a parent");
        let io = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        let entry = CachedResponse {
            key: key.clone(),
            text: text.to_string(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(serde_json::to_string(&entry).expect("entry serializes").as_bytes())
            .map_err(io)?;
        // persist_noclobber keeps whichever concurrent writer landed first
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(()),
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => Ok(()),
            Err(e) => Err(io(e.error)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(i: usize) -> CacheKey {
        CacheKey {
            model_id: "m".into(),
            prompt_hash: "ab".repeat(32),
            temperature: 1.0,
            seed: Some(42),
            response_index: i,
        }
    }

    #[test]
    fn stable_serialization() {
        assert_eq!(
            key(3).stable_text(),
            format!(r#"{{"model_id":"m","prompt_hash":"{}","temperature":1.0,"seed":42,"response_index":3}}"#, "ab".repeat(32))
        );
        assert_ne!(key(0).digest(), key(1).digest());
    }

    #[test]
    fn layout_and_append_only() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(tmp.path());
        let k = key(0);
        assert!(cache.get(&k).unwrap().is_none());
        cache.put(&k, "first").unwrap();
        cache.put(&k, "second").unwrap();
        assert_eq!(cache.get(&k).unwrap().unwrap().text, "first");
        let path = cache.path_for(&k);
        let hex = k.digest();
        assert_eq!(path, tmp.path().join(&hex[..2]).join(format!("{hex}.json")));
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, EpisodicError};
use crate::providers::{Embedder, Embedding, ProviderError};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    identity: String,
    dimension: usize,
    entries: BTreeMap<String, Vec<f64>>,
}

fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Embedder wrapper that memoizes vectors by content hash and can persist
/// them to a sidecar file stamped with the embedder identity.
pub struct CachedEmbedder<E> {
    inner: E,
    entries: Mutex<BTreeMap<String, Vec<f64>>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            entries: Mutex::new(BTreeMap::new()),
        }
    }

    /// Loads a sidecar if it exists. A sidecar from another embedder or
    /// with another dimension is rejected.
    pub fn open(inner: E, path: &Path) -> Result<Self, EpisodicError> {
        let cached = Self::new(inner);
        if !path.exists() {
            return Ok(cached);
        }
        let raw = fs::read_to_string(path).map_err(io_err(path))?;
        let side: Sidecar = serde_json::from_str(&raw).map_err(|e| EpisodicError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if side.dimension != cached.inner.dimension() {
            return Err(ProviderError::DimensionMismatch {
                expected: cached.inner.dimension(),
                actual: side.dimension,
            }
            .into());
        }
        if side.identity != cached.inner.identity() {
            return Err(EpisodicError::CacheMismatch {
                expected: cached.inner.identity(),
                found: side.identity,
            });
        }
        if let Some(bad) = side.entries.values().find(|v| v.len() != side.dimension) {
            return Err(ProviderError::DimensionMismatch {
                expected: side.dimension,
                actual: bad.len(),
            }
            .into());
        }
        *cached.entries.lock().expect("embedding cache poisoned") = side.entries;
        Ok(cached)
    }

    pub fn save(&self, path: &Path) -> Result<(), EpisodicError> {
        let side = Sidecar {
            identity: self.inner.identity(),
            dimension: self.inner.dimension(),
            entries: self.entries.lock().expect("embedding cache poisoned").clone(),
        };
        fs::write(path, serde_json::to_string(&side).expect("sidecar serializes")).map_err(io_err(path))
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("embedding cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, ProviderError> {
        let keys: Vec<String> = texts.iter().map(|t| content_hash(t)).collect();
        let missing: Vec<&str> = {
            let entries = self.entries.lock().expect("embedding cache poisoned");
            let mut seen = std::collections::BTreeSet::new();
            texts
                .iter()
                .zip(&keys)
                .filter(|(_, k)| !entries.contains_key(*k) && seen.insert(k.as_str()))
                .map(|(t, _)| *t)
                .collect()
        };
        if !missing.is_empty() {
            let fresh = self.inner.embed_batch(&missing)?;
            let mut entries = self.entries.lock().expect("embedding cache poisoned");
            for (t, v) in missing.iter().zip(fresh) {
                entries.insert(content_hash(t), v.0);
            }
        }
        let entries = self.entries.lock().expect("embedding cache poisoned");
        Ok(keys.iter().map(|k| Embedding(entries[k].clone())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::HashEmbedder;

    #[test]
    fn round_trip_and_identity_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.json");
        let c = CachedEmbedder::new(HashEmbedder::new());
        let v = c.embed("red mug").unwrap();
        c.save(&path).unwrap();
        let back = CachedEmbedder::open(HashEmbedder::new(), &path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.embed("red mug").unwrap(), v);
        assert!(matches!(
            CachedEmbedder::open(HashEmbedder::with_seed(9), &path),
            Err(EpisodicError::CacheMismatch { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.json");
        fs::write(&path, r#"{"identity":"x","dimension":3,"entries":{}}"#).unwrap();
        assert!(matches!(
            CachedEmbedder::open(HashEmbedder::new(), &path),
            Err(EpisodicError::Provider(ProviderError::DimensionMismatch { .. }))
        ));
    }
}

use serde::{Deserialize, Serialize};

use super::ProviderError;
use crate::text::tokenize;

/// Dimension of the deterministic hash embedder.
pub const HASH_EMBED_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &Embedding, b: &Embedding) -> f64 {
    debug_assert_eq!(a.dimension(), b.dimension());
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

pub trait Embedder: Send + Sync {
    fn identity(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, ProviderError>;

    fn embed(&self, text: &str) -> Result<Embedding, ProviderError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop()
            .ok_or_else(|| ProviderError::MalformedResponse("embedder returned no vectors".into()))
    }
}

impl<T: Embedder + ?Sized> Embedder for std::sync::Arc<T> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, ProviderError> {
        (**self).embed_batch(texts)
    }
}

/// Signed feature hashing over lowercase alphanumeric tokens.
///
/// Each token is hashed with FNV-1a (offset basis xor `seed`); the low byte
/// picks the bucket and bit 32 picks the sign. The accumulated vector is
/// L2-normalised, so every nonempty text maps to a unit vector and empty
/// text maps to the zero vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder {
    seed: u64,
}

impl HashEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_seed(seed: u64) -> Self {
        Self { seed }
    }

    pub fn bucket(&self, token: &str) -> (usize, f64) {
        let mut h = FNV_OFFSET ^ self.seed;
        for b in token.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        let index = (h % HASH_EMBED_DIM as u64) as usize;
        let sign = if (h >> 32) & 1 == 1 { -1.0 } else { 1.0 };
        (index, sign)
    }

    pub fn embed_text(&self, text: &str) -> Embedding {
        let mut values = vec![0.0; HASH_EMBED_DIM];
        for token in tokenize(text) {
            let (i, s) = self.bucket(&token);
            values[i] += s;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Embedding(values)
    }
}

impl Embedder for HashEmbedder {
    fn identity(&self) -> String {
        format!("hash-fnv1a:seed={}:dim={}", self.seed, HASH_EMBED_DIM)
    }

    fn dimension(&self) -> usize {
        HASH_EMBED_DIM
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_is_deterministic_and_unit_norm() {
        let e = HashEmbedder::new();
        let a = e.embed_text("Place my favorite cup on the table");
        let b = e.embed_text("Place my favorite cup on the table");
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!((cosine(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let e = HashEmbedder::new().embed_text("  ...  ");
        assert_eq!(e.dimension(), HASH_EMBED_DIM);
        assert_eq!(e.norm(), 0.0);
        assert_eq!(cosine(&e, &HashEmbedder::new().embed_text("cup")), 0.0);
    }

    // Buckets for these tokens were checked for collisions with the
    // reference FNV-1a computation before freezing the ordering.
    #[test]
    fn shared_tokens_rank_above_unrelated_text() {
        let e = HashEmbedder::new();
        let buckets: Vec<usize> = ["red", "mug", "on", "table", "alarm", "clock"]
            .iter()
            .map(|t| e.bucket(t).0)
            .collect();
        let mut uniq = buckets.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), buckets.len(), "unexpected bucket collision");

        let q = e.embed_text("red mug on table");
        let near = cosine(&q, &e.embed_text("red mug"));
        let far = cosine(&q, &e.embed_text("alarm clock"));
        assert!((near - 2.0 / (4.0f64 * 2.0).sqrt()).abs() < 1e-12);
        assert_eq!(far, 0.0);
        assert!(near > far);
    }

    #[test]
    fn seed_changes_identity() {
        assert_ne!(HashEmbedder::new().identity(), HashEmbedder::with_seed(7).identity());
    }
}

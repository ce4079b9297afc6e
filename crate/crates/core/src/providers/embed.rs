use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cache::{content_key, EmbeddingCache};
use crate::error::{Error, Result};
use crate::math;
use crate::scalar::Real;
use crate::text;

/// Unit-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
}

impl<T: Real> EmbeddingVector<T> {
    /// Normalizes `values` to unit length. Fails on empty, non-finite or
    /// zero vectors.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Numerical("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite embedding entry".into()));
        }
        math::normalized(&values)
            .map(|values| EmbeddingVector { values })
            .ok_or_else(|| Error::Numerical("zero-norm embedding".into()))
    }

    pub fn from_f32(raw: &[f32]) -> Result<Self> {
        Self::new(raw.iter().map(|&x| T::lit(f64::from(x))).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// How raw cosine in [-1, 1] is mapped into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampMode {
    /// `max(0, cos)`.
    #[default]
    Zero,
    /// `(cos + 1) / 2`.
    Rescale,
}

/// Clamped cosine similarity; `similarity(a, a) == 1`.
pub fn similarity<T: Real>(
    a: &EmbeddingVector<T>,
    b: &EmbeddingVector<T>,
    clamp: ClampMode,
) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let cos = math::cosine(&a.values, &b.values);
    Ok(match clamp {
        ClampMode::Zero => cos.max(T::zero()),
        ClampMode::Rescale => (cos + T::one()) / T::lit(2.0),
    })
}

/// Source of raw embedding vectors.
pub trait EmbeddingBackend: Send + Sync {
    fn model_id(&self) -> String;
    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>>;
}

/// Seeded feature-hashed bag of words with sublinear term frequency.
#[derive(Debug, Clone)]
pub struct HashedBowEmbedder {
    dim: usize,
    seed: u64,
}

impl HashedBowEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedBowEmbedder { dim, seed }
    }

    fn feature(&self, token: &str) -> (usize, f32) {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(token.as_bytes());
        let d = h.finalize();
        let bucket = u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) % self.dim as u64;
        let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
        (bucket as usize, sign)
    }

    fn embed_one(&self, text: &str) -> Result<Vec<f32>> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in text::tokens(text) {
            *tf.entry(t).or_default() += 1;
        }
        let mut v = vec![0f32; self.dim];
        for (tok, n) in &tf {
            let (b, s) = self.feature(tok);
            v[b] += s * (1.0 + (*n as f32).ln());
        }
        if v.iter().all(|&x| x == 0.0) {
            // punctuation-only text, or hash collisions that cancel
            let (b, s) = self.feature(text.trim());
            v[b] = s;
        }
        Ok(v)
    }
}

impl EmbeddingBackend for HashedBowEmbedder {
    fn model_id(&self) -> String {
        format!("hashed-bow/dim={}/seed={}", self.dim, self.seed)
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

/// Embedding oracle with content-hash caching.
///
/// Raw vectors are memoized in memory and optionally persisted; normalization
/// happens on every return so a cached and a fresh vector are bit-identical.
pub struct Embedder<T> {
    backend: Box<dyn EmbeddingBackend>,
    model_id: String,
    memo: RwLock<HashMap<[u8; 32], Arc<Vec<f32>>>>,
    cache: Option<EmbeddingCache>,
    clamp: ClampMode,
    _scalar: std::marker::PhantomData<fn() -> T>,
}

impl<T: Real> Embedder<T> {
    pub fn new(
        backend: Box<dyn EmbeddingBackend>,
        cache: Option<EmbeddingCache>,
        clamp: ClampMode,
    ) -> Self {
        let model_id = backend.model_id();
        Embedder {
            backend,
            model_id,
            memo: RwLock::new(HashMap::new()),
            cache,
            clamp,
            _scalar: std::marker::PhantomData,
        }
    }

    /// Baseline hashed embedder without a persistent cache.
    pub fn baseline(dim: usize, seed: u64) -> Self {
        Self::new(Box::new(HashedBowEmbedder::new(dim, seed)), None, ClampMode::Zero)
    }

    pub fn model_id(&self) -> String {
        self.model_id.clone()
    }

    pub fn clamp(&self) -> ClampMode {
        self.clamp
    }

    fn lookup(&self, key: &[u8; 32]) -> Option<Arc<Vec<f32>>> {
        if let Some(v) = self.memo.read().expect("memo lock").get(key) {
            return Some(v.clone());
        }
        let v = Arc::new(self.cache.as_ref()?.get(key)?);
        self.memo.write().expect("memo lock").insert(*key, v.clone());
        Some(v)
    }

    fn raw_many(&self, texts: &[&str]) -> Result<Vec<Arc<Vec<f32>>>> {
        let keys: Vec<[u8; 32]> = texts.iter().map(|t| content_key(&self.model_id, t)).collect();
        let mut out: Vec<Option<Arc<Vec<f32>>>> = keys.iter().map(|k| self.lookup(k)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.backend.embed_raw(&batch)?;
            if fresh.len() != batch.len() {
                return Err(Error::Remote(format!(
                    "expected {} embeddings, got {}",
                    batch.len(),
                    fresh.len()
                )));
            }
            let mut memo = self.memo.write().expect("memo lock");
            for (&i, v) in missing.iter().zip(fresh) {
                if let Some(c) = &self.cache {
                    c.put(&keys[i], &v)?;
                }
                let v = Arc::new(v);
                memo.insert(keys[i], v.clone());
                out[i] = Some(v);
            }
        }
        let out: Vec<Arc<Vec<f32>>> = out.into_iter().map(|v| v.expect("filled")).collect();
        if let Some(first) = out.first() {
            if let Some(bad) = out.iter().find(|v| v.len() != first.len()) {
                return Err(Error::DimensionMismatch(first.len(), bad.len()));
            }
        }
        Ok(out)
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector<T>> {
        let raw = self.raw_many(&[text])?;
        EmbeddingVector::from_f32(&raw[0])
    }

    pub fn embed_many(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<T>>> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::EmptyText);
        }
        self.raw_many(texts)?
            .iter()
            .map(|r| EmbeddingVector::from_f32(r))
            .collect()
    }

    pub fn sim(&self, a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<T> {
        similarity(a, b, self.clamp)
    }

    /// Similarity of two texts.
    pub fn sim_text(&self, a: &str, b: &str) -> Result<T> {
        let ea = self.embed(a)?;
        let eb = self.embed(b)?;
        self.sim(&ea, &eb)
    }
}

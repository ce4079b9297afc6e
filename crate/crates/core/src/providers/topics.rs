use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::text;

/// Probability vector over `L` topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution<T> {
    probs: Vec<T>,
}

/// Allowed deviation of a simplex sum from one for the scalar type.
pub fn simplex_tolerance<T: Real>(len: usize) -> f64 {
    (16.0 * T::epsilon().to_f64_lossy() * len as f64).max(1e-9)
}

impl<T: Real> TopicDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Numerical("empty topic distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::Numerical("topic probability negative or non-finite".into()));
        }
        let sum: f64 = probs.iter().map(|p| p.to_f64_lossy()).sum();
        if (sum - 1.0).abs() > simplex_tolerance::<T>(probs.len()) {
            return Err(Error::Numerical(format!("topic probabilities sum to {sum}")));
        }
        Ok(TopicDistribution { probs })
    }

    /// Normalizes non-negative weights onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Numerical("topic weights not normalizable".into()));
        }
        let cast: Vec<T> = weights.iter().map(|&w| T::lit(w / total)).collect();
        let s: T = cast.iter().copied().sum();
        Self::new(cast.into_iter().map(|p| p / s).collect())
    }

    pub fn uniform(len: usize) -> Self {
        let p = T::one() / T::count(len);
        TopicDistribution { probs: vec![p; len] }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability; first on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

pub trait TopicModel<T: Real>: Send + Sync {
    fn model_id(&self) -> String;
    fn num_topics(&self) -> usize;
    fn distribution(&self, text: &str) -> Result<TopicDistribution<T>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub num_topics: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            num_topics: 20,
            iterations: 500,
            alpha: 0.1,
            beta: 0.01,
            seed: 0,
        }
    }
}

const FOLD_IN_ITERATIONS: usize = 50;

/// Latent Dirichlet allocation fitted by collapsed Gibbs sampling.
///
/// New texts are folded in against the fitted topic-word distributions with a
/// fixed number of EM updates on the document mixture, which keeps inference
/// deterministic without a per-call random stream.
#[derive(Debug, Clone)]
pub struct LdaModel {
    config: LdaConfig,
    vocab: HashMap<String, usize>,
    // topic-major: phi[k * V + w]
    phi: Vec<f64>,
    fitted: bool,
}

fn document_tokens(text: &str) -> Vec<String> {
    let content = text::content_lemmas(text);
    if !content.is_empty() {
        return content;
    }
    text::tokens(text).iter().map(|t| text::lemmatize(t)).collect()
}

impl LdaModel {
    pub fn unfitted(config: LdaConfig) -> Self {
        LdaModel {
            config,
            vocab: HashMap::new(),
            phi: Vec::new(),
            fitted: false,
        }
    }

    pub fn fit(texts: &[&str], config: &LdaConfig) -> Result<Self> {
        if config.num_topics == 0 {
            return Err(Error::Config("topic count must be positive".into()));
        }
        let mut vocab: HashMap<String, usize> = HashMap::new();
        let mut docs: Vec<Vec<usize>> = Vec::with_capacity(texts.len());
        for t in texts {
            let doc = text::content_lemmas(t)
                .into_iter()
                .map(|w| {
                    let next = vocab.len();
                    *vocab.entry(w).or_insert(next)
                })
                .collect();
            docs.push(doc);
        }
        let l = config.num_topics;
        let v = vocab.len();
        let (alpha, beta) = (config.alpha, config.beta);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let mut n_dk = vec![0u32; docs.len() * l];
        let mut n_kw = vec![0u32; l * v];
        let mut n_k = vec![0u32; l];
        let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let zd: Vec<usize> = doc.iter().map(|_| rng.gen_range(0..l)).collect();
            for (&w, &k) in doc.iter().zip(&zd) {
                n_dk[d * l + k] += 1;
                n_kw[k * v + w] += 1;
                n_k[k] += 1;
            }
            z.push(zd);
        }

        let vbeta = v as f64 * beta;
        let mut p = vec![0f64; l];
        for _ in 0..config.iterations {
            for (d, doc) in docs.iter().enumerate() {
                for (i, &w) in doc.iter().enumerate() {
                    let old = z[d][i];
                    n_dk[d * l + old] -= 1;
                    n_kw[old * v + w] -= 1;
                    n_k[old] -= 1;
                    let mut total = 0.0;
                    for k in 0..l {
                        total += (f64::from(n_dk[d * l + k]) + alpha)
                            * (f64::from(n_kw[k * v + w]) + beta)
                            / (f64::from(n_k[k]) + vbeta);
                        p[k] = total;
                    }
                    let u = rng.gen::<f64>() * total;
                    let new = p.iter().position(|&c| u < c).unwrap_or(l - 1);
                    z[d][i] = new;
                    n_dk[d * l + new] += 1;
                    n_kw[new * v + w] += 1;
                    n_k[new] += 1;
                }
            }
        }

        let mut phi = vec![0f64; l * v];
        for k in 0..l {
            let denom = f64::from(n_k[k]) + vbeta;
            for w in 0..v {
                phi[k * v + w] = (f64::from(n_kw[k * v + w]) + beta) / denom;
            }
        }
        Ok(LdaModel {
            config: config.clone(),
            vocab,
            phi,
            fitted: true,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Topic weights for `text` in `f64`.
    pub fn infer(&self, text: &str) -> Result<Vec<f64>> {
        if !self.fitted {
            return Err(Error::NotFitted);
        }
        let tokens = document_tokens(text);
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let l = self.config.num_topics;
        let v = self.vocab.len();
        let ids: Vec<usize> = tokens.iter().filter_map(|t| self.vocab.get(t).copied()).collect();
        if ids.is_empty() {
            return Ok(vec![1.0 / l as f64; l]);
        }
        let alpha = self.config.alpha;
        let mut theta = vec![1.0 / l as f64; l];
        let mut acc = vec![0f64; l];
        let mut r = vec![0f64; l];
        let norm = ids.len() as f64 + l as f64 * alpha;
        for _ in 0..FOLD_IN_ITERATIONS {
            acc.iter_mut().for_each(|a| *a = alpha);
            for &w in &ids {
                let mut s = 0.0;
                for k in 0..l {
                    r[k] = theta[k] * self.phi[k * v + w];
                    s += r[k];
                }
                for k in 0..l {
                    acc[k] += r[k] / s;
                }
            }
            for k in 0..l {
                theta[k] = acc[k] / norm;
            }
        }
        Ok(theta)
    }
}

impl<T: Real> TopicModel<T> for LdaModel {
    fn model_id(&self) -> String {
        format!(
            "lda-gibbs/L={}/iter={}/alpha={}/beta={}/seed={}",
            self.config.num_topics,
            self.config.iterations,
            self.config.alpha,
            self.config.beta,
            self.config.seed
        )
    }

    fn num_topics(&self) -> usize {
        self.config.num_topics
    }

    fn distribution(&self, text: &str) -> Result<TopicDistribution<T>> {
        TopicDistribution::from_weights(&self.infer(text)?)
    }
}

//! Long-horizon speaker/content consistency: each speaker's utterances are
//! compared against one or more semantic prototypes of that speaker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SpeakerId, Turn};
use crate::error::{Error, Result};
use crate::math;
use crate::providers::{Embedder, EmbeddingVector};
use crate::scalar::Real;

/// Prototype vectors for one speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerCentroids<T> {
    pub speaker: SpeakerId,
    pub centroids: Vec<EmbeddingVector<T>>,
    /// `(K, BIC)` for every candidate that fitted; empty for a single centroid.
    pub selection_trace: Vec<(usize, f64)>,
}

impl<T: Real> SpeakerCentroids<T> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Similarity of `u` to its nearest centroid.
    pub fn nearest_sim(&self, u: &EmbeddingVector<T>, embedder: &Embedder<T>) -> Result<T> {
        let mut best = T::zero();
        for c in &self.centroids {
            best = best.max(embedder.sim(u, c)?);
        }
        Ok(best)
    }
}

/// Largest component count tried for `n` utterances.
pub fn k_max(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

fn speaker_embeddings<T: Real>(
    turns: &[Turn],
    speaker: &str,
    embedder: &Embedder<T>,
) -> Result<Vec<EmbeddingVector<T>>> {
    let texts: Vec<&str> = turns
        .iter()
        .filter(|t| t.speaker.as_str() == speaker)
        .map(|t| t.text.as_str())
        .collect();
    if texts.is_empty() {
        return Err(Error::SpeakerAbsent(speaker.to_owned()));
    }
    embedder.embed_many(&texts)
}

fn mean_centroid<T: Real>(speaker: &str, embs: &[EmbeddingVector<T>]) -> Result<EmbeddingVector<T>> {
    let rows: Vec<&[T]> = embs.iter().map(EmbeddingVector::values).collect();
    let mean = math::mean_vector(&rows);
    if math::norm(&mean).to_f64_lossy() < 1e-6 {
        return Err(Error::UnstableCentroid(speaker.to_owned()));
    }
    EmbeddingVector::new(mean).map_err(|_| Error::UnstableCentroid(speaker.to_owned()))
}

/// Re-normalized mean of the speaker's utterance embeddings.
pub fn single_centroid<T: Real>(
    turns: &[Turn],
    speaker: &str,
    embedder: &Embedder<T>,
) -> Result<SpeakerCentroids<T>> {
    let embs = speaker_embeddings(turns, speaker, embedder)?;
    Ok(SpeakerCentroids {
        speaker: speaker.into(),
        centroids: vec![mean_centroid(speaker, &embs)?],
        selection_trace: Vec::new(),
    })
}

/// Per-component covariance structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// One variance per component.
    #[default]
    Spherical,
    /// One variance per component and dimension.
    Diagonal,
}

impl Covariance {
    /// Free variance parameters of one component in `d` dimensions.
    fn params(self, d: usize) -> usize {
        match self {
            Covariance::Spherical => 1,
            Covariance::Diagonal => d,
        }
    }
}

/// EM settings for the Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub covariance: Covariance,
    pub max_iter: usize,
    /// Stop when the mean per-sample log-likelihood improves by less.
    pub tol: f64,
    /// Added to every variance.
    pub reg_covar: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            covariance: Covariance::default(),
            max_iter: 200,
            tol: 1e-6,
            reg_covar: 1e-6,
        }
    }
}

/// A fitted mixture. Spherical fits repeat the component variance across
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub covariance: Covariance,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// Total log-likelihood of the data.
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl GmmFit {
    /// `-2 LL + p ln n`, `p` counting means, variances and `K - 1` weights.
    pub fn bic(&self, n: usize) -> f64 {
        let k = self.means.len();
        let d = self.means.first().map_or(0, Vec::len);
        let p = (k * (d + self.covariance.params(d)) + k - 1) as f64;
        -2.0 * self.log_likelihood + p * (n as f64).ln()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding.
fn kmeans_pp(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centers = vec![data[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centers.push(data[idx].clone());
        for (i, x) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Smallest effective point count a component may keep.
const MIN_COMPONENT_MASS: f64 = 1.5;

/// Fits a `k`-component mixture by EM from a k-means++ start.
pub fn fit_gmm(data: &[Vec<f64>], k: usize, seed: u64, cfg: &GmmConfig) -> Result<GmmFit> {
    let n = data.len();
    if k == 0 || n < k {
        return Err(Error::Numerical(format!("cannot fit {k} components to {n} points")));
    }
    let d = data[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
    let mut means = kmeans_pp(data, k, &mut rng);

    let global_mean: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n as f64)
        .collect();
    let global_var: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|x| (x[j] - global_mean[j]).powi(2)).sum::<f64>() / n as f64 + cfg.reg_covar)
        .collect();
    let global_var = match cfg.covariance {
        Covariance::Diagonal => global_var,
        Covariance::Spherical => vec![global_var.iter().sum::<f64>() / d as f64; d],
    };
    let mut variances = vec![global_var; k];
    let mut weights = vec![1.0 / k as f64; k];

    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut resp = vec![vec![0.0; k]; n];
    let mut prev = f64::NEG_INFINITY;
    let mut ll_total = f64::NEG_INFINITY;
    let mut iterations = 0;
    for it in 0..cfg.max_iter {
        iterations = it + 1;
        // E step
        let mut ll = 0.0;
        for (i, x) in data.iter().enumerate() {
            for c in 0..k {
                let mut lp = weights[c].ln();
                for j in 0..d {
                    let v = variances[c][j];
                    lp -= 0.5 * (ln_2pi + v.ln() + (x[j] - means[c][j]).powi(2) / v);
                }
                resp[i][c] = lp;
            }
            let lse = log_sum_exp(&resp[i]);
            if !lse.is_finite() {
                return Err(Error::Numerical("non-finite likelihood in EM".into()));
            }
            ll += lse;
            for r in resp[i].iter_mut() {
                *r = (*r - lse).exp();
            }
        }
        ll_total = ll;
        let per_sample = ll / n as f64;
        if per_sample - prev < cfg.tol {
            break;
        }
        prev = per_sample;
        // M step
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            // one point cannot support a variance: the likelihood is then
            // unbounded up to the regularizer
            if nk < MIN_COMPONENT_MASS {
                return Err(Error::Numerical(format!(
                    "component {c} of {k} collapsed onto {nk:.2} points"
                )));
            }
            weights[c] = nk / n as f64;
            for j in 0..d {
                let m = resp.iter().zip(data).map(|(r, x)| r[c] * x[j]).sum::<f64>() / nk;
                means[c][j] = m;
            }
            let per_dim: Vec<f64> = (0..d)
                .map(|j| {
                    resp.iter()
                        .zip(data)
                        .map(|(r, x)| r[c] * (x[j] - means[c][j]).powi(2))
                        .sum::<f64>()
                        / nk
                })
                .collect();
            match cfg.covariance {
                Covariance::Diagonal => {
                    for (v, s) in variances[c].iter_mut().zip(&per_dim) {
                        *v = s + cfg.reg_covar;
                    }
                }
                Covariance::Spherical => {
                    let v = per_dim.iter().sum::<f64>() / d as f64 + cfg.reg_covar;
                    variances[c].iter_mut().for_each(|x| *x = v);
                }
            }
        }
    }
    Ok(GmmFit {
        covariance: cfg.covariance,
        weights,
        means,
        variances,
        log_likelihood: ll_total,
        iterations,
    })
}

/// BIC-selected mixture prototypes from pre-computed embeddings.
///
/// Tries `K = 1..=floor(sqrt n)`, skipping fits that fail numerically; falls
/// back to the single mean centroid when none fits or `n < 2`.
pub fn centroids_from_embeddings<T: Real>(
    speaker: &str,
    embs: &[EmbeddingVector<T>],
    seed: u64,
    cfg: &GmmConfig,
) -> Result<SpeakerCentroids<T>> {
    if embs.is_empty() {
        return Err(Error::SpeakerAbsent(speaker.to_owned()));
    }
    let single = || -> Result<SpeakerCentroids<T>> {
        Ok(SpeakerCentroids {
            speaker: speaker.into(),
            centroids: vec![mean_centroid(speaker, embs)?],
            selection_trace: Vec::new(),
        })
    };
    let n = embs.len();
    if n < 2 {
        return single();
    }
    let data: Vec<Vec<f64>> = embs
        .iter()
        .map(|e| e.values().iter().map(|v| v.to_f64_lossy()).collect())
        .collect();
    let mut trace = Vec::new();
    let mut best: Option<(f64, GmmFit)> = None;
    for k in 1..=k_max(n) {
        let Ok(fit) = fit_gmm(&data, k, seed, cfg) else {
            continue;
        };
        let bic = fit.bic(n);
        trace.push((k, bic));
        if best.as_ref().map_or(true, |(b, _)| bic < *b) {
            best = Some((bic, fit));
        }
    }
    let Some((_, fit)) = best else {
        return single();
    };
    let mut centroids = Vec::with_capacity(fit.means.len());
    for m in &fit.means {
        let v: Vec<T> = m.iter().map(|&x| T::lit(x)).collect();
        centroids.push(
            EmbeddingVector::new(v).map_err(|_| Error::UnstableCentroid(speaker.to_owned()))?,
        );
    }
    Ok(SpeakerCentroids {
        speaker: speaker.into(),
        centroids,
        selection_trace: trace,
    })
}

/// BIC-selected mixture prototypes of the speaker's utterances.
pub fn multi_centroids<T: Real>(
    turns: &[Turn],
    speaker: &str,
    seed: u64,
    cfg: &GmmConfig,
    embedder: &Embedder<T>,
) -> Result<SpeakerCentroids<T>> {
    let embs = speaker_embeddings(turns, speaker, embedder)?;
    centroids_from_embeddings(speaker, &embs, seed, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcMode {
    Avg,
    Max,
}

/// Nearest-centroid similarity of each of the speaker's utterances,
/// averaged or maximized.
pub fn gscc_dc<T: Real>(
    turns: &[Turn],
    speaker: &str,
    centroids: &SpeakerCentroids<T>,
    mode: DcMode,
    embedder: &Embedder<T>,
) -> Result<T> {
    let embs = speaker_embeddings(turns, speaker, embedder)?;
    let scores = embs
        .iter()
        .map(|u| centroids.nearest_sim(u, embedder))
        .collect::<Result<Vec<T>>>()?;
    Ok(match mode {
        DcMode::Avg => scores.iter().copied().sum::<T>() / T::count(scores.len()),
        DcMode::Max => scores.iter().copied().fold(T::zero(), T::max),
    })
}

/// `min(1, n / k_global)`.
pub fn global_alpha<T: Real>(n_turns: usize, k_global: usize) -> T {
    (T::count(n_turns) / T::count(k_global.max(1))).min(T::one())
}

/// Every centroid blended with the background embedding,
/// `alpha c + (1 - alpha) b`, re-normalized.
pub fn augmented_centroid<T: Real>(
    centroids: &SpeakerCentroids<T>,
    background: &EmbeddingVector<T>,
    alpha: T,
) -> Result<SpeakerCentroids<T>> {
    let mut out = Vec::with_capacity(centroids.k());
    for c in &centroids.centroids {
        if c.dim() != background.dim() {
            return Err(Error::DimensionMismatch(c.dim(), background.dim()));
        }
        let v: Vec<T> = c
            .values()
            .iter()
            .zip(background.values())
            .map(|(&x, &b)| alpha * x + (T::one() - alpha) * b)
            .collect();
        out.push(
            EmbeddingVector::new(v)
                .map_err(|_| Error::UnstableCentroid(centroids.speaker.to_string()))?,
        );
    }
    Ok(SpeakerCentroids {
        speaker: centroids.speaker.clone(),
        centroids: out,
        selection_trace: centroids.selection_trace.clone(),
    })
}

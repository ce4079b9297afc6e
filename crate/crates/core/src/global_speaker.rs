//! Conversation-level participation: speaker entropy and how concentrated
//! the semantic spread of the conversation is across speakers.
//!
//! All functions take the turns to score, usually
//! [`Conversation::generated_turns`](crate::corpus::Conversation::generated_turns).

use std::collections::BTreeMap;

use crate::corpus::{SpeakerId, Turn};
use crate::error::{Error, Result};
use crate::math;
use crate::providers::{Embedder, EmbeddingVector};
use crate::scalar::Real;

/// Empirical turn distribution over speakers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationProfile<T> {
    pub fractions: BTreeMap<SpeakerId, T>,
}

impl<T: Real> ParticipationProfile<T> {
    pub fn of(turns: &[Turn]) -> Self {
        let mut counts: BTreeMap<SpeakerId, usize> = BTreeMap::new();
        for t in turns {
            *counts.entry(t.speaker.clone()).or_insert(0) += 1;
        }
        let n = T::count(turns.len());
        ParticipationProfile {
            fractions: counts.into_iter().map(|(s, c)| (s, T::count(c) / n)).collect(),
        }
    }

    pub fn speaker_count(&self) -> usize {
        self.fractions.len()
    }
}

/// Normalized speaker entropy `H(p) / log2 S`; 0 for a single speaker or an
/// empty turn list.
pub fn nse<T: Real>(turns: &[Turn]) -> T {
    let p = ParticipationProfile::<T>::of(turns);
    let s = p.speaker_count();
    if s < 2 {
        return T::zero();
    }
    let probs: Vec<T> = p.fractions.values().copied().collect();
    let v = math::entropy_bits(&probs) / T::count(s).log2();
    v.max(T::zero()).min(T::one())
}

/// Mean edge of the minimum spanning tree under `d = 1 - sim`; 0 for fewer
/// than two points.
pub fn semantic_spread<T: Real>(
    points: &[&EmbeddingVector<T>],
    embedder: &Embedder<T>,
) -> Result<T> {
    if points.len() < 2 {
        return Ok(T::zero());
    }
    let n = points.len();
    let mut d = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = T::one() - embedder.sim(points[i], points[j])?;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let edges = math::minimum_spanning_tree(n, |i, j| d[i * n + j]);
    Ok(edges.iter().map(|e| e.weight).sum::<T>() / T::count(edges.len()))
}

/// Spread, per-speaker contributions and their Gini coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationProfile<T> {
    pub spread: T,
    /// `max(0, R(all) - R(all without s))` per speaker.
    pub contributions: BTreeMap<SpeakerId, T>,
    /// `None` with fewer than two speakers or when every contribution is 0.
    pub gini: Option<T>,
}

struct Embedded<'a, T> {
    turns: &'a [Turn],
    embs: Vec<EmbeddingVector<T>>,
}

impl<'a, T: Real> Embedded<'a, T> {
    fn new(turns: &'a [Turn], embedder: &Embedder<T>) -> Result<Self> {
        let texts: Vec<&str> = turns.iter().map(|t| t.text.as_str()).collect();
        Ok(Embedded {
            turns,
            embs: embedder.embed_many(&texts)?,
        })
    }

    fn spread_without(&self, speaker: Option<&str>, embedder: &Embedder<T>) -> Result<T> {
        let pts: Vec<&EmbeddingVector<T>> = self
            .turns
            .iter()
            .zip(&self.embs)
            .filter(|(t, _)| Some(t.speaker.as_str()) != speaker)
            .map(|(_, e)| e)
            .collect();
        semantic_spread(&pts, embedder)
    }

    fn contribution(&self, speaker: &str, full: T, embedder: &Embedder<T>) -> Result<T> {
        if self.turns.iter().all(|t| t.speaker.as_str() == speaker) {
            return Err(Error::SpeakerOwnsAll(speaker.to_owned()));
        }
        let rest = self.spread_without(Some(speaker), embedder)?;
        Ok((full - rest).max(T::zero()))
    }
}

/// Leave-one-speaker-out drop in spread, floored at zero.
pub fn speaker_contribution<T: Real>(
    turns: &[Turn],
    speaker: &str,
    embedder: &Embedder<T>,
) -> Result<T> {
    let e = Embedded::new(turns, embedder)?;
    let full = e.spread_without(None, embedder)?;
    e.contribution(speaker, full, embedder)
}

pub fn concentration<T: Real>(
    turns: &[Turn],
    embedder: &Embedder<T>,
) -> Result<ConcentrationProfile<T>> {
    let e = Embedded::new(turns, embedder)?;
    let spread = e.spread_without(None, embedder)?;
    let speakers = ParticipationProfile::<T>::of(turns);
    let mut contributions = BTreeMap::new();
    if speakers.speaker_count() >= 2 {
        for s in speakers.fractions.keys() {
            contributions.insert(s.clone(), e.contribution(s.as_str(), spread, embedder)?);
        }
    }
    let gamma: Vec<T> = contributions.values().copied().collect();
    let gini = if gamma.len() >= 2 { math::gini(&gamma) } else { None };
    Ok(ConcentrationProfile {
        spread,
        contributions,
        gini,
    })
}

/// Gini coefficient of the speaker contributions.
pub fn sc_gini<T: Real>(turns: &[Turn], embedder: &Embedder<T>) -> Result<Option<T>> {
    Ok(concentration(turns, embedder)?.gini)
}

//! Next-speaker plausibility over a context window: DNR, IR, PF, LS-ES and
//! LS-TA.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{ContextWindow, SpeakerProfile, TurnSource};
use crate::error::{Error, Result};
use crate::math;
use crate::providers::{Embedder, EmbeddingVector, TopicModel};
use crate::scalar::Real;
use crate::text;

/// Strictly decreasing weight of the distance `d >= 0` to a past turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecaySpec {
    /// `lambda (1 - lambda)^d`
    Geometric { lambda: f64 },
    /// `exp(-alpha d)`
    Exponential { alpha: f64 },
    /// `1 / (1 + d)`
    Inverse,
}

impl Default for DecaySpec {
    fn default() -> Self {
        DecaySpec::Geometric { lambda: 0.6 }
    }
}

impl DecaySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DecaySpec::Geometric { lambda } if !(lambda > 0.0 && lambda < 1.0) => Err(
                Error::Config(format!("geometric decay needs 0 < lambda < 1, got {lambda}")),
            ),
            DecaySpec::Exponential { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                Error::Config(format!("exponential decay needs alpha > 0, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn weight<T: Real>(&self, d: usize) -> T {
        let df = T::count(d);
        match *self {
            DecaySpec::Geometric { lambda } => {
                let l = T::lit(lambda);
                l * (T::one() - l).powi(d as i32)
            }
            DecaySpec::Exponential { alpha } => (-T::lit(alpha) * df).exp(),
            DecaySpec::Inverse => T::one() / (T::one() + df),
        }
    }
}

fn mention_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@([\p{L}\p{N}_][\p{L}\p{N}_.\-]*)").expect("valid regex"))
}

/// Decides which speakers a window explicitly addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AddressDetector {
    /// Also count a plain whole-token, case-insensitive occurrence of the name.
    pub match_names: bool,
}

impl Default for AddressDetector {
    fn default() -> Self {
        AddressDetector { match_names: true }
    }
}

impl AddressDetector {
    /// True if `text` addresses `speaker`.
    pub fn addresses(&self, text: &str, speaker: &str) -> bool {
        let target = speaker.to_lowercase();
        let mentioned = mention_regex().captures_iter(text).any(|c| {
            c[1].trim_end_matches(['.', '-']).to_lowercase() == target
        });
        if mentioned || !self.match_names {
            return mentioned;
        }
        let name = text::tokens(speaker);
        if name.is_empty() {
            return false;
        }
        let words = text::tokens(text);
        words.windows(name.len()).any(|w| w == name.as_slice())
    }
}

/// 1 when the predicted speaker is explicitly addressed in the window.
pub fn dnr(predicted: &str, window: &ContextWindow<'_>, detector: &AddressDetector) -> bool {
    window
        .turns()
        .iter()
        .any(|t| detector.addresses(&t.text, predicted))
}

/// Decayed recency of the predicted speaker, skipping the last turn.
///
/// Position `-i` for `2 <= i <= min(k, |window|)` has distance `i - 2`; the
/// most recent occurrence wins. Zero when the speaker does not occur there.
pub fn ir<T: Real>(predicted: &str, window: &ContextWindow<'_>, decay: &DecaySpec) -> T {
    let turns = window.turns();
    // the speaker who just finished is excluded outright, not scored at an
    // older position
    if turns.last().is_some_and(|t| t.speaker.as_str() == predicted) {
        return T::zero();
    }
    let reach = window.k().min(turns.len());
    (2..=reach)
        .find(|&i| turns[turns.len() - i].speaker.as_str() == predicted)
        .map_or(T::zero(), |i| decay.weight(i - 2))
}

/// Share of the window's `k` slots taken by the predicted speaker.
pub fn pf<T: Real>(predicted: &str, window: &ContextWindow<'_>) -> T {
    T::count(window.turns_by_speaker(predicted).len()) / T::count(window.k())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EsMode {
    Avg,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSpeakerRep<T> {
    pub vector: EmbeddingVector<T>,
    pub alpha: T,
    /// Number of window turns by the speaker.
    pub source_counts: usize,
}

/// Blend of the speaker's mean window embedding and background embedding,
/// weighted by `alpha = min(1, |C_s| / k)` and re-normalized.
pub fn augmented_rep<T: Real>(
    speaker: &str,
    window: &ContextWindow<'_>,
    profile: Option<&SpeakerProfile>,
    embedder: &Embedder<T>,
) -> Result<AugmentedSpeakerRep<T>> {
    let own: Vec<&str> = window
        .turns_by_speaker(speaker)
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    let alpha = (T::count(own.len()) / T::count(window.k())).min(T::one());
    let background = profile.and_then(SpeakerProfile::background_text);
    let message_mean = if own.is_empty() {
        None
    } else {
        let embs = embedder.embed_many(&own)?;
        let rows: Vec<&[T]> = embs.iter().map(EmbeddingVector::values).collect();
        Some(math::mean_vector(&rows))
    };
    let blended = match (message_mean, background) {
        (None, None) => return Err(Error::NoSpeakerEvidence(speaker.to_owned())),
        (Some(v), None) => v,
        (None, Some(b)) => embedder.embed(b)?.values().to_vec(),
        (Some(v), Some(b)) => {
            let b = embedder.embed(b)?;
            v.iter()
                .zip(b.values())
                .map(|(&x, &y)| alpha * x + (T::one() - alpha) * y)
                .collect()
        }
    };
    let vector = EmbeddingVector::new(blended)
        .map_err(|_| Error::UnstableCentroid(speaker.to_owned()))?;
    Ok(AugmentedSpeakerRep {
        vector,
        alpha,
        source_counts: own.len(),
    })
}

fn aggregate<T: Real>(scores: &[T], mode: EsMode) -> T {
    match mode {
        EsMode::Avg => scores.iter().copied().sum::<T>() / T::count(scores.len()),
        EsMode::Max => scores.iter().copied().fold(T::zero(), T::max),
    }
}

/// LS-ES: how close the rest of the window is to the predicted speaker's
/// own window turns.
///
/// Falls back to the augmented representation when the speaker has no window
/// turns but a background profile. `None` when no turn is by someone else,
/// or when the speaker has neither turns nor background.
pub fn ls_es<T: Real>(
    predicted: &str,
    window: &ContextWindow<'_>,
    mode: EsMode,
    profile: Option<&SpeakerProfile>,
    embedder: &Embedder<T>,
) -> Result<Option<T>> {
    let others: Vec<&str> = window
        .turns_excluding_speaker(predicted)
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    if others.is_empty() {
        return Ok(None);
    }
    let own: Vec<&str> = window
        .turns_by_speaker(predicted)
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    if own.is_empty() {
        if profile.and_then(SpeakerProfile::background_text).is_some() {
            return ls_es_aug(predicted, window, mode, profile, embedder);
        }
        return Ok(None);
    }
    let other_e = embedder.embed_many(&others)?;
    let own_e = embedder.embed_many(&own)?;
    let mut scores = Vec::with_capacity(other_e.len());
    for c in &other_e {
        let mut best = T::zero();
        for c2 in &own_e {
            best = best.max(embedder.sim(c, c2)?);
        }
        scores.push(best);
    }
    Ok(Some(aggregate(&scores, mode)))
}

/// LS-ES with the inner max replaced by similarity to the augmented
/// speaker representation.
pub fn ls_es_aug<T: Real>(
    predicted: &str,
    window: &ContextWindow<'_>,
    mode: EsMode,
    profile: Option<&SpeakerProfile>,
    embedder: &Embedder<T>,
) -> Result<Option<T>> {
    let others: Vec<&str> = window
        .turns_excluding_speaker(predicted)
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    if others.is_empty() {
        return Ok(None);
    }
    let aug = augmented_rep(predicted, window, profile, embedder)?;
    let scores = embedder
        .embed_many(&others)?
        .iter()
        .map(|c| embedder.sim(c, &aug.vector))
        .collect::<Result<Vec<T>>>()?;
    Ok(Some(aggregate(&scores, mode)))
}

/// `1 - sqrt(JSD)` between the topic mixtures of the speaker's window turns
/// and of the whole window. `None` when the speaker has no window turns or
/// a side has no scorable tokens.
pub fn ls_ta<T: Real>(
    predicted: &str,
    window: &ContextWindow<'_>,
    topics: &dyn TopicModel<T>,
) -> Result<Option<T>> {
    let own: Vec<&str> = window
        .turns_by_speaker(predicted)
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    if own.is_empty() {
        return Ok(None);
    }
    let p = match topics.distribution(&own.join("\n")) {
        Err(Error::EmptyText) => return Ok(None),
        r => r?,
    };
    let q = match topics.distribution(&window.texts().join("\n")) {
        Err(Error::EmptyText) => return Ok(None),
        r => r?,
    };
    Ok(Some(topic_alignment(p.probs(), q.probs())))
}

/// `1 - sqrt(JSD_2(p, q))`.
pub fn topic_alignment<T: Real>(p: &[T], q: &[T]) -> T {
    T::one() - math::jensen_shannon_bits(p, q).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{context_window, Conversation};

    fn abca() -> Conversation {
        Conversation::new(
            "ex",
            [
                ("Alice", "What's the status of the API integration?"),
                ("Bob", "We're at 80% completion."),
                ("Charlie", "The authentication module is done."),
                ("Alice", "Great! When can we test?"),
            ],
        )
        .unwrap()
    }

    fn close(a: &EmbeddingVector<f64>, b: &EmbeddingVector<f64>) {
        assert_eq!(a.dim(), b.dim());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn worked_ir_example() {
        let c = abca();
        let w = context_window(&c, 4, 10).unwrap();
        let d = DecaySpec::default();
        assert_eq!(ir::<f64>("Charlie", &w, &d), 0.6);
        assert_eq!(ir::<f64>("Bob", &w, &d), 0.24);
        assert_eq!(ir::<f64>("Alice", &w, &d), 0.0);
        assert_eq!(ir::<f64>("Dana", &w, &d), 0.0);
    }

    #[test]
    fn ir_most_recent_occurrence_wins() {
        let c = Conversation::new("c", [("x", "1"), ("p", "2"), ("y", "3"), ("p", "4"), ("z", "5")])
            .unwrap();
        let w = context_window(&c, 5, 10).unwrap();
        let d = DecaySpec::Inverse;
        assert_eq!(ir::<f64>("p", &w, &d), d.weight::<f64>(0));
    }

    #[test]
    fn ir_respects_k() {
        let c = Conversation::new("c", [("p", "1"), ("a", "2"), ("b", "3")]).unwrap();
        // k = 2: only position -2 ("a") is eligible
        let w = context_window(&c, 3, 2).unwrap();
        assert_eq!(ir::<f64>("p", &w, &DecaySpec::default()), 0.0);
        assert_eq!(ir::<f64>("a", &w, &DecaySpec::default()), 0.6);
    }

    #[test]
    fn decay_validation() {
        assert!(DecaySpec::Geometric { lambda: 1.0 }.validate().is_err());
        assert!(DecaySpec::Exponential { alpha: 0.0 }.validate().is_err());
        assert!(DecaySpec::Inverse.validate().is_ok());
        let e = DecaySpec::Exponential { alpha: 0.5 };
        assert_eq!(e.weight::<f64>(2), (-1.0f64).exp());
    }

    #[test]
    fn pf_uses_k_denominator() {
        let c = Conversation::new(
            "c",
            [("p", "1"), ("a", "2"), ("p", "3"), ("b", "4"), ("c", "5")],
        )
        .unwrap();
        let w = context_window(&c, 5, 5).unwrap();
        assert_eq!(pf::<f64>("p", &w), 0.4);
        assert_eq!(pf::<f64>("q", &w), 0.0);
        let short = Conversation::new("s", [("p", "1"), ("p", "2"), ("p", "3")]).unwrap();
        let w = context_window(&short, 3, 10).unwrap();
        assert_eq!(pf::<f64>("p", &w), 0.3);
    }

    #[test]
    fn dnr_cases() {
        let c = Conversation::new("c", [("a", "@Bob what do you think"), ("c", "hmm")]).unwrap();
        let w = context_window(&c, 2, 10).unwrap();
        let det = AddressDetector::default();
        assert!(dnr("bob", &w, &det));
        assert!(dnr("BOB", &w, &det));
        assert!(!dnr("carol", &w, &det));
        let plain = Conversation::new("p", [("a", "carol, thoughts?")]).unwrap();
        let w = context_window(&plain, 1, 10).unwrap();
        assert!(dnr("Carol", &w, &det));
        assert!(!dnr("Carol", &w, &AddressDetector { match_names: false }));
        let partial = Conversation::new("p", [("a", "caroline said so")]).unwrap();
        let w = context_window(&partial, 1, 10).unwrap();
        assert!(!dnr("carol", &w, &det));
    }

    #[test]
    fn ls_es_identical_turns() {
        let e = Embedder::<f64>::baseline(256, 0);
        let c = Conversation::new(
            "c",
            [("a", "index tuning plan"), ("p", "index tuning plan"), ("b", "index tuning plan")],
        )
        .unwrap();
        let w = context_window(&c, 3, 10).unwrap();
        assert_eq!(ls_es("p", &w, EsMode::Avg, None, &e).unwrap(), Some(1.0));
        assert_eq!(ls_es("p", &w, EsMode::Max, None, &e).unwrap(), Some(1.0));
    }

    #[test]
    fn ls_es_undefined_without_evidence() {
        let e = Embedder::<f64>::baseline(256, 0);
        let c = Conversation::new("c", [("a", "x y"), ("b", "z w")]).unwrap();
        let w = context_window(&c, 2, 10).unwrap();
        assert_eq!(ls_es("p", &w, EsMode::Avg, None, &e).unwrap(), None);
        let solo = Conversation::new("s", [("p", "x"), ("p", "y")]).unwrap();
        let w = context_window(&solo, 2, 10).unwrap();
        assert_eq!(ls_es("p", &w, EsMode::Avg, None, &e).unwrap(), None);
    }

    #[test]
    fn ls_es_with_profile_uses_background() {
        let e = Embedder::<f64>::baseline(256, 0);
        let c = Conversation::new("c", [("a", "database indexes"), ("b", "query planner")]).unwrap();
        let w = context_window(&c, 2, 10).unwrap();
        let prof = SpeakerProfile::new("p", "database indexes");
        let aug = augmented_rep("p", &w, Some(&prof), &e).unwrap();
        assert_eq!(aug.alpha, 0.0);
        close(&aug.vector, &e.embed("database indexes").unwrap());
        let got = ls_es("p", &w, EsMode::Max, Some(&prof), &e).unwrap().unwrap();
        assert_eq!(got, 1.0);
        let avg = ls_es("p", &w, EsMode::Avg, Some(&prof), &e).unwrap().unwrap();
        let s2 = e.sim_text("query planner", "database indexes").unwrap();
        assert!((avg - (1.0 + s2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn augmented_alpha_rules() {
        let e = Embedder::<f64>::baseline(256, 0);
        let c = Conversation::new(
            "c",
            [("p", "alpha beta"), ("x", "gamma"), ("p", "alpha beta"), ("x", "delta")],
        )
        .unwrap();
        let prof = SpeakerProfile::new("p", "background words");
        // |C_s| = 2 = k / 2
        let w = context_window(&c, 4, 4).unwrap();
        let aug = augmented_rep("p", &w, Some(&prof), &e).unwrap();
        assert_eq!(aug.alpha, 0.5);
        let v = e.embed("alpha beta").unwrap();
        let b = e.embed("background words").unwrap();
        let mid: Vec<f64> = v.values().iter().zip(b.values()).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
        close(&aug.vector, &EmbeddingVector::new(mid).unwrap());
        // |C_s| >= k
        let w = context_window(&c, 4, 2).unwrap();
        let w_turns: Vec<_> = w.turns_by_speaker("p");
        assert_eq!(w_turns.len(), 1);
        let aug = augmented_rep("p", &w, Some(&prof), &e).unwrap();
        assert_eq!(aug.alpha, 0.5);
        let w1 = context_window(&c, 3, 1).unwrap();
        let aug = augmented_rep("p", &w1, Some(&prof), &e).unwrap();
        assert_eq!(aug.alpha, 1.0);
        close(&aug.vector, &v);
        // neither source
        let w = context_window(&c, 4, 4).unwrap();
        assert!(matches!(
            augmented_rep("q", &w, None, &e),
            Err(Error::NoSpeakerEvidence(_))
        ));
    }

    #[test]
    fn topic_alignment_cases() {
        assert_eq!(topic_alignment(&[0.3, 0.7], &[0.3, 0.7]), 1.0);
        assert_eq!(topic_alignment(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        let s = topic_alignment(&[0.5, 0.5], &[1.0, 0.0]);
        // JSD computed directly: H(M) - (H(P) + H(Q)) / 2 with M = (.75, .25)
        let h = |p: &[f64]| -> f64 { p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum() };
        let jsd = h(&[0.75, 0.25]) - (h(&[0.5, 0.5]) + h(&[1.0, 0.0])) / 2.0;
        assert!((jsd - 0.3113).abs() < 1e-4);
        assert!((s - (1.0 - jsd.sqrt())).abs() < 1e-12);
        assert!((s - 0.4421).abs() < 1e-4);
        assert_eq!(
            topic_alignment(&[0.2, 0.8], &[0.6, 0.4]),
            topic_alignment(&[0.6, 0.4], &[0.2, 0.8])
        );
    }
}

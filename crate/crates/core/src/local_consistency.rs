//! Speaker/content alignment of a predicted turn against the predicted
//! speaker's own window turns.

use serde::{Deserialize, Serialize};

use crate::corpus::{ContextWindow, SpeakerProfile, TurnSource};
use crate::error::Result;
use crate::local_speaker::augmented_rep;
use crate::providers::Embedder;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsccMode {
    Avg,
    Max,
    Min,
}

/// Similarity of the candidate to each window turn by the predicted speaker,
/// aggregated by `mode`. `None` when the speaker has no window turns.
pub fn lscc_es<T: Real>(
    candidate: &str,
    predicted: &str,
    window: &ContextWindow<'_>,
    mode: LsccMode,
    embedder: &Embedder<T>,
) -> Result<Option<T>> {
    let own: Vec<&str> = window
        .turns_by_speaker(predicted)
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    if own.is_empty() {
        return Ok(None);
    }
    let u = embedder.embed(candidate)?;
    let sims = embedder
        .embed_many(&own)?
        .iter()
        .map(|c| embedder.sim(&u, c))
        .collect::<Result<Vec<T>>>()?;
    Ok(Some(match mode {
        LsccMode::Avg => sims.iter().copied().sum::<T>() / T::count(sims.len()),
        LsccMode::Max => sims.iter().copied().fold(T::zero(), T::max),
        LsccMode::Min => sims.iter().copied().fold(T::one(), T::min),
    }))
}

/// Similarity of the candidate to the speaker's augmented representation
/// (window turns blended with background text).
pub fn lscc_es_aug<T: Real>(
    candidate: &str,
    predicted: &str,
    window: &ContextWindow<'_>,
    profile: Option<&SpeakerProfile>,
    embedder: &Embedder<T>,
) -> Result<T> {
    let rep = augmented_rep(predicted, window, profile, embedder)?;
    embedder.sim(&embedder.embed(candidate)?, &rep.vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{context_window, Conversation};
    use crate::error::Error;
    use crate::providers::{ClampMode, EmbeddingBackend};

    /// Fixed vectors per text.
    struct Table(Vec<(&'static str, Vec<f32>)>);

    impl EmbeddingBackend for Table {
        fn model_id(&self) -> String {
            "table".into()
        }
        fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
            Ok(texts
                .iter()
                .map(|t| self.0.iter().find(|(k, _)| k == t).expect("known text").1.clone())
                .collect())
        }
    }

    fn unit_at(cos: f32) -> Vec<f32> {
        vec![cos, (1.0 - cos * cos).sqrt()]
    }

    #[test]
    fn prescribed_cosines() {
        let e: Embedder<f64> = Embedder::new(
            Box::new(Table(vec![
                ("u", vec![1.0, 0.0]),
                ("c1", unit_at(0.2)),
                ("c2", unit_at(0.8)),
                ("other", vec![0.0, 1.0]),
            ])),
            None,
            ClampMode::Zero,
        );
        let c = Conversation::new("c", [("p", "c1"), ("x", "other"), ("p", "c2")]).unwrap();
        let w = context_window(&c, 3, 10).unwrap();
        let get = |m| lscc_es("u", "p", &w, m, &e).unwrap().unwrap();
        // f32 inputs: compare at f32 precision
        assert!((get(LsccMode::Avg) - 0.5).abs() < 1e-6);
        assert!((get(LsccMode::Max) - 0.8).abs() < 1e-6);
        assert!((get(LsccMode::Min) - 0.2).abs() < 1e-6);
    }

    #[test]
    fn identical_and_absent() {
        let e = Embedder::<f64>::baseline(128, 0);
        let c = Conversation::new("c", [("p", "shard the orders table"), ("x", "ok")]).unwrap();
        let w = context_window(&c, 2, 10).unwrap();
        for m in [LsccMode::Avg, LsccMode::Max, LsccMode::Min] {
            assert_eq!(lscc_es("shard the orders table", "p", &w, m, &e).unwrap(), Some(1.0));
            assert_eq!(lscc_es("anything", "q", &w, m, &e).unwrap(), None);
        }
    }

    #[test]
    fn aug_alpha_extremes() {
        let e = Embedder::<f64>::baseline(128, 0);
        let prof = SpeakerProfile::new("p", "storage engineer");
        let c = Conversation::new("c", [("x", "hello"), ("y", "hi")]).unwrap();
        let w = context_window(&c, 2, 10).unwrap();
        // no window turns: similarity to background
        let v = lscc_es_aug("storage engineer", "p", &w, Some(&prof), &e).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // |C_s| >= k: background ignored
        let c = Conversation::new("c", [("p", "compaction stalls"), ("p", "compaction stalls")])
            .unwrap();
        let w = context_window(&c, 2, 2).unwrap();
        let v = lscc_es_aug("compaction stalls", "p", &w, Some(&prof), &e).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(matches!(
            lscc_es_aug("x", "q", &w, None, &e),
            Err(Error::NoSpeakerEvidence(_))
        ));
    }
}

//! Seeded synthetic conversations for tests and benchmarks.
//!
//! Text is made of pronounceable pseudo-words drawn from per-topic pools, so
//! every oracle sees clean topical structure without any real vocabulary.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AgendaGraph, AgendaItem, Conversation, ItemId};
use crate::error::{Error, Result};

/// Walk over a chain agenda: `turns_per_item` turns on each visited item,
/// moving `hop` items at a time, from the first item or (reversed) the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgendaWalk {
    pub items: usize,
    pub hop: usize,
    pub reverse: bool,
    pub turns_per_item: usize,
}

impl Default for AgendaWalk {
    fn default() -> Self {
        AgendaWalk {
            items: 5,
            hop: 1,
            reverse: false,
            turns_per_item: 5,
        }
    }
}

impl AgendaWalk {
    /// Item indices in visiting order.
    pub fn visits(&self) -> Vec<usize> {
        if self.reverse {
            (0..self.items).rev().step_by(self.hop).collect()
        } else {
            (0..self.items).step_by(self.hop).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub conversations: usize,
    pub speakers: usize,
    /// Ignored in agenda-walk mode, where the walk fixes the length.
    pub turns: usize,
    /// Turn share per speaker; uniform when absent.
    pub participation: Option<Vec<f64>>,
    pub topics: usize,
    /// Per-turn probability of switching to a random topic.
    pub drift: f64,
    pub words_per_turn: usize,
    pub vocab_per_topic: usize,
    pub agenda: Option<AgendaWalk>,
    pub seed: u64,
    pub id_prefix: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            conversations: 1,
            speakers: 4,
            turns: 30,
            participation: None,
            topics: 5,
            drift: 0.1,
            words_per_turn: 8,
            vocab_per_topic: 12,
            agenda: None,
            seed: 0,
            id_prefix: "synth".into(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.speakers == 0 || self.turns == 0 || self.topics == 0 {
            return bad("speakers, turns and topics must be positive".into());
        }
        if self.words_per_turn == 0 || self.vocab_per_topic == 0 {
            return bad("words_per_turn and vocab_per_topic must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.drift) {
            return bad(format!("drift must lie in [0, 1], got {}", self.drift));
        }
        if let Some(p) = &self.participation {
            if p.len() != self.speakers {
                return bad(format!("participation has {} entries for {} speakers", p.len(), self.speakers));
            }
            if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad("participation must be non-negative and sum to 1".into());
            }
        }
        if let Some(a) = &self.agenda {
            if a.items == 0 || a.hop == 0 || a.turns_per_item == 0 {
                return bad("agenda items, hop and turns_per_item must be positive".into());
            }
        }
        Ok(())
    }

    pub fn speaker_names(&self) -> Vec<String> {
        (1..=self.speakers).map(|i| format!("spk{i}")).collect()
    }
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// `count` disjoint pools of `size` distinct three-syllable words.
fn word_pools(rng: &mut ChaCha8Rng, count: usize, size: usize) -> Vec<Vec<String>> {
    let mut seen = HashSet::new();
    (0..count)
        .map(|_| {
            let mut pool = Vec::with_capacity(size);
            while pool.len() < size {
                let w: String = (0..3)
                    .map(|_| {
                        format!(
                            "{}{}",
                            ONSETS[rng.gen_range(0..ONSETS.len())],
                            VOWELS[rng.gen_range(0..VOWELS.len())]
                        )
                    })
                    .collect();
                if seen.insert(w.clone()) {
                    pool.push(w);
                }
            }
            pool
        })
        .collect()
}

fn utterance(rng: &mut ChaCha8Rng, pool: &[String], words: usize) -> String {
    (0..words)
        .map(|_| pool[rng.gen_range(0..pool.len())].as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Conversation `index` of the spec. Vocabulary pools depend only on the
/// seed, so every conversation of a spec shares them.
pub fn gen_synthetic(spec: &SynthSpec, index: usize) -> Result<Conversation> {
    spec.validate()?;
    let mut vocab_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_pools = spec.agenda.map_or(spec.topics, |a| a.items);
    let pools = word_pools(&mut vocab_rng, n_pools, spec.vocab_per_topic);

    let mut rng = ChaCha8Rng::seed_from_u64(
        spec.seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let names = spec.speaker_names();
    let weights = spec
        .participation
        .clone()
        .unwrap_or_else(|| vec![1.0; spec.speakers]);
    let who = WeightedIndex::new(&weights).map_err(|e| Error::Config(format!("participation: {e}")))?;

    let id = format!("{}-{index:04}", spec.id_prefix);
    let mut turns: Vec<(String, String)> = Vec::new();
    let conv = match &spec.agenda {
        Some(walk) => {
            for item in walk.visits() {
                for _ in 0..walk.turns_per_item {
                    let s = names[who.sample(&mut rng)].clone();
                    turns.push((s, utterance(&mut rng, &pools[item], spec.words_per_turn)));
                }
            }
            let items: Vec<AgendaItem> = pools
                .iter()
                .enumerate()
                .map(|(i, p)| AgendaItem {
                    id: ItemId::new(format!("item{i}")),
                    text: p[..p.len().min(4)].join(" "),
                })
                .collect();
            Conversation::new(id, turns)?.with_agenda(AgendaGraph::chain(items)?)
        }
        None => {
            let mut topic = rng.gen_range(0..spec.topics);
            for _ in 0..spec.turns {
                if rng.gen::<f64>() < spec.drift {
                    topic = rng.gen_range(0..spec.topics);
                }
                let s = names[who.sample(&mut rng)].clone();
                turns.push((s, utterance(&mut rng, &pools[topic], spec.words_per_turn)));
            }
            Conversation::new(id, turns)?
        }
    };
    Ok(conv.generated(true))
}

/// All `spec.conversations` conversations.
pub fn gen_dataset(spec: &SynthSpec) -> Result<Vec<Conversation>> {
    (0..spec.conversations).map(|i| gen_synthetic(spec, i)).collect()
}

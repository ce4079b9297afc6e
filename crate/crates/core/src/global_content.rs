//! Whole-conversation content quality.
//!
//! Objective-guided metrics (task success, agenda completion, efficiency,
//! trajectory consistency) score every turn of the conversation.
//! Objective-free metrics (displacement and step size) score the generated
//! region only.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{AgendaGraph, Conversation, ObjectiveSpec, PredicateKind, PredicateSpec, Turn};
use crate::error::{Error, Result};
use crate::local_content::{agenda_coverage, AgendaCoverage, ContentThresholds};
use crate::math;
use crate::providers::{Embedder, EmbeddingVector};
use crate::scalar::Real;

/// Coverage of every agenda item over all turns of the conversation.
pub fn conversation_coverage<T: Real>(
    conversation: &Conversation,
    agenda: &AgendaGraph,
    thresholds: &ContentThresholds,
    embedder: &Embedder<T>,
) -> Result<AgendaCoverage<T>> {
    let texts: Vec<&str> = crate::corpus::TurnSource::turns(conversation)
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    agenda_coverage(agenda, &texts, thresholds, embedder)
}

/// Whether agenda item `item` is saturated over the whole conversation.
pub fn sat<T: Real>(
    item: usize,
    conversation: &Conversation,
    agenda: &AgendaGraph,
    thresholds: &ContentThresholds,
    embedder: &Embedder<T>,
) -> Result<bool> {
    Ok(conversation_coverage(conversation, agenda, thresholds, embedder)?.saturated(item))
}

/// Agenda completion rate: fraction of saturated items.
pub fn acr<T: Real>(coverage: &AgendaCoverage<T>) -> T {
    T::count(coverage.saturated_count()) / T::count(coverage.info_cov.len())
}

const PE_EPS: f64 = 1e-8;

/// Progression efficiency: relevant turns per saturated item. `None` when
/// nothing is saturated.
pub fn pe<T: Real>(coverage: &AgendaCoverage<T>) -> Option<T> {
    let sat: Vec<usize> = (0..coverage.info_cov.len())
        .filter(|&i| coverage.saturated(i))
        .collect();
    if sat.is_empty() {
        return None;
    }
    let turns: usize = sat.iter().map(|&i| coverage.relevant[i].len()).sum();
    Some(T::count(turns) / (T::count(sat.len()) + T::lit(PE_EPS)))
}

/// Pulls the output artifact out of a conversation.
pub trait ArtifactExtractor: Send + Sync {
    fn extract(&self, turns: &[Turn]) -> Result<String>;
}

/// Contents of the last fenced block (three backticks) in the conversation.
#[derive(Debug, Clone, Copy, Default)]
pub struct LastFencedBlock;

fn fence() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[^\n`]*\n(.*?)```").expect("fence pattern"))
}

impl ArtifactExtractor for LastFencedBlock {
    fn extract(&self, turns: &[Turn]) -> Result<String> {
        turns
            .iter()
            .rev()
            .find_map(|t| fence().captures_iter(&t.text).last())
            .map(|c| c[1].trim_end_matches('\n').to_owned())
            .ok_or_else(|| Error::ArtifactExtraction("no fenced block in conversation".into()))
    }
}

/// Evaluates one predicate against an artifact.
///
/// A malformed predicate is an error; an artifact that is not JSON simply
/// fails a schema predicate.
pub fn predicate_holds(spec: &PredicateSpec, artifact: &str) -> Result<bool> {
    match spec.kind {
        PredicateKind::Contains => Ok(artifact.contains(&spec.arg)),
        PredicateKind::Regex => {
            let re = Regex::new(&spec.arg).map_err(|e| Error::Predicate(e.to_string()))?;
            Ok(re.is_match(artifact))
        }
        PredicateKind::JsonSchema => {
            let schema: serde_json::Value = serde_json::from_str(&spec.arg)
                .map_err(|e| Error::Predicate(format!("schema is not JSON: {e}")))?;
            let compiled = jsonschema::JSONSchema::compile(&schema)
                .map_err(|e| Error::Predicate(format!("invalid schema: {e}")))?;
            Ok(serde_json::from_str::<serde_json::Value>(artifact)
                .map(|v| compiled.is_valid(&v))
                .unwrap_or(false))
        }
    }
}

/// Binary task success: every predicate holds on the extracted artifact, or
/// the terminal agenda item is saturated.
pub fn task_success<T: Real>(
    conversation: &Conversation,
    objective: &ObjectiveSpec,
    extractor: &dyn ArtifactExtractor,
    thresholds: &ContentThresholds,
    embedder: &Embedder<T>,
) -> Result<bool> {
    match objective {
        ObjectiveSpec::Artifact { criteria } => {
            let artifact = extractor.extract(crate::corpus::TurnSource::turns(conversation))?;
            for c in criteria {
                if !predicate_holds(c, &artifact)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        ObjectiveSpec::State { terminal_item } => {
            let agenda = conversation
                .agenda()
                .ok_or_else(|| Error::UnknownItem(terminal_item.to_string()))?;
            let idx = agenda
                .index_of(terminal_item.as_str())
                .ok_or_else(|| Error::UnknownItem(terminal_item.to_string()))?;
            sat(idx, conversation, agenda, thresholds, embedder)
        }
    }
}

/// Agenda items in traversal order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearizedAgenda {
    /// Item indices in order.
    pub order: Vec<usize>,
    /// Position of each item index in `order`.
    pub pos: Vec<usize>,
}

/// Depth-first preorder from the start item, successors in edge order.
/// Items unreachable from the start follow in declaration order.
pub fn linearize(agenda: &AgendaGraph) -> LinearizedAgenda {
    fn visit(g: &AgendaGraph, i: usize, seen: &mut [bool], order: &mut Vec<usize>) {
        if seen[i] {
            return;
        }
        seen[i] = true;
        order.push(i);
        for &j in g.successors(i) {
            visit(g, j, seen, order);
        }
    }
    let n = agenda.len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    visit(agenda, agenda.start(), &mut seen, &mut order);
    for i in 0..n {
        if !seen[i] {
            seen[i] = true;
            order.push(i);
        }
    }
    let mut pos = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    LinearizedAgenda { order, pos }
}

/// Block size, step and regression reach for trajectory consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    pub w: usize,
    pub delta: usize,
    pub r: usize,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec { w: 5, delta: 2, r: 1 }
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if self.w == 0 || self.delta == 0 {
            return Err(Error::Config("trajectory w and delta must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    /// Most relevant item per block.
    pub raw: Vec<usize>,
    /// `raw` with adjacent repeats collapsed.
    pub dedup: Vec<usize>,
}

/// Block start offsets `0, delta, ...`, ending with the first block that
/// reaches the last turn.
pub fn block_starts(n: usize, w: usize, delta: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 0;
    loop {
        out.push(s);
        if s + w >= n {
            break;
        }
        s += delta;
    }
    out
}

/// Maps each block of turns to the item with the highest summed similarity
/// (first declared on ties).
pub fn extract_trajectory<T: Real>(
    turns: &[Turn],
    agenda: &AgendaGraph,
    spec: &TrajectorySpec,
    embedder: &Embedder<T>,
) -> Result<Trajectory> {
    spec.validate()?;
    if turns.is_empty() {
        return Ok(Trajectory {
            raw: Vec::new(),
            dedup: Vec::new(),
        });
    }
    let texts: Vec<&str> = turns.iter().map(|t| t.text.as_str()).collect();
    let turn_e = embedder.embed_many(&texts)?;
    let items: Vec<&str> = agenda.items().iter().map(|a| a.text.as_str()).collect();
    let item_e = embedder.embed_many(&items)?;
    // sims[i][t]
    let sims = item_e
        .iter()
        .map(|a| turn_e.iter().map(|u| embedder.sim(u, a)).collect::<Result<Vec<T>>>())
        .collect::<Result<Vec<_>>>()?;
    let n = turns.len();
    let mut raw = Vec::new();
    for s in block_starts(n, spec.w, spec.delta) {
        let end = (s + spec.w).min(n);
        let mut best = 0;
        let mut best_score = T::neg_infinity();
        for (i, row) in sims.iter().enumerate() {
            let score: T = row[s..end].iter().copied().sum();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        raw.push(best);
    }
    let mut dedup = raw.clone();
    dedup.dedup();
    Ok(Trajectory { raw, dedup })
}

/// Fraction of consecutive trajectory moves with `|pos difference| <= r`.
/// `None` for fewer than two trajectory entries.
pub fn cs<T: Real>(trajectory: &Trajectory, order: &LinearizedAgenda, r: usize) -> Option<T> {
    let z = &trajectory.dedup;
    if z.len() < 2 {
        return None;
    }
    let regressions = z
        .windows(2)
        .filter(|p| order.pos[p[0]].abs_diff(order.pos[p[1]]) > r)
        .count();
    Some(T::one() - T::count(regressions) / T::count(z.len() - 1))
}

fn embed_turns<T: Real>(turns: &[Turn], embedder: &Embedder<T>) -> Result<Vec<EmbeddingVector<T>>> {
    let texts: Vec<&str> = turns.iter().map(|t| t.text.as_str()).collect();
    embedder.embed_many(&texts)
}

/// Euclidean distance between the first and last generated turn embeddings,
/// divided by the number of generated turns. `None` with no generated turns.
pub fn pd<T: Real>(generated: &[Turn], embedder: &Embedder<T>) -> Result<Option<T>> {
    let (Some(first), Some(last)) = (generated.first(), generated.last()) else {
        return Ok(None);
    };
    let a = embedder.embed(&first.text)?;
    let b = embedder.embed(&last.text)?;
    Ok(Some(
        math::euclidean(a.values(), b.values()) / T::count(generated.len()),
    ))
}

const HMP_EPS: f64 = 1e-8;

/// Harmonic mean of consecutive turn-to-turn Euclidean steps. `None` for
/// fewer than two generated turns.
pub fn hmp<T: Real>(generated: &[Turn], embedder: &Embedder<T>) -> Result<Option<T>> {
    if generated.len() < 2 {
        return Ok(None);
    }
    let e = embed_turns(generated, embedder)?;
    let steps: Vec<T> = e
        .windows(2)
        .map(|p| math::euclidean(p[0].values(), p[1].values()))
        .collect();
    Ok(math::harmonic_mean_step(&steps, T::lit(HMP_EPS)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AgendaItem, TurnSource};
    use crate::providers::{ClampMode, EmbeddingBackend};

    fn items(ids: &[&str]) -> Vec<AgendaItem> {
        ids.iter()
            .map(|&i| AgendaItem {
                id: i.into(),
                text: i.to_owned(),
            })
            .collect()
    }

    #[test]
    fn linearize_chain_diamond_isolated() {
        let g = AgendaGraph::chain(items(&["a", "b", "c"])).unwrap();
        assert_eq!(linearize(&g).order, vec![0, 1, 2]);
        let g = AgendaGraph::new(
            items(&["a", "b", "c", "d", "e"]),
            [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
            "a",
        )
        .unwrap();
        let l = linearize(&g);
        // a, b, d, c, then isolated e
        assert_eq!(l.order, vec![0, 1, 3, 2, 4]);
        assert_eq!(l.pos, vec![0, 1, 3, 2, 4]);
    }

    #[test]
    fn block_layout() {
        assert_eq!(block_starts(10, 5, 5), vec![0, 5]);
        assert_eq!(block_starts(3, 5, 2), vec![0]);
        assert_eq!(block_starts(8, 5, 2), vec![0, 2, 4]);
        assert_eq!(block_starts(5, 5, 2), vec![0]);
    }

    /// One axis per keyword `a`..`e`.
    struct Axes;

    impl EmbeddingBackend for Axes {
        fn model_id(&self) -> String {
            "axes".into()
        }
        fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
            Ok(texts
                .iter()
                .map(|t| {
                    let mut v = vec![0.0f32; 5];
                    for w in t.split_whitespace() {
                        let c = w.as_bytes()[0];
                        if (b'a'..=b'e').contains(&c) {
                            v[(c - b'a') as usize] += 1.0;
                        }
                    }
                    v
                })
                .collect())
        }
    }

    fn axes() -> Embedder<f64> {
        Embedder::new(Box::new(Axes), None, ClampMode::Zero)
    }

    #[test]
    fn trajectory_two_halves() {
        let g = AgendaGraph::chain(items(&["a", "b"])).unwrap();
        let mut turns: Vec<(&str, &str)> = (0..5).map(|_| ("x", "a")).collect();
        turns.extend((0..5).map(|_| ("y", "b")));
        let c = Conversation::new("c", turns).unwrap();
        let spec = TrajectorySpec { w: 5, delta: 5, r: 1 };
        let t = extract_trajectory(c.turns(), &g, &spec, &axes()).unwrap();
        assert_eq!(t.dedup, vec![0, 1]);
        assert_eq!(cs::<f64>(&t, &linearize(&g), 1), Some(1.0));
    }

    #[test]
    fn cs_regression_and_undefined() {
        let g = AgendaGraph::chain(items(&["a", "b", "c", "d", "e"])).unwrap();
        let l = linearize(&g);
        let t = Trajectory {
            raw: vec![0, 3],
            dedup: vec![0, 3],
        };
        assert_eq!(cs::<f64>(&t, &l, 1), Some(0.0));
        let one = Trajectory {
            raw: vec![2, 2],
            dedup: vec![2],
        };
        assert_eq!(cs::<f64>(&one, &l, 1), None);
    }

    #[test]
    fn pd_and_hmp() {
        let e = axes();
        let c = Conversation::new("c", [("x", "a"), ("y", "b")]).unwrap();
        let v = pd(c.turns(), &e).unwrap().unwrap();
        assert!((v - 2f64.sqrt() / 2.0).abs() < 1e-12);
        let c1 = Conversation::new("c", [("x", "a")]).unwrap();
        assert_eq!(pd(c1.turns(), &e).unwrap(), Some(0.0));
        assert_eq!(hmp(c1.turns(), &e).unwrap(), None);
        assert_eq!(pd::<f64>(&[], &e).unwrap(), None);
        let h = math::harmonic_mean_step(&[0.1f64, 0.3], 1e-8).unwrap();
        assert!((h - 0.15).abs() < 1e-6);
    }

    #[test]
    fn acr_pe() {
        let cov = AgendaCoverage::<f64> {
            relevant: vec![vec![0, 1, 2], vec![3, 4, 5, 6, 7], vec![], vec![8]],
            info_cov: vec![0.5, 0.6, 0.0, 0.1],
            tau_cov: 0.3,
        };
        assert_eq!(acr(&cov), 0.5);
        assert!((pe(&cov).unwrap() - 4.0).abs() < 1e-6);
        let none = AgendaCoverage::<f64> {
            relevant: vec![vec![]],
            info_cov: vec![0.0],
            tau_cov: 0.3,
        };
        assert_eq!(pe(&none), None);
        assert_eq!(acr(&none), 0.0);
    }

    #[test]
    fn predicates() {
        let p = |kind, arg: &str| PredicateSpec {
            kind,
            arg: arg.to_owned(),
        };
        assert!(predicate_holds(&p(PredicateKind::Contains, "SELECT"), "SELECT 1").unwrap());
        assert!(predicate_holds(&p(PredicateKind::Regex, r"^\d+$"), "42").unwrap());
        assert!(predicate_holds(&p(PredicateKind::Regex, "("), "x").is_err());
        let schema = r#"{"type":"object","required":["answer"]}"#;
        assert!(predicate_holds(&p(PredicateKind::JsonSchema, schema), r#"{"answer":1}"#).unwrap());
        assert!(!predicate_holds(&p(PredicateKind::JsonSchema, schema), r#"{"x":1}"#).unwrap());
        assert!(!predicate_holds(&p(PredicateKind::JsonSchema, schema), "not json").unwrap());
    }

    #[test]
    fn artifact_extraction() {
        let c = Conversation::new(
            "c",
            [
                ("x", "draft:\n```\nold\n```"),
                ("y", "final:\n```json\n{\"answer\": 1}\n```\nthanks"),
                ("z", "looks good"),
            ],
        )
        .unwrap();
        assert_eq!(LastFencedBlock.extract(c.turns()).unwrap(), "{\"answer\": 1}");
        let none = Conversation::new("c", [("x", "no code")]).unwrap();
        assert!(matches!(
            LastFencedBlock.extract(none.turns()),
            Err(Error::ArtifactExtraction(_))
        ));
        let obj = ObjectiveSpec::Artifact {
            criteria: vec![
                PredicateSpec {
                    kind: PredicateKind::Contains,
                    arg: "answer".into(),
                },
                PredicateSpec {
                    kind: PredicateKind::Regex,
                    arg: "nope".into(),
                },
            ],
        };
        let e = Embedder::<f64>::baseline(64, 0);
        let th = ContentThresholds::default();
        assert!(!task_success(&c, &obj, &LastFencedBlock, &th, &e).unwrap());
    }

    #[test]
    fn state_mode_matches_sat() {
        let e = axes();
        let g = AgendaGraph::chain(items(&["a", "b"])).unwrap();
        // diverse turns on a: "a", "a b", "a c" all relevant to a (sim > 0.6)
        let c = Conversation::new("c", [("x", "a"), ("y", "a a b"), ("z", "a a c")])
            .unwrap()
            .with_agenda(g.clone())
            .with_objective(ObjectiveSpec::State {
                terminal_item: "a".into(),
            })
            .unwrap();
        let th = ContentThresholds {
            tau_cov: 0.05,
            ..Default::default()
        };
        let obj = c.objective().unwrap().clone();
        let s = sat(0, &c, &g, &th, &e).unwrap();
        assert_eq!(task_success(&c, &obj, &LastFencedBlock, &th, &e).unwrap(), s);
        assert!(s);
        assert!(!sat(1, &c, &g, &th, &e).unwrap());
    }
}

//! Next-message content quality.
//!
//! Objective-guided: information coverage of agenda items, current-item
//! tracking, next-item search and the progression score AP. Objective-free:
//! lexical novelty (LNR, LNR-E, LNR-E-w), message-level semantic novelty,
//! dialogue-act fit, LM likelihood and topic expansion.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{AgendaGraph, ContextWindow, Conversation, TurnSource};
use crate::error::{Error, Result};
use crate::math;
use crate::providers::{
    simplex_tolerance, ActTagger, ActTransitions, Embedder, EmbeddingVector, IdfTable,
    LanguageModel, TopicDistribution, TopicModel,
};
use crate::scalar::Real;
use crate::text;

/// Free parameters of the content metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentThresholds {
    /// Similarity above which a turn is relevant to an agenda item.
    pub tau_rel: f64,
    /// Coverage above which an agenda item is saturated.
    pub tau_cov: f64,
    /// Unit similarity below which a unit counts as truly novel.
    pub tau_lnr: f64,
    /// Topic shift (JSD, base 2) that stops context expansion in TES.
    pub tau_topic: f64,
    /// Scale of the count factor in InfoCov.
    pub gamma: f64,
    /// Mass covered by the dominant topic set in TES.
    pub rho: f64,
    /// Context expansion step in TES.
    pub delta: usize,
    /// Turns of support context prepended to the candidate in TES.
    pub ell: usize,
}

impl Default for ContentThresholds {
    fn default() -> Self {
        ContentThresholds {
            tau_rel: 0.6,
            tau_cov: 0.3,
            tau_lnr: 0.7,
            tau_topic: 0.2,
            gamma: 3.0,
            rho: 0.8,
            delta: 5,
            ell: 3,
        }
    }
}

impl ContentThresholds {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("tau_rel", self.tau_rel)?;
        unit("tau_cov", self.tau_cov)?;
        unit("tau_lnr", self.tau_lnr)?;
        unit("tau_topic", self.tau_topic)?;
        unit("rho", self.rho)?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.delta == 0 || self.ell == 0 {
            return Err(Error::Config("delta and ell must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-item relevant turns and coverage over one set of turns.
#[derive(Debug, Clone, PartialEq)]
pub struct AgendaCoverage<T> {
    /// Indices (into the scored turns) relevant to each item.
    pub relevant: Vec<Vec<usize>>,
    pub info_cov: Vec<T>,
    pub tau_cov: T,
}

impl<T: Real> AgendaCoverage<T> {
    pub fn saturated(&self, item: usize) -> bool {
        self.info_cov[item] > self.tau_cov
    }

    /// Item with the most relevant turns; first declared on ties.
    pub fn current_item(&self) -> usize {
        let mut best = 0;
        for (i, r) in self.relevant.iter().enumerate() {
            if r.len() > self.relevant[best].len() {
                best = i;
            }
        }
        best
    }

    pub fn saturated_count(&self) -> usize {
        (0..self.info_cov.len()).filter(|&i| self.saturated(i)).count()
    }
}

/// `(1 - exp(-n / gamma))` times the mean dissimilarity over unordered pairs
/// of relevant turns; zero for fewer than two turns.
pub fn info_cov_of<T: Real>(
    relevant: &[&EmbeddingVector<T>],
    gamma: f64,
    embedder: &Embedder<T>,
) -> Result<T> {
    let n = relevant.len();
    if n < 2 {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            total = total + (T::one() - embedder.sim(relevant[i], relevant[j])?);
        }
    }
    let pairs = T::count(n * (n - 1) / 2);
    let count_factor = T::one() - (-T::count(n) / T::lit(gamma)).exp();
    Ok(count_factor * total / pairs)
}

fn relevant_indices<T: Real>(
    item: &EmbeddingVector<T>,
    turns: &[EmbeddingVector<T>],
    tau_rel: T,
    embedder: &Embedder<T>,
) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, t) in turns.iter().enumerate() {
        if embedder.sim(item, t)? > tau_rel {
            out.push(i);
        }
    }
    Ok(out)
}

/// Coverage of every agenda item over pre-embedded turns.
pub fn coverage_from_embeddings<T: Real>(
    agenda: &AgendaGraph,
    item_embs: &[EmbeddingVector<T>],
    turn_embs: &[EmbeddingVector<T>],
    thresholds: &ContentThresholds,
    embedder: &Embedder<T>,
) -> Result<AgendaCoverage<T>> {
    let tau_rel = T::lit(thresholds.tau_rel);
    let mut relevant = Vec::with_capacity(agenda.len());
    let mut info_cov = Vec::with_capacity(agenda.len());
    for item in item_embs {
        let rel = relevant_indices(item, turn_embs, tau_rel, embedder)?;
        let members: Vec<&EmbeddingVector<T>> = rel.iter().map(|&i| &turn_embs[i]).collect();
        info_cov.push(info_cov_of(&members, thresholds.gamma, embedder)?);
        relevant.push(rel);
    }
    Ok(AgendaCoverage {
        relevant,
        info_cov,
        tau_cov: T::lit(thresholds.tau_cov),
    })
}

/// Coverage of every agenda item over `texts`.
pub fn agenda_coverage<T: Real>(
    agenda: &AgendaGraph,
    texts: &[&str],
    thresholds: &ContentThresholds,
    embedder: &Embedder<T>,
) -> Result<AgendaCoverage<T>> {
    let items: Vec<&str> = agenda.items().iter().map(|a| a.text.as_str()).collect();
    let item_embs = embedder.embed_many(&items)?;
    let turn_embs = embedder.embed_many(texts)?;
    coverage_from_embeddings(agenda, &item_embs, &turn_embs, thresholds, embedder)
}

/// InfoCov of one item over the window.
pub fn info_cov<T: Real>(
    item_text: &str,
    window: &ContextWindow<'_>,
    thresholds: &ContentThresholds,
    embedder: &Embedder<T>,
) -> Result<T> {
    let item = embedder.embed(item_text)?;
    let turns = embedder.embed_many(&window.texts())?;
    let rel = relevant_indices(&item, &turns, T::lit(thresholds.tau_rel), embedder)?;
    let members: Vec<&EmbeddingVector<T>> = rel.iter().map(|&i| &turns[i]).collect();
    info_cov_of(&members, thresholds.gamma, embedder)
}

/// Most discussed agenda item in the window (by relevant-turn count).
pub fn current_item<T: Real>(
    window: &ContextWindow<'_>,
    agenda: &AgendaGraph,
    thresholds: &ContentThresholds,
    embedder: &Embedder<T>,
) -> Result<usize> {
    Ok(agenda_coverage(agenda, &window.texts(), thresholds, embedder)?.current_item())
}

/// Depth-first search from `from` for the first item that is not saturated:
/// the item itself, then successors, then predecessors, each in edge order.
/// Every item is visited at most once.
pub fn next_unsaturated(
    agenda: &AgendaGraph,
    from: usize,
    saturated: impl Fn(usize) -> bool,
) -> Option<usize> {
    fn dfs(
        g: &AgendaGraph,
        i: usize,
        discovered: &mut [bool],
        saturated: &dyn Fn(usize) -> bool,
    ) -> Option<usize> {
        if discovered[i] {
            return None;
        }
        discovered[i] = true;
        if !saturated(i) {
            return Some(i);
        }
        for &j in g.successors(i) {
            if let Some(r) = dfs(g, j, discovered, saturated) {
                return Some(r);
            }
        }
        for &j in g.predecessors(i) {
            if let Some(r) = dfs(g, j, discovered, saturated) {
                return Some(r);
            }
        }
        None
    }
    let mut discovered = vec![false; agenda.len()];
    dfs(agenda, from, &mut discovered, &saturated)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApOutcome<T> {
    pub score: T,
    /// Item the candidate was scored against.
    pub target: Option<usize>,
    /// True when every reachable item is saturated.
    pub exhausted: bool,
}

/// Agenda-guided progression: relevance to the target item times the
/// information the candidate adds over the item's relevant window turns.
pub fn ap<T: Real>(
    candidate: &str,
    window: &ContextWindow<'_>,
    agenda: &AgendaGraph,
    thresholds: &ContentThresholds,
    embedder: &Embedder<T>,
) -> Result<ApOutcome<T>> {
    let items: Vec<&str> = agenda.items().iter().map(|a| a.text.as_str()).collect();
    let item_embs = embedder.embed_many(&items)?;
    let turn_embs = embedder.embed_many(&window.texts())?;
    let cov = coverage_from_embeddings(agenda, &item_embs, &turn_embs, thresholds, embedder)?;
    let current = cov.current_item();
    let target = if cov.saturated(current) {
        next_unsaturated(agenda, current, |i| cov.saturated(i))
    } else {
        Some(current)
    };
    let Some(target) = target else {
        return Ok(ApOutcome {
            score: T::zero(),
            target: None,
            exhausted: true,
        });
    };
    let u = embedder.embed(candidate)?;
    let rel = &cov.relevant[target];
    let gain = if rel.is_empty() {
        T::one()
    } else {
        let mut s = T::zero();
        for &i in rel {
            s = s + (T::one() - embedder.sim(&u, &turn_embs[i])?);
        }
        s / T::count(rel.len())
    };
    Ok(ApOutcome {
        score: embedder.sim(&u, &item_embs[target])? * gain,
        target: Some(target),
        exhausted: false,
    })
}

/// Union of the lexical units of the window turns.
pub fn window_units(window: &ContextWindow<'_>) -> BTreeSet<String> {
    window
        .turns()
        .iter()
        .flat_map(|t| text::lexical_units(&t.text))
        .collect()
}

/// Fraction of the candidate's lexical units absent from the window.
pub fn lnr<T: Real>(candidate: &str, window: &ContextWindow<'_>) -> Option<T> {
    let units = text::lexical_units(candidate);
    if units.is_empty() {
        return None;
    }
    let seen = window_units(window);
    let novel = units.iter().filter(|u| !seen.contains(*u)).count();
    Some(T::count(novel) / T::count(units.len()))
}

/// Units of `units` whose best similarity to any context unit is below `tau`.
/// With no context units every unit is truly novel.
pub fn truly_novel_units<T: Real>(
    units: &BTreeSet<String>,
    context: &BTreeSet<String>,
    tau: f64,
    embedder: &Embedder<T>,
) -> Result<BTreeSet<String>> {
    if context.is_empty() {
        return Ok(units.clone());
    }
    let ctx: Vec<&str> = context.iter().map(String::as_str).collect();
    let ctx_e = embedder.embed_many(&ctx)?;
    let tau = T::lit(tau);
    let mut out = BTreeSet::new();
    for u in units {
        if context.contains(u) {
            continue;
        }
        let e = embedder.embed(u)?;
        let mut best = T::zero();
        for c in &ctx_e {
            best = best.max(embedder.sim(&e, c)?);
            if best >= tau {
                break;
            }
        }
        if best < tau {
            out.insert(u.clone());
        }
    }
    Ok(out)
}

/// LNR-E: like LNR, but a unit is novel only if no context unit is
/// semantically close to it.
pub fn lnr_e<T: Real>(
    candidate: &str,
    window: &ContextWindow<'_>,
    tau_lnr: f64,
    embedder: &Embedder<T>,
) -> Result<Option<T>> {
    let units = text::lexical_units(candidate);
    if units.is_empty() {
        return Ok(None);
    }
    let tn = truly_novel_units(&units, &window_units(window), tau_lnr, embedder)?;
    Ok(Some(T::count(tn.len()) / T::count(units.len())))
}

/// IDF-weighted LNR-E.
pub fn lnr_e_w<T: Real>(
    candidate: &str,
    window: &ContextWindow<'_>,
    tau_lnr: f64,
    embedder: &Embedder<T>,
    idf: &IdfTable,
) -> Result<Option<T>> {
    let units = text::lexical_units(candidate);
    if units.is_empty() {
        return Ok(None);
    }
    let tn = truly_novel_units(&units, &window_units(window), tau_lnr, embedder)?;
    let num: f64 = tn.iter().map(|u| idf.weight(u)).sum();
    let den: f64 = units.iter().map(|u| idf.weight(u)).sum();
    Ok(Some(T::lit(num / den)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnsMode {
    Min,
    Avg,
}

/// Message-level semantic novelty: distance `1 - sim` from the candidate to
/// the window turns, nearest or averaged.
pub fn m_sns<T: Real>(
    candidate: &str,
    window: &ContextWindow<'_>,
    mode: SnsMode,
    embedder: &Embedder<T>,
) -> Result<T> {
    if window.is_empty() {
        return Err(Error::WindowOutOfRange { end: 0, len: 0 });
    }
    let u = embedder.embed(candidate)?;
    let dists = embedder
        .embed_many(&window.texts())?
        .iter()
        .map(|c| Ok(T::one() - embedder.sim(&u, c)?))
        .collect::<Result<Vec<T>>>()?;
    Ok(match mode {
        SnsMode::Min => dists.iter().copied().fold(T::one(), T::min),
        SnsMode::Avg => dists.iter().copied().sum::<T>() / T::count(dists.len()),
    })
}

/// Probability of the candidate's dialogue act given the window's acts.
pub fn daf<T: Real>(
    candidate: &str,
    window: &ContextWindow<'_>,
    tagger: &dyn ActTagger,
    transitions: &ActTransitions,
) -> Result<T> {
    let history = tagger.tag_sequence(&window.texts())?;
    let act = tagger.tag(candidate, history.last().copied())?;
    Ok(transitions.prob(&history, act))
}

/// `exp` of the mean token log-probability of the candidate given the window.
pub fn ll<T: Real>(
    candidate: &str,
    window: &ContextWindow<'_>,
    lm: &dyn LanguageModel,
) -> Result<T> {
    let lp = lm.token_logprobs(&window.texts(), candidate)?;
    Ok(T::lit(lp.mean()).exp())
}

/// Smallest prefix of topics, by descending mass then index, whose mass
/// reaches `rho`. Zero-mass topics are never dominant.
pub fn dominant_topics<T: Real>(pi: &[T], rho: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] > T::zero()).collect();
    order.sort_by(|&a, &b| pi[b].partial_cmp(&pi[a]).expect("finite").then(a.cmp(&b)));
    let target = T::lit(rho - simplex_tolerance::<T>(pi.len()));
    let mut cum = T::zero();
    let mut out = Vec::new();
    for i in order {
        if cum >= target {
            break;
        }
        cum = cum + pi[i];
        out.push(i);
    }
    out
}

/// Established context size: the first multiple of `delta` at which adding
/// `delta` more turns shifts the topic mixture by more than `tau_topic`; the
/// full history if that never happens.
pub fn stable_context_size<T: Real>(
    history: &[&str],
    thresholds: &ContentThresholds,
    topics: &dyn TopicModel<T>,
) -> Result<usize> {
    let avail = history.len();
    let delta = thresholds.delta;
    // each suffix is scored at most once: `h + delta` is the next step's `h`
    let mut prev: Option<TopicDistribution<T>> = None;
    let mut h = delta;
    while h < avail {
        let a = match prev.take() {
            Some(a) => a,
            None => topics.distribution(&history[avail - h..].join("\n"))?,
        };
        let b = topics.distribution(&history[avail - (h + delta).min(avail)..].join("\n"))?;
        if math::jensen_shannon_bits(a.probs(), b.probs()).to_f64_lossy() > thresholds.tau_topic {
            return Ok(h);
        }
        prev = Some(b);
        h += delta;
    }
    Ok(avail)
}

/// Topic expansion score: mass the candidate (with `ell` turns of support
/// context) puts on topics outside the dominant set of the established
/// context. `None` when a text has no scorable tokens.
pub fn tes<T: Real>(
    candidate: &str,
    conversation: &Conversation,
    end_index: usize,
    thresholds: &ContentThresholds,
    topics: &dyn TopicModel<T>,
) -> Result<Option<T>> {
    if end_index == 0 || end_index > conversation.len() {
        return Err(Error::WindowOutOfRange {
            end: end_index,
            len: conversation.len(),
        });
    }
    let history: Vec<&str> = conversation.turns()[..end_index]
        .iter()
        .map(|t| t.text.as_str())
        .collect();
    let run = || -> Result<T> {
        let h_star = stable_context_size(&history, thresholds, topics)?;
        let pi = topics.distribution(&history[history.len() - h_star..].join("\n"))?;
        let ell = thresholds.ell.min(history.len());
        let mut support: Vec<&str> = history[history.len() - ell..].to_vec();
        support.push(candidate);
        let q = topics.distribution(&support.join("\n"))?;
        let dom = dominant_topics(pi.probs(), thresholds.rho);
        let off: T = (0..q.len())
            .filter(|l| !dom.contains(l))
            .map(|l| q.probs()[l])
            .sum();
        Ok(off.max(T::zero()).min(T::one()))
    };
    match run() {
        Ok(v) => Ok(Some(v)),
        Err(Error::EmptyText) => Ok(None),
        Err(e) => Err(e),
    }
}

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_metrics, Aggregate};
use super::config::RunConfig;
use crate::corpus::{context_window, parse_dataset, parse_profiles, Conversation, Dataset, TurnSource};
use crate::error::{Error, Result};
use crate::global_consistency::{self as gc, DcMode};
use crate::global_content::{self as gco, ArtifactExtractor, LastFencedBlock};
use crate::global_speaker as gs;
use crate::local_consistency::{self as lc, LsccMode};
use crate::local_content::{self as lco, SnsMode};
use crate::local_speaker::{self as ls, AddressDetector, EsMode};
use crate::providers::ProviderBundle;

/// Metric names, in report order within each suite.
pub mod names {
    pub const LOCAL_SPEAKER: &[&str] = &[
        "DNR", "IR", "PF", "LS-ES-avg", "LS-ES-max", "LS-ES-aug-avg", "LS-ES-aug-max", "LS-TA",
    ];
    pub const LOCAL_CONTENT: &[&str] = &[
        "AP", "LNR", "LNR-E", "LNR-E-w", "M-SNS-min", "M-SNS-avg", "DAF", "LL", "TES",
    ];
    pub const LOCAL_CONSISTENCY: &[&str] = &["LSCC-avg", "LSCC-max", "LSCC-min", "LSCC-aug"];
    pub const GLOBAL_SPEAKER: &[&str] = &["NSE", "SC-Gini"];
    pub const GLOBAL_CONTENT: &[&str] = &["TaskSuccess", "ACR", "PE", "CS", "PD", "HMP"];
    pub const GLOBAL_CONSISTENCY: &[&str] = &[
        "GSCC-DC-avg",
        "GSCC-DC-max",
        "GSCC-DC-avg-multi",
        "GSCC-DC-max-multi",
        "GSCC-DC-avg-aug",
        "GSCC-DC-max-aug",
    ];
}

/// Per-conversation metric values and, for each null, why it is null.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConversationScores {
    pub values: BTreeMap<String, Option<f64>>,
    pub null_reasons: BTreeMap<String, String>,
}

impl ConversationScores {
    fn set(&mut self, metric: &str, v: Option<f64>, reason: &str) {
        self.values.insert(metric.to_owned(), v);
        if v.is_none() {
            self.null_reasons.insert(metric.to_owned(), reason.to_owned());
        }
    }

    fn null_all(&mut self, metrics: &[&str], reason: &str) {
        for m in metrics {
            self.set(m, None, reason);
        }
    }
}

/// Report body. `created_unix` is the only field that varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fingerprint: String,
    pub providers: BTreeMap<String, String>,
    pub per_conversation: BTreeMap<String, BTreeMap<String, Option<f64>>>,
    pub null_reasons: BTreeMap<String, BTreeMap<String, String>>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub by_label: BTreeMap<String, BTreeMap<String, Aggregate>>,
    pub errors: BTreeMap<String, ConversationError>,
    pub created_unix: u64,
}

/// Why a conversation has no scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationError {
    /// `provider` for backend failures, `data` otherwise.
    pub kind: String,
    pub message: String,
}

impl ConversationError {
    fn from_error(e: &Error) -> Self {
        ConversationError {
            kind: if e.is_provider_error() { "provider" } else { "data" }.to_owned(),
            message: e.to_string(),
        }
    }

    pub fn is_provider(&self) -> bool {
        self.kind == "provider"
    }
}

impl MetricReport {
    /// Serialized report without the wall-clock field.
    pub fn body_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("created_unix");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("not a report: {e}")))
    }

    /// One row per conversation, one column per metric; nulls are empty.
    pub fn to_csv(&self) -> Result<String> {
        let metrics: BTreeSet<&str> = self
            .per_conversation
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["conversation"];
        header.extend(metrics.iter().copied());
        let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&header).map_err(csv_err)?;
        for (key, row) in &self.per_conversation {
            let mut rec = vec![key.clone()];
            for m in &metrics {
                rec.push(match row.get(*m).copied().flatten() {
                    Some(v) => v.to_string(),
                    None => String::new(),
                });
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

#[derive(Default)]
pub struct EvalOptions {
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    /// Earlier report whose per-conversation results are reused.
    pub resume: Option<MetricReport>,
}

/// Loads the configured datasets and profiles and evaluates them.
pub fn evaluate(config: &RunConfig, options: &EvalOptions) -> Result<MetricReport> {
    config.validate()?;
    if config.datasets.is_empty() {
        return Err(Error::Config("no datasets configured".into()));
    }
    let profiles = match &config.profiles {
        Some(p) => Some(parse_profiles(p)?),
        None => None,
    };
    let mut datasets = Vec::with_capacity(config.datasets.len());
    for path in &config.datasets {
        let mut d = parse_dataset(path)?;
        if let Some(p) = &profiles {
            d = d.with_profiles(p.clone());
        }
        datasets.push(d);
    }
    evaluate_datasets(&datasets, config, options)
}

/// Evaluates in-memory datasets under `config`.
pub fn evaluate_datasets(
    datasets: &[Dataset],
    config: &RunConfig,
    options: &EvalOptions,
) -> Result<MetricReport> {
    config.validate()?;
    let labels: BTreeSet<&str> = datasets.iter().map(|d| d.source_label.as_str()).collect();
    if labels.len() != datasets.len() {
        return Err(Error::Config("dataset labels (file stems) must be distinct".into()));
    }
    let fingerprint = config.fingerprint();
    let previous = match &options.resume {
        Some(r) if r.fingerprint != fingerprint => {
            return Err(Error::FingerprintMismatch {
                expected: fingerprint,
                found: r.fingerprint.clone(),
            })
        }
        other => other.as_ref(),
    };

    let refs: Vec<&Dataset> = datasets.iter().collect();
    let bundle = ProviderBundle::<f64>::build(&refs, &config.providers, config.seed)?;
    let multi = datasets.len() > 1;
    let jobs: Vec<(String, &Dataset, &Conversation)> = datasets
        .iter()
        .flat_map(|d| {
            d.conversations.iter().map(move |c| {
                let key = if multi {
                    format!("{}/{}", d.source_label, c.id())
                } else {
                    c.id().to_owned()
                };
                (key, d, c)
            })
        })
        .collect();

    let ctx = Ctx {
        config,
        bundle: &bundle,
        extractor: &LastFencedBlock,
        detector: AddressDetector::default(),
    };
    let run = || -> Vec<(String, Result<ConversationScores>)> {
        jobs.par_iter()
            .map(|(key, d, c)| {
                if let Some(prev) = previous {
                    if let Some(values) = prev.per_conversation.get(key) {
                        return (
                            key.clone(),
                            Ok(ConversationScores {
                                values: values.clone(),
                                null_reasons: prev.null_reasons.get(key).cloned().unwrap_or_default(),
                            }),
                        );
                    }
                }
                (key.clone(), ctx.conversation(c, d))
            })
            .collect()
    };
    let results = match options.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut per_conversation = BTreeMap::new();
    let mut null_reasons = BTreeMap::new();
    let mut errors = BTreeMap::new();
    let mut label_of = BTreeMap::new();
    for ((key, result), (_, d, _)) in results.into_iter().zip(&jobs) {
        label_of.insert(key.clone(), d.source_label.clone());
        match result {
            Ok(s) => {
                if !s.null_reasons.is_empty() {
                    null_reasons.insert(key.clone(), s.null_reasons);
                }
                per_conversation.insert(key, s.values);
            }
            Err(e) => {
                errors.insert(key, ConversationError::from_error(&e));
            }
        }
    }
    let aggregates = aggregate_metrics(per_conversation.values());
    let mut by_label = BTreeMap::new();
    for d in datasets {
        let rows: Vec<&BTreeMap<String, Option<f64>>> = per_conversation
            .iter()
            .filter(|(k, _)| label_of.get(*k) == Some(&d.source_label))
            .map(|(_, v)| v)
            .collect();
        by_label.insert(d.source_label.clone(), aggregate_metrics(rows.iter().copied()));
    }
    Ok(MetricReport {
        fingerprint,
        providers: bundle.model_ids(),
        per_conversation,
        null_reasons,
        aggregates,
        by_label,
        errors,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    })
}

/// Null reason for an error that only makes a metric undefined; `None` for
/// errors that must fail the conversation.
fn null_reason(e: &Error) -> Option<&'static str> {
    match e {
        Error::EmptyText => Some("no_tokens"),
        Error::NoSpeakerEvidence(_) => Some("no_speaker_evidence"),
        Error::UnstableCentroid(_) => Some("unstable_centroid"),
        Error::SpeakerOwnsAll(_) => Some("single_speaker"),
        Error::SpeakerAbsent(_) => Some("speaker_absent"),
        Error::ArtifactExtraction(_) => Some("artifact_extraction"),
        Error::Numerical(_) => Some("numerical"),
        _ => None,
    }
}

/// Mean of the defined values seen at each evaluation point, plus the first
/// reason a value was missing.
#[derive(Default)]
struct PointMeans {
    sums: BTreeMap<&'static str, (f64, usize)>,
    reasons: BTreeMap<&'static str, &'static str>,
}

impl PointMeans {
    fn push(&mut self, metric: &'static str, v: Result<Option<f64>>, undefined: &'static str) -> Result<()> {
        let entry = self.sums.entry(metric).or_insert((0.0, 0));
        match v {
            Ok(Some(x)) => {
                entry.0 += x;
                entry.1 += 1;
            }
            Ok(None) => {
                self.reasons.entry(metric).or_insert(undefined);
            }
            Err(e) => match null_reason(&e) {
                Some(r) => {
                    self.reasons.entry(metric).or_insert(r);
                }
                None => return Err(e),
            },
        }
        Ok(())
    }

    fn skip(&mut self, metric: &'static str, reason: &'static str) {
        self.sums.entry(metric).or_insert((0.0, 0));
        self.reasons.entry(metric).or_insert(reason);
    }

    fn finish(self, out: &mut ConversationScores) {
        for (m, (sum, n)) in self.sums {
            if n > 0 {
                out.set(m, Some(sum / n as f64), "");
            } else {
                out.set(m, None, self.reasons.get(m).copied().unwrap_or("undefined"));
            }
        }
    }
}

fn settle(out: &mut ConversationScores, metric: &str, v: Result<Option<f64>>, undefined: &str) -> Result<()> {
    match v {
        Ok(x) => out.set(metric, x, undefined),
        Err(e) => match null_reason(&e) {
            Some(r) => out.set(metric, None, r),
            None => return Err(e),
        },
    }
    Ok(())
}

struct Ctx<'a> {
    config: &'a RunConfig,
    bundle: &'a ProviderBundle<f64>,
    extractor: &'a dyn ArtifactExtractor,
    detector: AddressDetector,
}

impl Ctx<'_> {
    fn conversation(&self, c: &Conversation, d: &Dataset) -> Result<ConversationScores> {
        let mut out = ConversationScores::default();
        let s = &self.config.suites;
        if s.any_local() {
            self.local(c, d, &mut out)?;
        }
        if s.global_speaker {
            self.global_speaker(c, &mut out)?;
        }
        if s.global_content {
            self.global_content(c, &mut out)?;
        }
        if s.global_consistency {
            self.global_consistency(c, d, &mut out)?;
        }
        Ok(out)
    }

    fn local(&self, c: &Conversation, d: &Dataset, out: &mut ConversationScores) -> Result<()> {
        let cfg = self.config;
        let s = &cfg.suites;
        let start = c.history_length().max(1);
        if start >= c.len() {
            for (on, metrics) in [
                (s.local_speaker, names::LOCAL_SPEAKER),
                (s.local_content, names::LOCAL_CONTENT),
                (s.local_consistency, names::LOCAL_CONSISTENCY),
            ] {
                if on {
                    out.null_all(metrics, "no_eval_points");
                }
            }
            return Ok(());
        }
        let b = self.bundle;
        let e = &b.embedder;
        let th = &cfg.thresholds;
        let mut acc = PointMeans::default();
        for t in start..c.len() {
            let w = context_window(c, t, cfg.k)?;
            let turn = &c.turns()[t];
            let (sp, u) = (turn.speaker.as_str(), turn.text.as_str());
            let profile = d.profile(sp);
            let background = profile.and_then(|p| p.background_text()).is_some();
            if s.local_speaker {
                acc.push("DNR", Ok(Some(f64::from(u8::from(ls::dnr(sp, &w, &self.detector))))), "")?;
                acc.push("IR", Ok(Some(ls::ir(sp, &w, &cfg.decay))), "")?;
                acc.push("PF", Ok(Some(ls::pf(sp, &w))), "")?;
                acc.push("LS-ES-avg", ls::ls_es(sp, &w, EsMode::Avg, profile, e), "undefined")?;
                acc.push("LS-ES-max", ls::ls_es(sp, &w, EsMode::Max, profile, e), "undefined")?;
                if background {
                    acc.push("LS-ES-aug-avg", ls::ls_es_aug(sp, &w, EsMode::Avg, profile, e), "undefined")?;
                    acc.push("LS-ES-aug-max", ls::ls_es_aug(sp, &w, EsMode::Max, profile, e), "undefined")?;
                } else {
                    acc.skip("LS-ES-aug-avg", "no_profile");
                    acc.skip("LS-ES-aug-max", "no_profile");
                }
                acc.push("LS-TA", ls::ls_ta(sp, &w, b.topics.as_ref()), "undefined")?;
            }
            if s.local_content {
                match c.agenda() {
                    Some(a) => acc.push(
                        "AP",
                        lco::ap(u, &w, a, th, e).map(|o| Some(o.score)),
                        "undefined",
                    )?,
                    None => acc.skip("AP", "no_agenda"),
                }
                acc.push("LNR", Ok(lco::lnr(u, &w)), "no_units")?;
                acc.push("LNR-E", lco::lnr_e(u, &w, th.tau_lnr, e), "no_units")?;
                acc.push("LNR-E-w", lco::lnr_e_w(u, &w, th.tau_lnr, e, &b.idf), "no_units")?;
                acc.push("M-SNS-min", lco::m_sns(u, &w, SnsMode::Min, e).map(Some), "")?;
                acc.push("M-SNS-avg", lco::m_sns(u, &w, SnsMode::Avg, e).map(Some), "")?;
                acc.push(
                    "DAF",
                    lco::daf(u, &w, b.tagger.as_ref(), &b.transitions).map(Some),
                    "",
                )?;
                acc.push("LL", lco::ll(u, &w, b.lm.as_ref()).map(Some), "")?;
                acc.push("TES", lco::tes(u, c, t, th, b.topics.as_ref()), "no_tokens")?;
            }
            if s.local_consistency {
                acc.push("LSCC-avg", lc::lscc_es(u, sp, &w, LsccMode::Avg, e), "speaker_absent")?;
                acc.push("LSCC-max", lc::lscc_es(u, sp, &w, LsccMode::Max, e), "speaker_absent")?;
                acc.push("LSCC-min", lc::lscc_es(u, sp, &w, LsccMode::Min, e), "speaker_absent")?;
                if background {
                    acc.push("LSCC-aug", lc::lscc_es_aug(u, sp, &w, profile, e).map(Some), "")?;
                } else {
                    acc.skip("LSCC-aug", "no_profile");
                }
            }
        }
        acc.finish(out);
        Ok(())
    }

    fn global_speaker(&self, c: &Conversation, out: &mut ConversationScores) -> Result<()> {
        let gen = c.generated_turns();
        if gen.is_empty() {
            out.null_all(names::GLOBAL_SPEAKER, "no_generated_turns");
            return Ok(());
        }
        out.set("NSE", Some(gs::nse(gen)), "");
        let speakers: BTreeSet<&str> = gen.iter().map(|t| t.speaker.as_str()).collect();
        if speakers.len() < 2 {
            out.set("SC-Gini", None, "single_speaker");
        } else {
            settle(out, "SC-Gini", gs::sc_gini(gen, &self.bundle.embedder), "zero_contribution")?;
        }
        Ok(())
    }

    fn global_content(&self, c: &Conversation, out: &mut ConversationScores) -> Result<()> {
        let cfg = self.config;
        let e = &self.bundle.embedder;
        match c.objective() {
            Some(obj) => settle(
                out,
                "TaskSuccess",
                gco::task_success(c, obj, self.extractor, &cfg.thresholds, e)
                    .map(|ok| Some(f64::from(u8::from(ok)))),
                "",
            )?,
            None => out.set("TaskSuccess", None, "no_objective"),
        }
        match c.agenda() {
            Some(a) => {
                let cov = gco::conversation_coverage(c, a, &cfg.thresholds, e)?;
                out.set("ACR", Some(gco::acr(&cov)), "");
                out.set("PE", gco::pe(&cov), "none_saturated");
                let traj = gco::extract_trajectory(c.turns(), a, &cfg.trajectory, e)?;
                let order = gco::linearize(a);
                out.set("CS", gco::cs(&traj, &order, cfg.trajectory.r), "short_trajectory");
            }
            None => out.null_all(&["ACR", "PE", "CS"], "no_agenda"),
        }
        let gen = c.generated_turns();
        settle(out, "PD", gco::pd(gen, e), "no_generated_turns")?;
        settle(out, "HMP", gco::hmp(gen, e), "too_few_generated_turns")?;
        Ok(())
    }

    fn global_consistency(&self, c: &Conversation, d: &Dataset, out: &mut ConversationScores) -> Result<()> {
        let cfg = self.config;
        let e = &self.bundle.embedder;
        let gen = c.generated_turns();
        if gen.is_empty() {
            out.null_all(names::GLOBAL_CONSISTENCY, "no_generated_turns");
            return Ok(());
        }
        let speakers: BTreeSet<&str> = gen.iter().map(|t| t.speaker.as_str()).collect();
        let mut acc = PointMeans::default();
        for sp in speakers {
            let n_s = gen.iter().filter(|t| t.speaker.as_str() == sp).count();
            let single = gc::single_centroid(gen, sp, e);
            let dc = |cents: &Result<gc::SpeakerCentroids<f64>>, mode| -> Result<Option<f64>> {
                match cents {
                    Ok(cs) => gc::gscc_dc(gen, sp, cs, mode, e).map(Some),
                    Err(err) => Err(clone_reason(err)),
                }
            };
            acc.push("GSCC-DC-avg", dc(&single, DcMode::Avg), "")?;
            acc.push("GSCC-DC-max", dc(&single, DcMode::Max), "")?;
            let multi = gc::multi_centroids(gen, sp, cfg.seed, &cfg.gmm, e);
            acc.push("GSCC-DC-avg-multi", dc(&multi, DcMode::Avg), "")?;
            acc.push("GSCC-DC-max-multi", dc(&multi, DcMode::Max), "")?;
            match d.profile(sp).and_then(|p| p.background_text()) {
                Some(bg) => {
                    let aug = match &multi {
                        Ok(m) => e
                            .embed(bg)
                            .and_then(|b| gc::augmented_centroid(m, &b, gc::global_alpha(n_s, cfg.k_global))),
                        Err(err) => Err(clone_reason(err)),
                    };
                    acc.push("GSCC-DC-avg-aug", dc(&aug, DcMode::Avg), "")?;
                    acc.push("GSCC-DC-max-aug", dc(&aug, DcMode::Max), "")?;
                }
                None => {
                    acc.skip("GSCC-DC-avg-aug", "no_profile");
                    acc.skip("GSCC-DC-max-aug", "no_profile");
                }
            }
        }
        acc.finish(out);
        Ok(())
    }
}

/// Re-raises a centroid error so it can be reported once per metric.
fn clone_reason(e: &Error) -> Error {
    match e {
        Error::UnstableCentroid(s) => Error::UnstableCentroid(s.clone()),
        Error::SpeakerAbsent(s) => Error::SpeakerAbsent(s.clone()),
        Error::Numerical(s) => Error::Numerical(s.clone()),
        Error::EmptyText => Error::EmptyText,
        other => Error::Remote(other.to_string()),
    }
}

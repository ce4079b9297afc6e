//! Semantic oracles: embeddings, topic distributions, dialogue acts and token
//! log-likelihoods, plus the dataset IDF table.
//!
//! Every oracle has a deterministic local baseline. [`remote`] speaks a small
//! JSON request/response protocol for external backends.

mod acts;
mod cache;
mod embed;
mod idf;
mod lm;
pub mod remote;
mod topics;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use acts::{ActTagger, ActTransitions, DialogueAct, RuleActTagger};
pub use cache::EmbeddingCache;
pub use embed::{similarity, ClampMode, Embedder, EmbeddingBackend, EmbeddingVector, HashedBowEmbedder};
pub use idf::IdfTable;
pub use lm::{BigramLm, LanguageModel, TokenLogProbs, UniformUnigramLm};
pub use topics::{simplex_tolerance, LdaConfig, LdaModel, TopicDistribution, TopicModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Baseline,
    Remote,
}

/// Which backend serves each oracle, and the baseline hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub embedding: ProviderKind,
    pub topics: ProviderKind,
    pub acts: ProviderKind,
    pub lm: ProviderKind,
    pub endpoint: Option<String>,
    pub remote_model: String,
    pub remote_timeout_ms: u64,
    pub remote_retries: u32,
    pub cache_path: Option<PathBuf>,
    pub embedding_dim: usize,
    pub num_topics: usize,
    pub lda_iterations: usize,
    pub lda_alpha: f64,
    pub lda_beta: f64,
    pub lm_alpha: f64,
    pub clamp: ClampMode,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            embedding: ProviderKind::Baseline,
            topics: ProviderKind::Baseline,
            acts: ProviderKind::Baseline,
            lm: ProviderKind::Baseline,
            endpoint: None,
            remote_model: "default".into(),
            remote_timeout_ms: 30_000,
            remote_retries: 2,
            cache_path: None,
            embedding_dim: 256,
            num_topics: 20,
            lda_iterations: 500,
            lda_alpha: 0.1,
            lda_beta: 0.01,
            lm_alpha: 1.0,
            clamp: ClampMode::Zero,
        }
    }
}

impl ProviderConfig {
    /// Every oracle served by the remote endpoint.
    pub fn all_remote(mut self, endpoint: impl Into<String>) -> Self {
        self.embedding = ProviderKind::Remote;
        self.topics = ProviderKind::Remote;
        self.acts = ProviderKind::Remote;
        self.lm = ProviderKind::Remote;
        self.endpoint = Some(endpoint.into());
        self
    }

    pub fn all_baseline(mut self) -> Self {
        self.embedding = ProviderKind::Baseline;
        self.topics = ProviderKind::Baseline;
        self.acts = ProviderKind::Baseline;
        self.lm = ProviderKind::Baseline;
        self
    }

    fn uses_remote(&self) -> bool {
        [self.embedding, self.topics, self.acts, self.lm].contains(&ProviderKind::Remote)
    }
}

/// The oracles a metric run needs, fitted on the evaluation data.
pub struct ProviderBundle<T: Real> {
    pub embedder: Embedder<T>,
    pub topics: Box<dyn TopicModel<T>>,
    pub tagger: Box<dyn ActTagger>,
    pub transitions: ActTransitions,
    pub lm: Box<dyn LanguageModel>,
    pub idf: IdfTable,
}

impl<T: Real> ProviderBundle<T> {
    /// Builds every oracle from `config`, fitting baselines on the union of
    /// `datasets`. `seed` fixes the hashed embedder and the topic sampler.
    pub fn build(datasets: &[&Dataset], config: &ProviderConfig, seed: u64) -> Result<Self> {
        if datasets.iter().all(|d| d.conversations.is_empty()) {
            return Err(Error::EmptyDataset);
        }
        let client = if config.uses_remote() {
            let url = config
                .endpoint
                .clone()
                .ok_or_else(|| Error::Config("remote provider requires `endpoint`".into()))?;
            let transport = remote::HttpTransport::new(url, config.remote_timeout_ms);
            Some(remote::RemoteClient::new(
                Box::new(transport),
                config.remote_model.clone(),
                config.remote_retries,
            ))
        } else {
            None
        };
        let client = client.map(std::sync::Arc::new);

        let backend: Box<dyn EmbeddingBackend> = match config.embedding {
            ProviderKind::Baseline => {
                Box::new(HashedBowEmbedder::new(config.embedding_dim, seed))
            }
            ProviderKind::Remote => Box::new(remote::RemoteEmbedder::new(
                client.clone().expect("remote client built"),
            )),
        };
        let cache = match &config.cache_path {
            Some(p) => Some(EmbeddingCache::open(p)?),
            None => None,
        };
        let embedder = Embedder::new(backend, cache, config.clamp);

        let texts: Vec<&str> = datasets
            .iter()
            .flat_map(|d| d.all_turns().map(|t| t.text.as_str()))
            .collect();

        let topics: Box<dyn TopicModel<T>> = match config.topics {
            ProviderKind::Baseline => Box::new(LdaModel::fit(
                &texts,
                &LdaConfig {
                    num_topics: config.num_topics,
                    iterations: config.lda_iterations,
                    alpha: config.lda_alpha,
                    beta: config.lda_beta,
                    seed,
                },
            )?),
            ProviderKind::Remote => Box::new(remote::RemoteTopics::new(
                client.clone().expect("remote client built"),
                config.num_topics,
            )),
        };

        let tagger: Box<dyn ActTagger> = match config.acts {
            ProviderKind::Baseline => Box::new(RuleActTagger),
            ProviderKind::Remote => Box::new(remote::RemoteActs::new(
                client.clone().expect("remote client built"),
            )),
        };
        let mut sequences = Vec::new();
        for d in datasets {
            for c in &d.conversations {
                let turn_texts: Vec<&str> =
                    crate::corpus::TurnSource::turns(c).iter().map(|t| t.text.as_str()).collect();
                sequences.push(tagger.tag_sequence(&turn_texts)?);
            }
        }
        let transitions = ActTransitions::fit(&sequences);

        let lm: Box<dyn LanguageModel> = match config.lm {
            ProviderKind::Baseline => Box::new(BigramLm::fit(&texts, config.lm_alpha)),
            ProviderKind::Remote => Box::new(remote::RemoteLm::new(
                client.expect("remote client built"),
            )),
        };

        let idf = IdfTable::build(texts.iter().copied());

        Ok(ProviderBundle {
            embedder,
            topics,
            tagger,
            transitions,
            lm,
            idf,
        })
    }

    /// Model identifier per oracle, for report fingerprints.
    pub fn model_ids(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("embedding".to_owned(), self.embedder.model_id()),
            ("topics".to_owned(), self.topics.model_id()),
            ("acts".to_owned(), self.tagger.model_id()),
            ("lm".to_owned(), self.lm.model_id()),
            ("idf".to_owned(), format!("idf-smooth/n={}", self.idf.n_docs())),
        ])
    }
}

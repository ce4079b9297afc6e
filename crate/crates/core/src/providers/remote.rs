//! Client for external semantic backends.
//!
//! Request body: `{"op": "embed"|"logprobs"|"topics"|"acts", "inputs": [...], "model": str}`.
//! Response body: `{"outputs": [...], "model": str, "dim"?: int}` with one
//! output per input.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    ActTagger, DialogueAct, EmbeddingBackend, LanguageModel, TokenLogProbs, TopicDistribution,
    TopicModel,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One request/response exchange of JSON text.
pub trait Transport: Send + Sync {
    fn round_trip(&self, body: &str) -> std::result::Result<String, String>;
}

/// JSON over HTTP POST.
pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout_ms: u64) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(timeout_ms))
            .build();
        HttpTransport {
            url: url.into(),
            agent,
        }
    }
}

impl Transport for HttpTransport {
    fn round_trip(&self, body: &str) -> std::result::Result<String, String> {
        self.agent
            .post(&self.url)
            .set("content-type", "application/json")
            .send_string(body)
            .map_err(|e| e.to_string())?
            .into_string()
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Serialize)]
struct Request<'a> {
    op: &'a str,
    inputs: &'a [Value],
    model: &'a str,
}

#[derive(Debug, Deserialize)]
struct Response {
    outputs: Vec<Value>,
    model: String,
    #[serde(default)]
    dim: Option<usize>,
}

pub struct RemoteClient {
    transport: Box<dyn Transport>,
    model: String,
    retries: u32,
    served_model: Mutex<Option<String>>,
}

impl RemoteClient {
    pub fn new(transport: Box<dyn Transport>, model: impl Into<String>, retries: u32) -> Self {
        RemoteClient {
            transport,
            model: model.into(),
            retries,
            served_model: Mutex::new(None),
        }
    }

    /// Model id reported by the server, or the requested one before any call.
    pub fn model_id(&self) -> String {
        self.served_model
            .lock()
            .expect("model lock")
            .clone()
            .unwrap_or_else(|| self.model.clone())
    }

    fn call(&self, op: &str, inputs: &[Value]) -> Result<(Vec<Value>, Option<usize>)> {
        let body = serde_json::to_string(&Request {
            op,
            inputs,
            model: &self.model,
        })
        .expect("request serializes");
        let mut last_err = String::new();
        for _ in 0..=self.retries {
            match self.transport.round_trip(&body) {
                Ok(text) => {
                    let resp: Response = serde_json::from_str(&text)
                        .map_err(|e| Error::Remote(format!("malformed `{op}` response: {e}")))?;
                    if resp.outputs.len() != inputs.len() {
                        return Err(Error::Remote(format!(
                            "`{op}` returned {} outputs for {} inputs",
                            resp.outputs.len(),
                            inputs.len()
                        )));
                    }
                    *self.served_model.lock().expect("model lock") = Some(resp.model);
                    return Ok((resp.outputs, resp.dim));
                }
                Err(e) => last_err = e,
            }
        }
        Err(Error::Remote(format!(
            "`{op}` failed after {} attempts: {last_err}",
            self.retries + 1
        )))
    }

    /// Round trip with a one-text embedding request; returns the served model.
    pub fn ping(&self) -> Result<String> {
        self.call("embed", &[Value::from("ping")])?;
        Ok(self.model_id())
    }
}

fn number_list(v: &Value, what: &str) -> Result<Vec<f64>> {
    v.as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| Error::Remote(format!("{what} must be an array of numbers")))
}

pub struct RemoteEmbedder {
    client: Arc<RemoteClient>,
}

impl RemoteEmbedder {
    pub fn new(client: Arc<RemoteClient>) -> Self {
        RemoteEmbedder { client }
    }
}

impl EmbeddingBackend for RemoteEmbedder {
    fn model_id(&self) -> String {
        format!("remote:{}", self.client.model)
    }

    fn embed_raw(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        let inputs: Vec<Value> = texts.iter().map(|&t| Value::from(t)).collect();
        let (outputs, dim) = self.client.call("embed", &inputs)?;
        let mut out = Vec::with_capacity(outputs.len());
        for o in &outputs {
            let v: Vec<f32> = number_list(o, "embedding")?.into_iter().map(|x| x as f32).collect();
            if let Some(d) = dim {
                if v.len() != d {
                    return Err(Error::DimensionMismatch(d, v.len()));
                }
            }
            out.push(v);
        }
        Ok(out)
    }
}

pub struct RemoteTopics {
    client: Arc<RemoteClient>,
    num_topics: usize,
}

impl RemoteTopics {
    pub fn new(client: Arc<RemoteClient>, num_topics: usize) -> Self {
        RemoteTopics { client, num_topics }
    }
}

impl<T: Real> TopicModel<T> for RemoteTopics {
    fn model_id(&self) -> String {
        format!("remote:{}", self.client.model_id())
    }

    fn num_topics(&self) -> usize {
        self.num_topics
    }

    fn distribution(&self, text: &str) -> Result<TopicDistribution<T>> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let (outputs, _) = self.client.call("topics", &[Value::from(text)])?;
        let w = number_list(&outputs[0], "topic distribution")?;
        if w.len() != self.num_topics {
            return Err(Error::DimensionMismatch(self.num_topics, w.len()));
        }
        TopicDistribution::from_weights(&w)
    }
}

pub struct RemoteActs {
    client: Arc<RemoteClient>,
}

impl RemoteActs {
    pub fn new(client: Arc<RemoteClient>) -> Self {
        RemoteActs { client }
    }
}

impl ActTagger for RemoteActs {
    fn model_id(&self) -> String {
        format!("remote:{}", self.client.model_id())
    }

    fn tag(&self, text: &str, _previous: Option<DialogueAct>) -> Result<DialogueAct> {
        Ok(self.tag_sequence(&[text])?[0])
    }

    fn tag_sequence(&self, texts: &[&str]) -> Result<Vec<DialogueAct>> {
        let inputs: Vec<Value> = texts.iter().map(|&t| Value::from(t)).collect();
        let (outputs, _) = self.client.call("acts", &inputs)?;
        outputs
            .iter()
            .map(|o| {
                o.as_str()
                    .ok_or_else(|| Error::Remote("act label must be a string".into()))?
                    .parse()
            })
            .collect()
    }
}

pub struct RemoteLm {
    client: Arc<RemoteClient>,
}

impl RemoteLm {
    pub fn new(client: Arc<RemoteClient>) -> Self {
        RemoteLm { client }
    }
}

impl LanguageModel for RemoteLm {
    fn model_id(&self) -> String {
        format!("remote:{}", self.client.model_id())
    }

    fn token_logprobs(&self, context: &[&str], text: &str) -> Result<TokenLogProbs> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let input = serde_json::json!({ "context": context, "text": text });
        let (outputs, _) = self.client.call("logprobs", &[input])?;
        TokenLogProbs::new(number_list(&outputs[0], "logprobs")?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Answers every request with a canned body after `fail_first` failures.
    struct Fake {
        fail_first: usize,
        calls: AtomicUsize,
        reply: fn(&Value) -> Value,
    }

    impl Transport for Fake {
        fn round_trip(&self, body: &str) -> std::result::Result<String, String> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err("connection refused".into());
            }
            let req: Value = serde_json::from_str(body).unwrap();
            Ok((self.reply)(&req).to_string())
        }
    }

    fn client(fail_first: usize, retries: u32, reply: fn(&Value) -> Value) -> Arc<RemoteClient> {
        Arc::new(RemoteClient::new(
            Box::new(Fake {
                fail_first,
                calls: AtomicUsize::new(0),
                reply,
            }),
            "m1",
            retries,
        ))
    }

    fn embed_reply(req: &Value) -> Value {
        let n = req["inputs"].as_array().unwrap().len();
        let outs: Vec<Value> = (0..n).map(|i| serde_json::json!([1.0, i as f64])).collect();
        serde_json::json!({"outputs": outs, "model": "emb-v2", "dim": 2})
    }

    #[test]
    fn embed_round_trip_and_model_id() {
        let c = client(0, 0, embed_reply);
        let e = RemoteEmbedder::new(c.clone());
        let v = e.embed_raw(&["a", "b"]).unwrap();
        assert_eq!(v, vec![vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(c.model_id(), "emb-v2");
    }

    #[test]
    fn retries_then_succeeds() {
        let c = client(2, 2, embed_reply);
        assert_eq!(c.ping().unwrap(), "emb-v2");
    }

    #[test]
    fn retries_exhausted_is_provider_error() {
        let c = client(3, 2, embed_reply);
        let err = c.ping().unwrap_err();
        assert!(err.is_provider_error());
        assert!(err.to_string().contains("3 attempts"));
    }

    #[test]
    fn output_count_mismatch_rejected() {
        let c = client(0, 0, |_| serde_json::json!({"outputs": [], "model": "x"}));
        assert!(RemoteEmbedder::new(c).embed_raw(&["a"]).is_err());
    }

    #[test]
    fn declared_dim_enforced() {
        let c = client(0, 0, |_| serde_json::json!({"outputs": [[1.0]], "model": "x", "dim": 3}));
        assert!(matches!(
            RemoteEmbedder::new(c).embed_raw(&["a"]),
            Err(Error::DimensionMismatch(3, 1))
        ));
    }

    #[test]
    fn acts_topics_logprobs() {
        let c = client(0, 0, |req| match req["op"].as_str().unwrap() {
            "acts" => serde_json::json!({"outputs": ["question", "answer"], "model": "a"}),
            "topics" => serde_json::json!({"outputs": [[1.0, 3.0]], "model": "t"}),
            "logprobs" => {
                assert!(req["inputs"][0]["context"].is_array());
                serde_json::json!({"outputs": [[-0.5, -1.0]], "model": "l"})
            }
            _ => unreachable!(),
        });
        let acts = RemoteActs::new(c.clone()).tag_sequence(&["x?", "y"]).unwrap();
        assert_eq!(acts, vec![DialogueAct::Question, DialogueAct::Answer]);
        let t: TopicDistribution<f64> = RemoteTopics::new(c.clone(), 2).distribution("x").unwrap();
        assert_eq!(t.probs(), &[0.25, 0.75]);
        let lp = RemoteLm::new(c).token_logprobs(&["ctx"], "x y").unwrap();
        assert_eq!(lp.logprobs(), &[-0.5, -1.0]);
    }
}

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::text;

/// Per-token conditional log-probabilities of one text.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogProbs {
    logprobs: Vec<f64>,
}

impl TokenLogProbs {
    pub fn new(logprobs: Vec<f64>) -> Result<Self> {
        if logprobs.is_empty() {
            return Err(Error::EmptyText);
        }
        if logprobs.iter().any(|l| !(*l <= 0.0) || !l.is_finite()) {
            return Err(Error::Numerical("log-probability must be finite and <= 0".into()));
        }
        Ok(TokenLogProbs { logprobs })
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn token_count(&self) -> usize {
        self.logprobs.len()
    }

    pub fn mean(&self) -> f64 {
        self.logprobs.iter().sum::<f64>() / self.logprobs.len() as f64
    }
}

pub trait LanguageModel: Send + Sync {
    fn model_id(&self) -> String;
    fn token_logprobs(&self, context: &[&str], text: &str) -> Result<TokenLogProbs>;
}

const BOS: usize = 0;
const UNK: usize = 1;

/// Additive-smoothed word bigram model over case-folded Unicode words.
///
/// `P(w | v) = (c(v, w) + a) / (c(v) + a V)` where `V` counts word types plus
/// the unknown token. Each utterance is scored independently from `<s>`.
#[derive(Debug, Clone)]
pub struct BigramLm {
    vocab: HashMap<String, usize>,
    bigrams: HashMap<(usize, usize), u64>,
    history: HashMap<usize, u64>,
    alpha: f64,
}

impl BigramLm {
    pub fn fit<S: AsRef<str>>(texts: &[S], alpha: f64) -> Self {
        assert!(alpha > 0.0, "smoothing constant must be positive");
        let mut vocab = HashMap::new();
        let mut bigrams = HashMap::new();
        let mut history = HashMap::new();
        for t in texts {
            let mut prev = BOS;
            for tok in text::tokens(t.as_ref()) {
                let next = vocab.len() + 2;
                let id = *vocab.entry(tok).or_insert(next);
                *bigrams.entry((prev, id)).or_insert(0) += 1;
                *history.entry(prev).or_insert(0) += 1;
                prev = id;
            }
        }
        BigramLm {
            vocab,
            bigrams,
            history,
            alpha,
        }
    }

    /// Word types plus the unknown token.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    fn id(&self, tok: &str) -> usize {
        self.vocab.get(tok).copied().unwrap_or(UNK)
    }

    pub fn prob(&self, prev: usize, next: usize) -> f64 {
        let c = self.bigrams.get(&(prev, next)).copied().unwrap_or(0) as f64;
        let h = self.history.get(&prev).copied().unwrap_or(0) as f64;
        (c + self.alpha) / (h + self.alpha * self.vocab_size() as f64)
    }
}

impl LanguageModel for BigramLm {
    fn model_id(&self) -> String {
        format!("bigram/add-{}/V={}", self.alpha, self.vocab_size())
    }

    fn token_logprobs(&self, _context: &[&str], text: &str) -> Result<TokenLogProbs> {
        let mut prev = BOS;
        let mut out = Vec::new();
        for tok in text::tokens(text) {
            let id = self.id(&tok);
            out.push(self.prob(prev, id).ln());
            prev = id;
        }
        TokenLogProbs::new(out)
    }
}

/// Every token has probability `1 / V`.
#[derive(Debug, Clone, Copy)]
pub struct UniformUnigramLm {
    pub vocab_size: usize,
}

impl LanguageModel for UniformUnigramLm {
    fn model_id(&self) -> String {
        format!("uniform/V={}", self.vocab_size)
    }

    fn token_logprobs(&self, _context: &[&str], text: &str) -> Result<TokenLogProbs> {
        let n = text::tokens(text).len();
        TokenLogProbs::new(vec![(1.0 / self.vocab_size as f64).ln(); n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_vocab_ten() {
        let lm = UniformUnigramLm { vocab_size: 10 };
        let lp = lm.token_logprobs(&[], "any text at all").unwrap();
        assert_eq!(lp.token_count(), 4);
        assert!(lp.logprobs().iter().all(|&l| l == 0.1f64.ln()));
    }

    #[test]
    fn repeated_token_confidence_non_decreasing() {
        let lm = BigramLm::fit(&["a a"], 1.0);
        let lp = lm.token_logprobs(&[], "a a a").unwrap();
        // V = 2 ({a, <unk>}); c(<s>,a)=1, c(<s>)=1, c(a,a)=1, c(a)=1
        let expected = (2.0f64 / 3.0).ln();
        assert_eq!(lp.logprobs(), &[expected, expected, expected]);
        assert!(lp.logprobs().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn unknown_token_uses_unk_slot() {
        let lm = BigramLm::fit(&["x y"], 0.5);
        let lp = lm.token_logprobs(&[], "zzz").unwrap();
        // V = 3; c(<s>) = 1, c(<s>, unk) = 0
        assert_eq!(lp.logprobs()[0], (0.5f64 / (1.0 + 1.5)).ln());
    }

    #[test]
    fn rows_normalize() {
        let lm = BigramLm::fit(&["the cat sat", "the dog sat down"], 0.3);
        for prev in 0..lm.vocab_size() + 1 {
            let s: f64 = (1..lm.vocab_size() + 1).map(|w| lm.prob(prev, w)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_text_errors() {
        let lm = BigramLm::fit(&["a"], 1.0);
        assert!(matches!(lm.token_logprobs(&[], " ,. "), Err(Error::EmptyText)));
    }
}

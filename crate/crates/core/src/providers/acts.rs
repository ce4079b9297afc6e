use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueAct {
    Question,
    Answer,
    Request,
    Acknowledgment,
    Statement,
    Prompt,
}

impl DialogueAct {
    pub const ALL: [DialogueAct; 6] = [
        DialogueAct::Question,
        DialogueAct::Answer,
        DialogueAct::Request,
        DialogueAct::Acknowledgment,
        DialogueAct::Statement,
        DialogueAct::Prompt,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DialogueAct::Question => "question",
            DialogueAct::Answer => "answer",
            DialogueAct::Request => "request",
            DialogueAct::Acknowledgment => "acknowledgment",
            DialogueAct::Statement => "statement",
            DialogueAct::Prompt => "prompt",
        }
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DialogueAct {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DialogueAct::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Remote(format!("unknown dialogue act `{s}`")))
    }
}

pub trait ActTagger: Send + Sync {
    fn model_id(&self) -> String;

    /// Act of `text`, given the act of the preceding turn if any.
    fn tag(&self, text: &str, previous: Option<DialogueAct>) -> Result<DialogueAct>;

    fn tag_sequence(&self, texts: &[&str]) -> Result<Vec<DialogueAct>> {
        let mut out: Vec<DialogueAct> = Vec::with_capacity(texts.len());
        for t in texts {
            let act = self.tag(t, out.last().copied())?;
            out.push(act);
        }
        Ok(out)
    }
}

const WH_WORDS: &[&str] = &[
    "what", "why", "how", "when", "where", "who", "whom", "whose", "which", "is", "are", "do",
    "does", "did", "can", "could", "would", "should", "will", "shall", "may", "have", "has",
    "什么", "为什么", "怎么", "哪", "谁",
];

const REQUEST_VERBS: &[&str] = &[
    "please", "let", "lets", "let's", "make", "send", "check", "try", "add", "remove", "give",
    "show", "tell", "write", "fix", "update", "run", "use", "consider", "share", "review",
    "explain", "describe", "list", "take", "keep", "stop", "start", "go", "help", "请", "帮",
];

const ACK_WORDS: &[&str] = &[
    "ok", "okay", "sure", "thanks", "thank", "yes", "yeah", "yep", "right", "agreed", "agree",
    "got", "great", "cool", "fine", "noted", "indeed", "exactly", "好", "好的", "对", "嗯", "谢谢",
];

/// Ordered rule list: interrogative, imperative lead, acknowledgment lexicon,
/// turn-passing prompt, answer after a question, otherwise statement.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleActTagger;

impl ActTagger for RuleActTagger {
    fn model_id(&self) -> String {
        "rule-acts/v1".into()
    }

    fn tag(&self, text: &str, previous: Option<DialogueAct>) -> Result<DialogueAct> {
        let trimmed = text.trim();
        let words = text::tokens(trimmed);
        let lead = words.first().map(String::as_str).unwrap_or("");
        let raw_lead = trimmed.split_whitespace().next().unwrap_or("").to_lowercase();

        let ends_q = trimmed.ends_with('?') || trimmed.ends_with('？');
        let cjk_q = trimmed.ends_with('吗') || trimmed.ends_with('呢');
        if ends_q || cjk_q || (WH_WORDS.contains(&lead) && trimmed.contains('?')) {
            return Ok(DialogueAct::Question);
        }
        let raw_lead_word = raw_lead.trim_end_matches(|c: char| !c.is_alphanumeric() && c != '\'');
        if REQUEST_VERBS.contains(&lead) || REQUEST_VERBS.contains(&raw_lead_word) {
            return Ok(DialogueAct::Request);
        }
        if words.len() <= 6 && ACK_WORDS.contains(&lead) {
            return Ok(DialogueAct::Acknowledgment);
        }
        let lower = trimmed.to_lowercase();
        if trimmed.starts_with('@') || lower.contains("your turn") || lower.contains("go ahead") {
            return Ok(DialogueAct::Prompt);
        }
        if previous == Some(DialogueAct::Question) {
            return Ok(DialogueAct::Answer);
        }
        Ok(DialogueAct::Statement)
    }
}

/// First-order act transition model with add-one smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct ActTransitions {
    counts: [[u64; 6]; 6],
    unigram: [u64; 6],
}

impl ActTransitions {
    pub fn fit(sequences: &[Vec<DialogueAct>]) -> Self {
        let mut counts = [[0u64; 6]; 6];
        let mut unigram = [0u64; 6];
        for seq in sequences {
            for a in seq {
                unigram[a.index()] += 1;
            }
            for w in seq.windows(2) {
                counts[w[0].index()][w[1].index()] += 1;
            }
        }
        ActTransitions { counts, unigram }
    }

    /// `P(candidate | last act of history)`; the unigram prior when the
    /// history is empty.
    pub fn prob<T: Real>(&self, history: &[DialogueAct], candidate: DialogueAct) -> T {
        let (num, den) = match history.last() {
            Some(prev) => {
                let row = &self.counts[prev.index()];
                (row[candidate.index()], row.iter().sum::<u64>())
            }
            None => (self.unigram[candidate.index()], self.unigram.iter().sum()),
        };
        T::lit((num + 1) as f64) / T::lit((den + 6) as f64)
    }
}

//! Conversations, speakers, agendas and datasets.

mod agenda;
mod io;

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agenda::{AgendaGraph, AgendaItem, ItemId};
pub use io::{
    conversation_to_json_line, parse_dataset, parse_dataset_str, parse_profiles,
    parse_profiles_str, write_dataset, ConversationRecord,
};

/// Opaque speaker identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeakerId(String);

impl SpeakerId {
    pub fn new(id: impl Into<String>) -> Self {
        SpeakerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for SpeakerId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for SpeakerId {
    fn from(s: &str) -> Self {
        SpeakerId(s.to_owned())
    }
}

impl From<String> for SpeakerId {
    fn from(s: String) -> Self {
        SpeakerId(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub index: usize,
    pub speaker: SpeakerId,
    pub text: String,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    pub speaker: SpeakerId,
    pub background: Option<String>,
}

impl SpeakerProfile {
    pub fn new(speaker: impl Into<SpeakerId>, background: impl Into<String>) -> Self {
        SpeakerProfile {
            speaker: speaker.into(),
            background: Some(background.into()),
        }
    }

    /// Background text if present and non-blank.
    pub fn background_text(&self) -> Option<&str> {
        self.background.as_deref().filter(|b| !b.trim().is_empty())
    }
}

/// Acceptance predicate applied to an extracted artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateSpec {
    pub kind: PredicateKind,
    pub arg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Regex,
    JsonSchema,
    Contains,
}

/// How task success is judged for an objective-guided conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// Every predicate must hold on the extracted artifact.
    Artifact { criteria: Vec<PredicateSpec> },
    /// The terminal agenda item must be saturated.
    State { terminal_item: ItemId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    id: String,
    turns: Vec<Turn>,
    participants: BTreeSet<SpeakerId>,
    agenda: Option<AgendaGraph>,
    objective: Option<ObjectiveSpec>,
    is_generated: bool,
    history_length: usize,
}

impl Conversation {
    /// Builds a conversation from `(speaker, text)` pairs.
    ///
    /// Rejects an empty turn list and utterances that are blank after trimming.
    pub fn new<I, S, U>(id: impl Into<String>, turns: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, U)>,
        S: Into<SpeakerId>,
        U: Into<String>,
    {
        let id = id.into();
        let turns: Vec<Turn> = turns
            .into_iter()
            .enumerate()
            .map(|(index, (s, u))| Turn {
                index,
                speaker: s.into(),
                text: u.into(),
                timestamp: None,
            })
            .collect();
        Self::from_turns(id, turns)
    }

    pub(crate) fn from_turns(id: String, turns: Vec<Turn>) -> Result<Self> {
        if turns.is_empty() {
            return Err(Error::InvalidConversation(format!(
                "conversation `{id}` has no turns"
            )));
        }
        for (i, t) in turns.iter().enumerate() {
            if t.index != i {
                return Err(Error::InvalidConversation(format!(
                    "turn index {} at position {i}",
                    t.index
                )));
            }
            if t.text.trim().is_empty() {
                return Err(Error::InvalidConversation(format!(
                    "turn {i} of `{id}` has empty text"
                )));
            }
        }
        let participants = turns.iter().map(|t| t.speaker.clone()).collect();
        Ok(Conversation {
            id,
            turns,
            participants,
            agenda: None,
            objective: None,
            is_generated: false,
            history_length: 0,
        })
    }

    pub fn with_agenda(mut self, agenda: AgendaGraph) -> Self {
        self.agenda = Some(agenda);
        self
    }

    /// Attaches an objective. A state objective must name an agenda item.
    pub fn with_objective(mut self, objective: ObjectiveSpec) -> Result<Self> {
        if let ObjectiveSpec::State { terminal_item } = &objective {
            let known = self
                .agenda
                .as_ref()
                .is_some_and(|a| a.index_of(terminal_item.as_str()).is_some());
            if !known {
                return Err(Error::UnknownItem(terminal_item.to_string()));
            }
        }
        self.objective = Some(objective);
        Ok(self)
    }

    pub fn with_history_length(mut self, m: usize) -> Result<Self> {
        if m > self.turns.len() {
            return Err(Error::InvalidConversation(format!(
                "history length {m} exceeds {} turns",
                self.turns.len()
            )));
        }
        self.history_length = m;
        Ok(self)
    }

    pub fn generated(mut self, flag: bool) -> Self {
        self.is_generated = flag;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn participants(&self) -> &BTreeSet<SpeakerId> {
        &self.participants
    }

    pub fn agenda(&self) -> Option<&AgendaGraph> {
        self.agenda.as_ref()
    }

    pub fn objective(&self) -> Option<&ObjectiveSpec> {
        self.objective.as_ref()
    }

    pub fn is_generated(&self) -> bool {
        self.is_generated
    }

    /// Number of given-history turns `m`; zero for from-scratch generation.
    pub fn history_length(&self) -> usize {
        self.history_length
    }

    /// Turns after the given history.
    pub fn generated_turns(&self) -> &[Turn] {
        &self.turns[self.history_length..]
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

/// Anything that exposes an ordered slice of turns.
pub trait TurnSource {
    fn turns(&self) -> &[Turn];

    /// Turns authored by `speaker`, in order.
    fn turns_by_speaker(&self, speaker: &str) -> Vec<&Turn> {
        self.turns()
            .iter()
            .filter(|t| t.speaker.as_str() == speaker)
            .collect()
    }

    /// Turns not authored by `speaker`, in order.
    fn turns_excluding_speaker(&self, speaker: &str) -> Vec<&Turn> {
        self.turns()
            .iter()
            .filter(|t| t.speaker.as_str() != speaker)
            .collect()
    }
}

impl TurnSource for Conversation {
    fn turns(&self) -> &[Turn] {
        &self.turns
    }
}

/// The `k` most recent turns before `end_index`.
#[derive(Debug, Clone, Copy)]
pub struct ContextWindow<'a> {
    conversation_id: &'a str,
    end_index: usize,
    k: usize,
    turns: &'a [Turn],
}

impl<'a> ContextWindow<'a> {
    pub fn conversation_id(&self) -> &'a str {
        self.conversation_id
    }

    /// Exclusive upper turn index.
    pub fn end_index(&self) -> usize {
        self.end_index
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn texts(&self) -> Vec<&'a str> {
        self.turns.iter().map(|t| t.text.as_str()).collect()
    }
}

impl TurnSource for ContextWindow<'_> {
    fn turns(&self) -> &[Turn] {
        self.turns
    }
}

/// Window holding turns `[max(0, end_index - k), end_index)`.
pub fn context_window(conv: &Conversation, end_index: usize, k: usize) -> Result<ContextWindow<'_>> {
    if k == 0 {
        return Err(Error::ZeroWindow);
    }
    if end_index == 0 || end_index > conv.turns.len() {
        return Err(Error::WindowOutOfRange {
            end: end_index,
            len: conv.turns.len(),
        });
    }
    let start = end_index.saturating_sub(k);
    Ok(ContextWindow {
        conversation_id: &conv.id,
        end_index,
        k,
        turns: &conv.turns[start..end_index],
    })
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub conversations: Vec<Conversation>,
    pub profiles: BTreeMap<SpeakerId, SpeakerProfile>,
    pub source_label: String,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate conversation ids.
    pub fn new(conversations: Vec<Conversation>, source_label: impl Into<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &conversations {
            if !seen.insert(c.id.clone()) {
                return Err(Error::DuplicateId(c.id.clone()));
            }
        }
        Ok(Dataset {
            conversations,
            profiles: BTreeMap::new(),
            source_label: source_label.into(),
        })
    }

    pub fn with_profiles(mut self, profiles: BTreeMap<SpeakerId, SpeakerProfile>) -> Self {
        self.profiles = profiles;
        self
    }

    pub fn profile(&self, speaker: &str) -> Option<&SpeakerProfile> {
        self.profiles.get(speaker)
    }

    pub fn turn_count(&self) -> usize {
        self.conversations.iter().map(|c| c.len()).sum()
    }

    pub fn all_turns(&self) -> impl Iterator<Item = &Turn> {
        self.conversations.iter().flat_map(|c| c.turns().iter())
    }
}

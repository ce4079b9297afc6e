use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AgendaGraph, AgendaItem, Conversation, Dataset, ObjectiveSpec, SpeakerId, SpeakerProfile, Turn,
};
use crate::error::{Error, Result};

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationRecord {
    pub id: String,
    pub turns: Vec<TurnRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agenda: Option<AgendaRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_length: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_generated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRecord {
    pub speaker: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgendaRecord {
    pub items: Vec<AgendaItem>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    pub start: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRecord {
    speaker: String,
    #[serde(default)]
    background: Option<String>,
}

fn schema(line: usize, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        field: field.into(),
        message: message.into(),
    }
}

/// Field name quoted in a serde message (`missing field `x``), else `record`.
fn serde_field(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    let mut parts = msg.split('`');
    match (parts.next(), parts.next()) {
        (Some(_), Some(field)) if !field.is_empty() => field.to_owned(),
        _ => "record".to_owned(),
    }
}

impl ConversationRecord {
    fn into_conversation(self, line: usize) -> Result<Conversation> {
        if self.id.trim().is_empty() {
            return Err(schema(line, "id", "conversation id is empty"));
        }
        if self.turns.is_empty() {
            return Err(schema(line, "turns", "conversation has no turns"));
        }
        let mut turns = Vec::with_capacity(self.turns.len());
        for (index, t) in self.turns.into_iter().enumerate() {
            if t.speaker.trim().is_empty() {
                return Err(schema(line, format!("turns[{index}].speaker"), "speaker is empty"));
            }
            if t.text.trim().is_empty() {
                return Err(schema(
                    line,
                    format!("turns[{index}].text"),
                    format!("turn {index} has empty text"),
                ));
            }
            turns.push(Turn {
                index,
                speaker: SpeakerId::new(t.speaker),
                text: t.text,
                timestamp: t.ts,
            });
        }
        let mut conv = Conversation::from_turns(self.id, turns)
            .map_err(|e| schema(line, "turns", e.to_string()))?;
        if let Some(a) = self.agenda {
            let graph = AgendaGraph::new(a.items, a.edges, &a.start)
                .map_err(|e| schema(line, "agenda", e.to_string()))?;
            conv = conv.with_agenda(graph);
        }
        if let Some(o) = self.objective {
            conv = conv
                .with_objective(o)
                .map_err(|e| schema(line, "objective", e.to_string()))?;
        }
        if let Some(m) = self.history_length {
            conv = conv
                .with_history_length(m)
                .map_err(|e| schema(line, "history_length", e.to_string()))?;
        }
        Ok(conv.generated(self.is_generated))
    }

    pub fn from_conversation(conv: &Conversation) -> Self {
        ConversationRecord {
            id: conv.id().to_owned(),
            turns: conv
                .turns
                .iter()
                .map(|t| TurnRecord {
                    speaker: t.speaker.as_str().to_owned(),
                    text: t.text.clone(),
                    ts: t.timestamp.clone(),
                })
                .collect(),
            agenda: conv.agenda().map(|g| AgendaRecord {
                items: g.items().to_vec(),
                edges: g
                    .edges()
                    .iter()
                    .map(|&(a, b)| {
                        (
                            g.item(a).id.as_str().to_owned(),
                            g.item(b).id.as_str().to_owned(),
                        )
                    })
                    .collect(),
                start: g.item(g.start()).id.as_str().to_owned(),
            }),
            objective: conv.objective().cloned(),
            history_length: (conv.history_length() > 0).then_some(conv.history_length()),
            is_generated: conv.is_generated(),
        }
    }
}

pub fn conversation_to_json_line(conv: &Conversation) -> String {
    serde_json::to_string(&ConversationRecord::from_conversation(conv))
        .expect("conversation records always serialize")
}

/// Parses line-delimited conversation records. Blank lines are skipped.
pub fn parse_dataset_str(input: &str, source_label: &str) -> Result<Dataset> {
    let mut conversations = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, raw) in input.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: ConversationRecord =
            serde_json::from_str(raw).map_err(|e| schema(line, serde_field(&e), e.to_string()))?;
        let conv = record.into_conversation(line)?;
        if !ids.insert(conv.id().to_owned()) {
            return Err(Error::DuplicateId(conv.id().to_owned()));
        }
        conversations.push(conv);
    }
    Ok(Dataset {
        conversations,
        profiles: BTreeMap::new(),
        source_label: source_label.to_owned(),
    })
}

/// Reads a dataset file; the source label is the file stem.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset_str(&text, &label)
}

pub fn parse_profiles_str(input: &str) -> Result<BTreeMap<SpeakerId, SpeakerProfile>> {
    let mut out = BTreeMap::new();
    for (i, raw) in input.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let rec: ProfileRecord = serde_json::from_str(raw)
            .map_err(|e| schema(i + 1, serde_field(&e), e.to_string()))?;
        let speaker = SpeakerId::new(rec.speaker);
        if out.contains_key(&speaker) {
            return Err(Error::DuplicateProfile(speaker.to_string()));
        }
        out.insert(
            speaker.clone(),
            SpeakerProfile {
                speaker,
                background: rec.background,
            },
        );
    }
    Ok(out)
}

pub fn parse_profiles(path: impl AsRef<Path>) -> Result<BTreeMap<SpeakerId, SpeakerProfile>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profiles_str(&text)
}

pub fn write_dataset(path: impl AsRef<Path>, conversations: &[Conversation]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for c in conversations {
        out.push_str(&conversation_to_json_line(c));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TurnSource;

    const THREE_TURNS: &str = r#"{"id":"c1","turns":[{"speaker":"alice","text":"hi"},{"speaker":"bob","text":"hello"},{"speaker":"alice","text":"how are you?","ts":"2024-01-01T10:00:00Z"}]}"#;

    #[test]
    fn parses_simple_record() {
        let ds = parse_dataset_str(THREE_TURNS, "t").unwrap();
        assert_eq!(ds.conversations.len(), 1);
        let c = &ds.conversations[0];
        assert_eq!(c.participants().len(), 2);
        assert_eq!(c.turns().len(), 3);
        assert_eq!(c.turns()[2].timestamp.as_deref(), Some("2024-01-01T10:00:00Z"));
    }

    #[test]
    fn empty_text_names_turn_index() {
        let line = r#"{"id":"c1","turns":[{"speaker":"a","text":"x"},{"speaker":"b","text":"   "}]}"#;
        match parse_dataset_str(line, "t").unwrap_err() {
            Error::Schema { line, field, .. } => {
                assert_eq!(line, 1);
                assert_eq!(field, "turns[1].text");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let two = format!("{THREE_TURNS}\n\n{THREE_TURNS}\n");
        assert!(matches!(
            parse_dataset_str(&two, "t"),
            Err(Error::DuplicateId(id)) if id == "c1"
        ));
    }

    #[test]
    fn missing_field_reports_line_and_field() {
        let input = format!("{THREE_TURNS}\n{{\"id\":\"x\"}}");
        match parse_dataset_str(&input, "t").unwrap_err() {
            Error::Schema { line, field, .. } => {
                assert_eq!(line, 2);
                assert_eq!(field, "turns");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn objective_fields_must_match_mode() {
        let bad = r#"{"id":"c","turns":[{"speaker":"a","text":"x"}],"objective":{"mode":"artifact","terminal_item":"q"}}"#;
        assert!(parse_dataset_str(bad, "t").is_err());
        let state_without_agenda = r#"{"id":"c","turns":[{"speaker":"a","text":"x"}],"objective":{"mode":"state","terminal_item":"q"}}"#;
        assert!(parse_dataset_str(state_without_agenda, "t").is_err());
    }

    #[test]
    fn agenda_and_objective_round_trip() {
        let line = r#"{"id":"c","turns":[{"speaker":"a","text":"x"},{"speaker":"b","text":"y"}],"agenda":{"items":[{"id":"i1","text":"first"},{"id":"i2","text":"second"}],"edges":[["i1","i2"]],"start":"i1"},"objective":{"mode":"state","terminal_item":"i2"},"history_length":1}"#;
        let ds = parse_dataset_str(line, "t").unwrap();
        let c = &ds.conversations[0];
        assert_eq!(c.history_length(), 1);
        assert_eq!(c.agenda().unwrap().len(), 2);
        let again = conversation_to_json_line(c);
        let v1: serde_json::Value = serde_json::from_str(line).unwrap();
        let v2: serde_json::Value = serde_json::from_str(&again).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn profiles_parse_and_reject_duplicates() {
        let p = "{\"speaker\":\"a\",\"background\":\"db expert\"}\n{\"speaker\":\"b\",\"background\":\"pm\"}";
        let m = parse_profiles_str(p).unwrap();
        assert_eq!(m["a"].background_text(), Some("db expert"));
        let dup = "{\"speaker\":\"a\",\"background\":\"x\"}\n{\"speaker\":\"a\",\"background\":\"y\"}";
        assert!(matches!(parse_profiles_str(dup), Err(Error::DuplicateProfile(_))));
    }
}

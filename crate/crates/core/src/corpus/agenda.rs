use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Self {
        ItemId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for ItemId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        ItemId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaItem {
    pub id: ItemId,
    pub text: String,
}

/// Directed graph of agenda items; an edge `(a, b)` makes `b` a follow-up of `a`.
///
/// Items keep their declaration order, and successor/predecessor lists keep
/// edge declaration order. Both orders drive every tie-break downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct AgendaGraph {
    items: Vec<AgendaItem>,
    edges: Vec<(usize, usize)>,
    start: usize,
    index: HashMap<ItemId, usize>,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
}

impl AgendaGraph {
    pub fn new<E, A, B>(items: Vec<AgendaItem>, edges: E, start: &str) -> Result<Self>
    where
        E: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        if items.is_empty() {
            return Err(Error::InvalidConversation("agenda has no items".into()));
        }
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.id.clone(), i).is_some() {
                return Err(Error::InvalidConversation(format!(
                    "duplicate agenda item id `{}`",
                    item.id
                )));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownItem(id.to_owned()))
        };
        let mut resolved = Vec::new();
        for (a, b) in edges {
            resolved.push((lookup(a.as_ref())?, lookup(b.as_ref())?));
        }
        let start = lookup(start)?;
        let mut successors = vec![Vec::new(); items.len()];
        let mut predecessors = vec![Vec::new(); items.len()];
        for &(a, b) in &resolved {
            successors[a].push(b);
            predecessors[b].push(a);
        }
        Ok(AgendaGraph {
            items,
            edges: resolved,
            start,
            index,
            successors,
            predecessors,
        })
    }

    /// Linear chain `items[0] -> items[1] -> ...` starting at the first item.
    pub fn chain(items: Vec<AgendaItem>) -> Result<Self> {
        let ids: Vec<String> = items.iter().map(|i| i.id.0.clone()).collect();
        let start = ids.first().cloned().unwrap_or_default();
        let edges: Vec<(String, String)> = ids
            .windows(2)
            .map(|w| (w[0].clone(), w[1].clone()))
            .collect();
        Self::new(items, edges, &start)
    }

    pub fn items(&self) -> &[AgendaItem] {
        &self.items
    }

    pub fn item(&self, idx: usize) -> &AgendaItem {
        &self.items[idx]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn successors(&self, idx: usize) -> &[usize] {
        &self.successors[idx]
    }

    pub fn predecessors(&self, idx: usize) -> &[usize] {
        &self.predecessors[idx]
    }
}

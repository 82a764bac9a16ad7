//! Reference replacement policies behind a uniform access interface:
//! plain LRU, adaptive ARC, and LIRS. Each tracks the same statistics
//! shape as the factorization policy (prefetch counters stay zero).

mod arc;
mod lirs;
mod lru;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::assignment::ElementId;

pub use arc::ArcPolicy;
pub use lirs::LirsPolicy;
pub use lru::LruPolicy;

/// Policy selector as it appears in configs and reports.
///
/// `Semantic` is a named comparison slot with no implementation behind
/// it; runs report it as absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Lru,
    Arc,
    Lirs,
    Pfcs,
    Semantic,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::Arc => "arc",
            PolicyKind::Lirs => "lirs",
            PolicyKind::Pfcs => "pfcs",
            PolicyKind::Semantic => "semantic",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lru" => Ok(PolicyKind::Lru),
            "arc" => Ok(PolicyKind::Arc),
            "lirs" => Ok(PolicyKind::Lirs),
            "pfcs" => Ok(PolicyKind::Pfcs),
            "semantic" => Ok(PolicyKind::Semantic),
            other => Err(format!("unknown policy '{other}' (expected lru, arc, lirs, pfcs, or semantic)")),
        }
    }
}

/// Recency-ordered set of elements with O(log n) updates. MRU at the
/// back, LRU at the front.
#[derive(Debug, Default)]
pub(crate) struct OrderedList {
    by_seq: BTreeMap<u64, ElementId>,
    pos: HashMap<ElementId, u64>,
    next_seq: u64,
}

impl OrderedList {
    pub(crate) fn len(&self) -> usize {
        self.pos.len()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub(crate) fn contains(&self, d: ElementId) -> bool {
        self.pos.contains_key(&d)
    }

    /// Insert or move to the MRU position.
    pub(crate) fn push_mru(&mut self, d: ElementId) {
        if let Some(seq) = self.pos.remove(&d) {
            self.by_seq.remove(&seq);
        }
        self.next_seq += 1;
        self.by_seq.insert(self.next_seq, d);
        self.pos.insert(d, self.next_seq);
    }

    pub(crate) fn pop_lru(&mut self) -> Option<ElementId> {
        let (_, d) = self.by_seq.pop_first()?;
        self.pos.remove(&d);
        Some(d)
    }

    pub(crate) fn peek_lru(&self) -> Option<ElementId> {
        self.by_seq.first_key_value().map(|(_, &d)| d)
    }

    pub(crate) fn remove(&mut self, d: ElementId) -> bool {
        match self.pos.remove(&d) {
            Some(seq) => {
                self.by_seq.remove(&seq);
                true
            }
            None => false,
        }
    }
}

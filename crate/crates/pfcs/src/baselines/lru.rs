//! Least-recently-used replacement.

use crate::assignment::ElementId;
use crate::cache::SimStats;

use super::OrderedList;

pub struct LruPolicy {
    capacity: usize,
    list: OrderedList,
    stats: SimStats,
}

impl LruPolicy {
    pub fn new(capacity: usize) -> LruPolicy {
        assert!(capacity >= 1, "capacity must be at least 1");
        LruPolicy { capacity, list: OrderedList::default(), stats: SimStats::default() }
    }

    /// One access; returns true on a hit.
    pub fn access(&mut self, d: ElementId) -> bool {
        self.stats.accesses += 1;
        let hit = self.list.contains(d);
        if hit {
            self.stats.hits += 1;
        } else {
            self.stats.misses += 1;
            if self.list.len() >= self.capacity {
                self.list.pop_lru();
                self.stats.evictions += 1;
            }
        }
        self.list.push_mru(d);
        hit
    }

    pub fn contains(&self, d: ElementId) -> bool {
        self.list.contains(d)
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn stats(&self) -> SimStats {
        self.stats
    }
}

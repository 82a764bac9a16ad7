//! Adaptive Replacement Cache.
//!
//! Four lists: T1 (seen once, resident), T2 (seen at least twice,
//! resident), and their ghost extensions B1/B2 holding recently evicted
//! keys. The adaptation parameter `p` is the target size of T1; ghost
//! hits in B1 grow it, ghost hits in B2 shrink it, steering capacity
//! between recency and frequency.

use crate::assignment::ElementId;
use crate::cache::SimStats;

use super::OrderedList;

pub struct ArcPolicy {
    capacity: usize,
    p: usize,
    t1: OrderedList,
    t2: OrderedList,
    b1: OrderedList,
    b2: OrderedList,
    stats: SimStats,
}

impl ArcPolicy {
    pub fn new(capacity: usize) -> ArcPolicy {
        assert!(capacity >= 1, "capacity must be at least 1");
        ArcPolicy {
            capacity,
            p: 0,
            t1: OrderedList::default(),
            t2: OrderedList::default(),
            b1: OrderedList::default(),
            b2: OrderedList::default(),
            stats: SimStats::default(),
        }
    }

    pub fn adaptation(&self) -> usize {
        self.p
    }

    pub fn stats(&self) -> SimStats {
        self.stats
    }

    pub fn contains(&self, d: ElementId) -> bool {
        self.t1.contains(d) || self.t2.contains(d)
    }

    /// Demote the LRU of T1 or T2 into its ghost list.
    fn replace(&mut self, ghost_hit_in_b2: bool) {
        let demote_t1 = !self.t1.is_empty()
            && (self.t1.len() > self.p || (ghost_hit_in_b2 && self.t1.len() == self.p));
        if demote_t1 {
            let victim = self.t1.pop_lru().expect("t1 nonempty");
            self.b1.push_mru(victim);
        } else {
            let victim = self.t2.pop_lru().expect("t2 nonempty when t1 is not demotable");
            self.b2.push_mru(victim);
        }
        self.stats.evictions += 1;
    }

    /// One access; returns true on a hit.
    pub fn access(&mut self, d: ElementId) -> bool {
        self.stats.accesses += 1;
        let c = self.capacity;

        if self.t1.remove(d) || self.t2.contains(d) {
            // Hit: promote to MRU of T2.
            self.stats.hits += 1;
            self.t2.push_mru(d);
            return true;
        }
        self.stats.misses += 1;

        if self.b1.contains(d) {
            // Ghost hit favoring recency: grow p.
            let delta = (self.b2.len() / self.b1.len().max(1)).max(1);
            self.p = (self.p + delta).min(c);
            self.replace(false);
            self.b1.remove(d);
            self.t2.push_mru(d);
            return false;
        }
        if self.b2.contains(d) {
            // Ghost hit favoring frequency: shrink p.
            let delta = (self.b1.len() / self.b2.len().max(1)).max(1);
            self.p = self.p.saturating_sub(delta);
            self.replace(true);
            self.b2.remove(d);
            self.t2.push_mru(d);
            return false;
        }

        // Entirely new key.
        let l1 = self.t1.len() + self.b1.len();
        if l1 == c {
            if self.t1.len() < c {
                self.b1.pop_lru();
                self.replace(false);
            } else {
                // B1 is empty and T1 is full: plain eviction, no ghost.
                self.t1.pop_lru();
                self.stats.evictions += 1;
            }
        } else if l1 < c {
            let total = l1 + self.t2.len() + self.b2.len();
            if total >= c {
                if total == 2 * c {
                    self.b2.pop_lru();
                }
                self.replace(false);
            }
        }
        self.t1.push_mru(d);
        false
    }

    /// Structural inequalities from the algorithm definition.
    pub fn check_invariants(&self) -> Result<(), String> {
        let c = self.capacity;
        let resident = self.t1.len() + self.t2.len();
        let l1 = self.t1.len() + self.b1.len();
        let total = l1 + self.t2.len() + self.b2.len();
        if resident > c {
            return Err(format!("|T1|+|T2| = {resident} exceeds c = {c}"));
        }
        if l1 > c {
            return Err(format!("|T1|+|B1| = {l1} exceeds c = {c}"));
        }
        if total > 2 * c {
            return Err(format!("total directory size {total} exceeds 2c = {}", 2 * c));
        }
        if self.p > c {
            return Err(format!("p = {} exceeds c = {c}", self.p));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(k: u64) -> ElementId {
        ElementId(k)
    }

    #[test]
    fn ghost_hit_in_b1_increases_p() {
        let mut arc = ArcPolicy::new(2);
        arc.access(e(1));
        arc.access(e(2));
        arc.access(e(3)); // evicts 1 into B1
        assert_eq!(arc.adaptation(), 0);
        arc.access(e(1)); // ghost hit in B1
        assert!(arc.adaptation() > 0, "p should grow on a B1 ghost hit");
        assert!(arc.contains(e(1)));
    }

    #[test]
    fn repeated_key_hits_after_first() {
        let mut arc = ArcPolicy::new(3);
        assert!(!arc.access(e(5)));
        for _ in 0..5 {
            assert!(arc.access(e(5)));
        }
    }

    #[test]
    fn hits_promote_into_t2() {
        let mut arc = ArcPolicy::new(4);
        arc.access(e(1));
        assert!(arc.t1.contains(e(1)));
        arc.access(e(1));
        assert!(arc.t2.contains(e(1)));
        assert!(!arc.t1.contains(e(1)));
    }

    #[test]
    fn invariants_hold_on_random_traces() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for capacity in [1usize, 2, 7, 32] {
            let mut arc = ArcPolicy::new(capacity);
            for _ in 0..10_000 {
                // Mixed working-set sizes exercise all four cases.
                let key = if rng.gen_bool(0.6) {
                    rng.gen_range(0..capacity as u64 + 2)
                } else {
                    rng.gen_range(0..200)
                };
                arc.access(e(key));
                arc.check_invariants().unwrap();
                let s = arc.stats();
                assert_eq!(s.hits + s.misses, s.accesses);
            }
        }
    }
}

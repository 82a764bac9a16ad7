//! Adaptive element-to-prime assignment.
//!
//! Assignment is idempotent: an element that already owns a prime keeps
//! it, even when its access pattern changes. Re-ranging only ever happens
//! through release-and-reassign, which recycling triggers; silently
//! swapping a live element's prime would invalidate every composite that
//! embeds it.
//!
//! Range selection is driven by a decayed access-frequency estimate and
//! the element's relationship count: hot elements draw small primes,
//! warm elements medium ones, related-but-cold elements go to the L3
//! range, and everything else to the backing store's unbounded range.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Level, PfcsParams, StepBudget};
use crate::primes::{Allocation, Prime, PrimePool};
use crate::relations::RelationRegistry;

/// Opaque application-level key for a cached data element.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ElementId(pub u64);

impl std::fmt::Display for ElementId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Logical time; advanced by the simulator once per trace event.
pub type Tick = u64;

/// Decayed access-frequency summary for one element.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AccessStats {
    pub ewma: f64,
    pub last_seen: Tick,
}

impl AccessStats {
    /// Fold one observed access at `now` into the estimate.
    pub fn record(&mut self, alpha: f64, now: Tick) {
        self.ewma = decayed(self.ewma, alpha, self.last_seen, now) + 1.0;
        self.last_seen = now;
    }
}

fn decayed(ewma: f64, alpha: f64, last_seen: Tick, now: Tick) -> f64 {
    let gap = now.saturating_sub(last_seen);
    ewma * alpha.powf(gap as f64)
}

/// Frequency estimate at `now`: the stored EWMA decayed by
/// `alpha^(now - last_seen)`. Pure.
pub fn predict_frequency(stats: &AccessStats, alpha: f64, now: Tick) -> f64 {
    decayed(stats.ewma, alpha, stats.last_seen, now)
}

/// Pick the prime range for a new assignment.
///
/// Hot elements take the smallest primes, warm ones the medium range;
/// cold elements go to L3 when they participate in relationships and to
/// the backing store otherwise. The factorization budget of the
/// requesting level is accepted for signature parity with the other
/// selection inputs but does not currently influence the choice.
pub fn select_range(
    freq: f64,
    relationships: usize,
    _budget: StepBudget,
    f_hot: f64,
    f_warm: f64,
) -> Level {
    if freq >= f_hot {
        Level::L1
    } else if freq >= f_warm {
        Level::L2
    } else if relationships > 0 {
        Level::L3
    } else {
        Level::Memory
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignError {
    #[error("prime pool for {level} exhausted even after recycling")]
    Exhausted { level: Level },
}

/// Bidirectional element/prime maps plus per-element access summaries.
///
/// The two maps are exact inverses at all times; every prime they mention
/// is currently allocated in exactly one pool.
#[derive(Debug, Default)]
pub struct AssignmentTable {
    data_to_prime: HashMap<ElementId, Prime>,
    prime_to_data: HashMap<u64, ElementId>,
    stats: HashMap<ElementId, AccessStats>,
}

/// One successful assignment, with any collateral recycling the caller
/// must propagate to its own state (cache residency, most notably).
#[derive(Debug)]
pub struct AssignOutcome {
    pub prime: Prime,
    /// Elements whose primes were reclaimed to satisfy this assignment.
    pub recycled: Vec<(ElementId, Prime)>,
}

impl AssignmentTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn prime_of(&self, d: ElementId) -> Option<Prime> {
        self.data_to_prime.get(&d).copied()
    }

    pub fn element_of(&self, p: Prime) -> Option<ElementId> {
        self.prime_to_data.get(&p.get()).copied()
    }

    pub fn element_of_raw(&self, p: u64) -> Option<ElementId> {
        self.prime_to_data.get(&p).copied()
    }

    pub fn len(&self) -> usize {
        self.data_to_prime.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data_to_prime.is_empty()
    }

    pub fn stats_of(&self, d: ElementId) -> AccessStats {
        self.stats.get(&d).copied().unwrap_or_default()
    }

    /// Record a demand access for frequency prediction.
    pub fn record_access(&mut self, d: ElementId, alpha: f64, now: Tick) {
        self.stats.entry(d).or_default().record(alpha, now);
    }

    fn bind(&mut self, d: ElementId, p: Prime) {
        let prev_prime = self.data_to_prime.insert(d, p);
        let prev_elem = self.prime_to_data.insert(p.get(), d);
        debug_assert!(prev_prime.is_none() && prev_elem.is_none(), "bind clobbered a mapping");
    }

    /// Test fixtures bind primes directly instead of draining pools.
    #[cfg(test)]
    pub(crate) fn bind_for_tests(&mut self, d: ElementId, p: Prime) {
        self.bind(d, p);
    }

    /// Drop both map directions for `d`, returning the freed prime. The
    /// caller returns the prime to its pool and purges composites that
    /// contain it; access statistics survive so a re-assigned element
    /// keeps its history.
    pub fn release_element(&mut self, d: ElementId) -> Option<Prime> {
        let p = self.data_to_prime.remove(&d)?;
        let back = self.prime_to_data.remove(&p.get());
        debug_assert_eq!(back, Some(d));
        Some(p)
    }

    /// Ensure `d` owns a prime, allocating one if needed.
    ///
    /// Idempotent: a mapped element returns its existing prime untouched.
    /// Otherwise the target range is chosen from the predicted frequency
    /// and `relationships` (the group count the caller is about to make
    /// true, for assignments performed on behalf of a registration), the
    /// pool allocates smallest-first, and on exhaustion 10% of the pool's
    /// live primes (rounded up) are recycled before a single retry.
    /// Recycled elements lose their mapping here and their composites in
    /// `registry`; the caller finishes the invalidation.
    pub fn assign_prime(
        &mut self,
        pools: &mut HashMap<Level, PrimePool>,
        registry: &mut RelationRegistry,
        d: ElementId,
        context_level: Level,
        relationships: usize,
        params: &PfcsParams,
        now: Tick,
    ) -> Result<AssignOutcome, AssignError> {
        if let Some(p) = self.prime_of(d) {
            return Ok(AssignOutcome { prime: p, recycled: Vec::new() });
        }
        let freq = predict_frequency(&self.stats_of(d), params.ewma_alpha, now);
        let level = select_range(
            freq,
            relationships,
            params.budget(context_level),
            params.f_hot,
            params.f_warm,
        );
        let pool = pools.get_mut(&level).expect("pool missing for level");
        match pool.allocate() {
            Allocation::Allocated(p) => {
                self.bind(d, p);
                Ok(AssignOutcome { prime: p, recycled: Vec::new() })
            }
            Allocation::Exhausted => {
                let count = ((pool.allocated_len() as f64) * 0.1).ceil() as usize;
                let reclaimed = pool.recycle_lru(count.max(1));
                let mut recycled = Vec::with_capacity(reclaimed.len());
                for p in reclaimed {
                    registry.purge_prime(p);
                    if let Some(owner) = self.element_of(p) {
                        self.release_element(owner);
                        recycled.push((owner, p));
                    }
                }
                match pool.allocate() {
                    Allocation::Allocated(p) => {
                        self.bind(d, p);
                        Ok(AssignOutcome { prime: p, recycled })
                    }
                    Allocation::Exhausted => Err(AssignError::Exhausted { level }),
                }
            }
        }
    }
}

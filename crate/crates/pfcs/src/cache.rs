//! Simulated multi-level cache running the prime-factorization policy.
//!
//! The hierarchy is inclusive and entry-granular: an access consults
//! L1, L2, L3 in order, a hit at a lower level copies the entry up to
//! L1, and a miss fills every cache level on the way from the backing
//! store. Residency in a smaller level implies residency in the larger
//! ones, so a demand access hits exactly when the element sits in the
//! largest level; with an empty relationship registry the policy
//! degenerates to plain LRU at the largest level's capacity.
//!
//! Prefetching walks the registered composites containing the accessed
//! element's prime, discovers their members by factorization within the
//! level's step budget, and fills absent members into the level their
//! prime range indicates. Eviction is relationship-aware: unused
//! prefetched entries go first, then the fewest-relationships entry,
//! oldest first among ties.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{AssignError, AssignmentTable, ElementId, Tick};
use crate::config::{Level, PfcsParams, StepBudget};
use crate::factorizer::{FactorizationCache, Provenance, SpfTable};
use crate::primes::{Prime, PrimePool};
use crate::relations::{discover, Composite, RelationError, RelationRegistry};

/// Count-based statistics for one simulation instance.
///
/// `hits + misses == accesses` always. `factorizations` counts staged
/// factorization computations (table and cache hits excluded);
/// `budget_exhaustions` counts discoveries abandoned on an exhausted
/// step budget; `evictions` counts policy-chosen victims at any level
/// (coherence removals that keep the levels inclusive are not policy
/// decisions and are not counted).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub prefetch_issued: u64,
    pub prefetch_used: u64,
    pub evictions: u64,
    pub factorizations: u64,
    pub budget_exhaustions: u64,
}

impl SimStats {
    pub fn hit_rate(&self) -> f64 {
        if self.accesses == 0 {
            0.0
        } else {
            self.hits as f64 / self.accesses as f64
        }
    }

    pub fn merge(&mut self, other: &SimStats) {
        self.accesses += other.accesses;
        self.hits += other.hits;
        self.misses += other.misses;
        self.prefetch_issued += other.prefetch_issued;
        self.prefetch_used += other.prefetch_used;
        self.evictions += other.evictions;
        self.factorizations += other.factorizations;
        self.budget_exhaustions += other.budget_exhaustions;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit,
    Miss,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error(transparent)]
    Relation(#[from] RelationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FillSource {
    Demand,
    Prefetch,
}

#[derive(Debug, Clone, Copy)]
struct EntryMeta {
    last_access: Tick,
    /// Entered the cache through prefetch.
    prefetched: bool,
    /// Has served at least one demand access.
    used: bool,
}

#[derive(Debug)]
struct LevelResidents {
    level: Level,
    capacity: usize,
    set: HashSet<ElementId>,
}

/// One cache instance: pools, assignment, registry, factorization state,
/// and the resident sets. Strictly single-threaded; run independent
/// instances for parallel sweeps.
pub struct PfcsCache {
    params: PfcsParams,
    pools: HashMap<Level, PrimePool>,
    table: AssignmentTable,
    registry: RelationRegistry,
    spf: Arc<SpfTable>,
    fcache: FactorizationCache,
    levels: Vec<LevelResidents>,
    meta: HashMap<ElementId, EntryMeta>,
    stats: SimStats,
    tick: Tick,
}

impl PfcsCache {
    pub fn new(params: PfcsParams, spf: Arc<SpfTable>) -> Result<Self, crate::config::ConfigError> {
        params.validate()?;
        let pools = Level::ALL
            .iter()
            .map(|&lvl| {
                (
                    lvl,
                    PrimePool::new(
                        lvl,
                        params.level_config(lvl).prime_range,
                        params.sieve_segment as u64,
                    ),
                )
            })
            .collect();
        let levels = params
            .levels
            .iter()
            .map(|lc| LevelResidents {
                level: lc.level,
                capacity: lc.capacity,
                set: HashSet::new(),
            })
            .collect();
        Ok(PfcsCache {
            fcache: FactorizationCache::new(params.factorization_cache_capacity),
            registry: RelationRegistry::new(params.arity_cap),
            params,
            pools,
            table: AssignmentTable::new(),
            spf,
            levels,
            meta: HashMap::new(),
            stats: SimStats::default(),
            tick: 0,
        })
    }

    pub fn params(&self) -> &PfcsParams {
        &self.params
    }

    pub fn table(&self) -> &AssignmentTable {
        &self.table
    }

    pub fn registry(&self) -> &RelationRegistry {
        &self.registry
    }

    /// Pure statistics snapshot.
    pub fn report(&self) -> SimStats {
        self.stats
    }

    pub fn is_resident(&self, d: ElementId) -> bool {
        self.levels.iter().any(|lvl| lvl.set.contains(&d))
    }

    pub fn resident_level(&self, d: ElementId) -> Option<Level> {
        self.levels.iter().find(|lvl| lvl.set.contains(&d)).map(|lvl| lvl.level)
    }

    pub fn level_len(&self, level: Level) -> usize {
        self.levels
            .iter()
            .find(|lvl| lvl.level == level)
            .map_or(0, |lvl| lvl.set.len())
    }

    /// One demand access. On a hit, recency refreshes everywhere the
    /// entry resides and lower-level hits promote copies up to L1; on a
    /// miss, the element (assigned a prime if it has none) fills every
    /// level. Either way the access then triggers prefetch along the
    /// element's registered relationships, with the step budget of the
    /// level that served the access (the backing store's on a miss).
    pub fn lookup(&mut self, d: ElementId) -> Result<AccessOutcome, SimError> {
        self.tick += 1;
        let tick = self.tick;
        self.stats.accesses += 1;
        self.table.record_access(d, self.params.ewma_alpha, tick);

        let hit_level = self.levels.iter().position(|lvl| lvl.set.contains(&d));
        let outcome = match hit_level {
            Some(k) => {
                self.stats.hits += 1;
                let meta = self.meta.get_mut(&d).expect("resident entry has metadata");
                if meta.prefetched && !meta.used {
                    self.stats.prefetch_used += 1;
                }
                meta.used = true;
                meta.last_access = tick;
                let p = self.table.prime_of(d).expect("resident element owns a prime");
                self.touch_pool(p);
                // Promote up to L1, filling the larger level first.
                for idx in (0..k).rev() {
                    self.insert_entry(idx, d, FillSource::Demand);
                }
                let budget = self.params.budget(self.levels[k].level);
                self.prefetch_with_budget(d, budget);
                AccessOutcome::Hit
            }
            None => {
                self.stats.misses += 1;
                let rel = self.registry.group_count(d);
                self.ensure_prime(d, rel)?;
                self.meta.insert(d, EntryMeta { last_access: tick, prefetched: false, used: true });
                for idx in (0..self.levels.len()).rev() {
                    self.insert_entry(idx, d, FillSource::Demand);
                }
                let budget = self.params.memory.budget;
                self.prefetch_with_budget(d, budget);
                AccessOutcome::Miss
            }
        };
        Ok(outcome)
    }

    /// Register a relationship group arriving from the trace, assigning
    /// primes to members that lack one. The group under registration
    /// counts toward each member's relationship signal, so cold members
    /// draw from the L3 range rather than the backing store.
    pub fn relate(&mut self, keys: &[ElementId]) -> Result<Composite, SimError> {
        self.tick += 1;
        for &d in keys {
            let rel = self.registry.group_count(d) + 1;
            self.ensure_prime(d, rel)?;
        }
        let c = self.registry.register_group(&self.table, keys, self.tick)?;
        Ok(c)
    }

    /// Prefetch along every registered composite containing `d`'s prime:
    /// discover members within `budget`, then fill absent members into
    /// the level their prime range indicates (and the levels below it,
    /// keeping the hierarchy inclusive). Composites are visited most
    /// recently registered first and at most `prefetch_cap` elements are
    /// fetched per access. A fill never displaces a demand entry as
    /// recent as the triggering access; such fills are dropped instead.
    pub fn prefetch(&mut self, d: ElementId) -> Vec<ElementId> {
        let budget = match self.resident_level(d) {
            Some(level) => self.params.budget(level),
            None => self.params.memory.budget,
        };
        self.prefetch_with_budget(d, budget)
    }

    fn prefetch_with_budget(&mut self, d: ElementId, budget: StepBudget) -> Vec<ElementId> {
        let mut fetched = Vec::new();
        let Some(p) = self.table.prime_of(d) else {
            return fetched;
        };
        let composites: Vec<Composite> = self
            .registry
            .related_groups_recent_first(p)
            .into_iter()
            .map(|g| g.composite.clone())
            .collect();
        'composites: for c in composites {
            if fetched.len() >= self.params.prefetch_cap {
                break;
            }
            let found = match discover(&self.table, &c, budget, &mut self.fcache, &self.spf) {
                Ok(found) => found,
                Err(_) => continue,
            };
            if found.provenance == Provenance::Computed {
                self.stats.factorizations += 1;
            }
            if !found.complete {
                self.stats.budget_exhaustions += 1;
                continue;
            }
            for member in found.members {
                if fetched.len() >= self.params.prefetch_cap {
                    break 'composites;
                }
                if member == d || self.is_resident(member) {
                    continue;
                }
                let Some(mp) = self.table.prime_of(member) else {
                    continue;
                };
                let Some(home) = self.params.level_of_prime(mp.get()) else {
                    continue;
                };
                if home == Level::Memory {
                    // Backing-store elements have no cache level to fill.
                    continue;
                }
                let home_idx = self
                    .levels
                    .iter()
                    .position(|lvl| lvl.level == home)
                    .expect("home level exists");
                self.meta.insert(
                    member,
                    EntryMeta { last_access: self.tick, prefetched: true, used: false },
                );
                let mut placed = false;
                for idx in (home_idx..self.levels.len()).rev() {
                    if !self.insert_entry(idx, member, FillSource::Prefetch) {
                        break;
                    }
                    placed = true;
                }
                if placed {
                    self.stats.prefetch_issued += 1;
                    fetched.push(member);
                } else {
                    self.meta.remove(&member);
                }
            }
        }
        fetched
    }

    fn touch_pool(&mut self, p: Prime) {
        let level = self
            .params
            .level_of_prime(p.get())
            .expect("assigned primes come from configured ranges");
        self.pools
            .get_mut(&level)
            .expect("pool per level")
            .touch(p)
            .expect("assigned prime is allocated");
    }

    fn ensure_prime(&mut self, d: ElementId, relationships: usize) -> Result<Prime, SimError> {
        let outcome = self.table.assign_prime(
            &mut self.pools,
            &mut self.registry,
            d,
            Level::Memory,
            relationships,
            &self.params,
            self.tick,
        )?;
        for &(victim, _) in &outcome.recycled {
            for lvl in &mut self.levels {
                lvl.set.remove(&victim);
            }
            self.meta.remove(&victim);
        }
        Ok(outcome.prime)
    }

    /// Victim for one level: argmin of (still-unused prefetch, relation
    /// degree, last access, element id).
    fn victim_of_level(&self, idx: usize) -> Option<ElementId> {
        self.levels[idx]
            .set
            .iter()
            .min_by_key(|&&d| self.eviction_key(d))
            .copied()
    }

    fn eviction_key(&self, d: ElementId) -> (bool, usize, Tick, u64) {
        let meta = &self.meta[&d];
        let unused_prefetch = meta.prefetched && !meta.used;
        (!unused_prefetch, self.registry.group_count(d), meta.last_access, d.0)
    }

    /// Place `d` into level `idx`, evicting if full. Returns false only
    /// when a prefetch fill would displace a demand entry at least as
    /// recent as the current access.
    fn insert_entry(&mut self, idx: usize, d: ElementId, source: FillSource) -> bool {
        if self.levels[idx].set.contains(&d) {
            return true;
        }
        if self.levels[idx].set.len() >= self.levels[idx].capacity {
            let victim = self.victim_of_level(idx).expect("full level is nonempty");
            if source == FillSource::Prefetch {
                let vm = &self.meta[&victim];
                let demand_entry = vm.used || !vm.prefetched;
                if demand_entry && vm.last_access >= self.tick {
                    return false;
                }
            }
            // Drop the victim here and at every smaller level so the
            // levels stay inclusive.
            for lvl in &mut self.levels[..=idx] {
                lvl.set.remove(&victim);
            }
            self.stats.evictions += 1;
            if !self.is_resident(victim) {
                self.meta.remove(&victim);
            }
        }
        self.levels[idx].set.insert(d);
        true
    }
}

//! Shared configuration types: cache levels, prime ranges, step budgets,
//! and the tunable parameter block used by the simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cache level tag. `Memory` is the backing store: accesses that reach it
/// count as misses, and its prime range is unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    L1,
    L2,
    L3,
    Memory,
}

impl Level {
    pub const CACHE_LEVELS: [Level; 3] = [Level::L1, Level::L2, Level::L3];
    pub const ALL: [Level; 4] = [Level::L1, Level::L2, Level::L3, Level::Memory];

    pub fn name(self) -> &'static str {
        match self {
            Level::L1 => "l1",
            Level::L2 => "l2",
            Level::L3 => "l3",
            Level::Memory => "memory",
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Half-open-ended inclusive prime range; `hi = None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeRange {
    pub lo: u64,
    pub hi: Option<u64>,
}

impl PrimeRange {
    pub fn bounded(lo: u64, hi: u64) -> Self {
        debug_assert!(lo <= hi);
        PrimeRange { lo, hi: Some(hi) }
    }

    pub fn unbounded(lo: u64) -> Self {
        PrimeRange { lo, hi: None }
    }

    pub fn contains(&self, v: u64) -> bool {
        v >= self.lo && self.hi.map_or(true, |hi| v <= hi)
    }

    pub fn overlaps(&self, other: &PrimeRange) -> bool {
        let self_hi = self.hi.unwrap_or(u64::MAX);
        let other_hi = other.hi.unwrap_or(u64::MAX);
        self.lo <= other_hi && other.lo <= self_hi
    }
}

/// Factorization work allowance in deterministic algorithmic steps: one
/// trial-division test or one rho iteration consumes one step. A budget of
/// zero permits only table and cache lookups.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct StepBudget(pub u64);

impl StepBudget {
    pub fn steps(self) -> u64 {
        self.0
    }
}

/// Per-level capacity, prime range, and factorization budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub level: Level,
    /// Entry count; ignored for `Memory`, which is unbounded.
    pub capacity: usize,
    pub prime_range: PrimeRange,
    pub budget: StepBudget,
}

/// Tunables for one simulated cache instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfcsParams {
    /// L1, L2, L3 configuration, in order.
    pub levels: Vec<LevelConfig>,
    /// Backing-store prime range and factorization budget.
    pub memory: LevelConfig,
    /// EWMA decay factor per logical tick.
    pub ewma_alpha: f64,
    /// Frequency cut point above which an element is considered hot.
    pub f_hot: f64,
    /// Frequency cut point above which an element is considered warm.
    pub f_warm: f64,
    /// Maximum elements prefetched per access.
    pub prefetch_cap: usize,
    /// Maximum members per relationship group.
    pub arity_cap: usize,
    /// Bounded LRU factorization cache size, in entries.
    pub factorization_cache_capacity: usize,
    /// Segment size for lazy sieve extension of unbounded pools.
    pub sieve_segment: usize,
}

impl Default for PfcsParams {
    fn default() -> Self {
        PfcsParams {
            levels: vec![
                LevelConfig {
                    level: Level::L1,
                    capacity: 64,
                    prime_range: PrimeRange::bounded(2, 997),
                    budget: StepBudget(0),
                },
                LevelConfig {
                    level: Level::L2,
                    capacity: 512,
                    prime_range: PrimeRange::bounded(1_009, 99_991),
                    budget: StepBudget(1_000),
                },
                LevelConfig {
                    level: Level::L3,
                    capacity: 4_096,
                    prime_range: PrimeRange::bounded(100_003, 9_999_991),
                    budget: StepBudget(100_000),
                },
            ],
            memory: LevelConfig {
                level: Level::Memory,
                capacity: usize::MAX,
                prime_range: PrimeRange::unbounded(10_000_019),
                budget: StepBudget(1_000_000),
            },
            ewma_alpha: 0.8,
            f_hot: 4.0,
            f_warm: 1.0,
            prefetch_cap: 8,
            arity_cap: 16,
            factorization_cache_capacity: 1 << 16,
            sieve_segment: 1 << 16,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("prime ranges of {0} and {1} overlap")]
    OverlappingRanges(Level, Level),
    #[error("capacity of {0} must be at least 1")]
    ZeroCapacity(Level),
    #[error("ewma alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("frequency cut points must satisfy f_hot > f_warm > 0, got f_hot={f_hot} f_warm={f_warm}")]
    BadCutPoints { f_hot: f64, f_warm: f64 },
    #[error("arity cap must be at least 2, got {0}")]
    BadArityCap(usize),
    #[error("{0}")]
    Invalid(String),
}

impl PfcsParams {
    /// Validate range disjointness, capacities, and cut points.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut all: Vec<LevelConfig> = self.levels.clone();
        all.push(self.memory);
        for (i, a) in all.iter().enumerate() {
            if a.level != Level::Memory && a.capacity == 0 {
                return Err(ConfigError::ZeroCapacity(a.level));
            }
            for b in &all[i + 1..] {
                if a.prime_range.overlaps(&b.prime_range) {
                    return Err(ConfigError::OverlappingRanges(a.level, b.level));
                }
            }
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(ConfigError::BadAlpha(self.ewma_alpha));
        }
        if !(self.f_hot > self.f_warm && self.f_warm > 0.0) {
            return Err(ConfigError::BadCutPoints {
                f_hot: self.f_hot,
                f_warm: self.f_warm,
            });
        }
        if self.arity_cap < 2 {
            return Err(ConfigError::BadArityCap(self.arity_cap));
        }
        Ok(())
    }

    pub fn level_config(&self, level: Level) -> &LevelConfig {
        if level == Level::Memory {
            return &self.memory;
        }
        self.levels
            .iter()
            .find(|lc| lc.level == level)
            .expect("cache level missing from params")
    }

    /// The per-level factorization budget.
    pub fn budget(&self, level: Level) -> StepBudget {
        self.level_config(level).budget
    }

    /// The level whose prime range contains `p`, if any.
    pub fn level_of_prime(&self, p: u64) -> Option<Level> {
        self.levels
            .iter()
            .chain(std::iter::once(&self.memory))
            .find(|lc| lc.prime_range.contains(p))
            .map(|lc| lc.level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        PfcsParams::default().validate().unwrap();
    }

    #[test]
    fn default_ranges_match_hierarchy_layout() {
        let p = PfcsParams::default();
        assert_eq!(p.level_config(Level::L1).prime_range, PrimeRange::bounded(2, 997));
        assert_eq!(p.level_config(Level::L2).prime_range, PrimeRange::bounded(1_009, 99_991));
        assert_eq!(
            p.level_config(Level::L3).prime_range,
            PrimeRange::bounded(100_003, 9_999_991)
        );
        assert_eq!(p.memory.prime_range, PrimeRange::unbounded(10_000_019));
    }

    #[test]
    fn overlap_is_rejected() {
        let mut p = PfcsParams::default();
        p.levels[1].prime_range = PrimeRange::bounded(900, 2_000);
        assert!(matches!(
            p.validate(),
            Err(ConfigError::OverlappingRanges(Level::L1, Level::L2))
        ));
    }

    #[test]
    fn level_of_prime_follows_ranges() {
        let p = PfcsParams::default();
        assert_eq!(p.level_of_prime(2), Some(Level::L1));
        assert_eq!(p.level_of_prime(997), Some(Level::L1));
        assert_eq!(p.level_of_prime(1_009), Some(Level::L2));
        assert_eq!(p.level_of_prime(100_003), Some(Level::L3));
        assert_eq!(p.level_of_prime(10_000_019), Some(Level::Memory));
        assert_eq!(p.level_of_prime(999), None);
    }
}

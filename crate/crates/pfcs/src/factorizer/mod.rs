//! Staged relationship factorization.
//!
//! Composites at or below the precomputed-table bound resolve instantly
//! through a smallest-prime-factor table. Larger values consult a bounded
//! LRU cache, then run budgeted trial division over the primes below
//! 1000 (at most 70% of the step budget), and finally Brent's rho on
//! whatever remains. A budget that runs dry yields a partial result:
//! the factors found so far plus an unresolved remainder, with the
//! product invariant `product(factors) * remainder == input` intact.

mod rho;
mod rings;

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::config::StepBudget;
use crate::primes::{self, Prime};

pub use rho::{is_prime_big, pollard_rho};
use rho::{perfect_power, pollard_rho_budgeted};

/// Largest value served by the precomputed table.
pub const SPF_LIMIT: u64 = 1_000_000;

/// Seed for the rho polynomial sequence inside [`factorize`]; a fixed
/// constant keeps factorization a pure function of (value, budget,
/// cache state).
const RHO_SEED: u64 = 0x0F1E_2D3C_4B5A_6978;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FactorError {
    #[error("cannot factor {0}: composites must be at least 2")]
    InvalidComposite(BigUint),
}

/// Smallest-prime-factor table for every integer in `2..=SPF_LIMIT`.
///
/// `spf[p] == p` exactly when `p` is prime; repeated division by the
/// table entry recovers the full factorization of any in-range value.
pub struct SpfTable {
    spf: Vec<u32>,
}

impl SpfTable {
    /// Sieve the table. Immutable afterwards and freely shareable.
    pub fn build() -> SpfTable {
        let limit = SPF_LIMIT as usize;
        let mut spf = vec![0u32; limit + 1];
        let mut i = 2usize;
        while i <= limit {
            if spf[i] == 0 {
                let mut j = i;
                while j <= limit {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
            i += 1;
        }
        SpfTable { spf }
    }

    /// Smallest prime factor of `c`, for `2 <= c <= SPF_LIMIT`.
    pub fn spf(&self, c: u64) -> u32 {
        self.spf[c as usize]
    }

    /// Full factorization by repeated table division, ascending.
    pub fn factorize_small(&self, mut c: u64) -> Vec<u64> {
        debug_assert!(2 <= c && c <= SPF_LIMIT);
        let mut out = Vec::new();
        while c > 1 {
            let p = self.spf[c as usize] as u64;
            out.push(p);
            c /= p;
        }
        out
    }
}

/// A (possibly partial) factorization: `product(factors) * remainder`
/// always equals the input, and `complete` holds exactly when the
/// remainder is 1. Factors are 64-bit primes; a prime cofactor wider
/// than 64 bits stays in the remainder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub factors: Vec<Prime>,
    pub remainder: BigUint,
    pub complete: bool,
}

impl Factorization {
    /// Reassemble the original value.
    pub fn product(&self) -> BigUint {
        self.factors
            .iter()
            .fold(self.remainder.clone(), |acc, p| acc * p.get())
    }
}

/// Where a factorization came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Served by the smallest-prime-factor table.
    Table,
    /// Served by the factorization cache.
    Cached,
    /// Computed by the staged pipeline (and cached).
    Computed,
}

#[derive(Debug, Clone)]
pub struct FactorizeOutcome {
    pub factorization: Factorization,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
struct CacheSlot {
    factorization: Factorization,
    /// Step budget the entry was computed under; a partial result is
    /// retried once a caller shows up with more steps than this.
    budget: u64,
    last_used: u64,
}

/// Bounded least-recently-used map from composite to factorization.
///
/// Incomplete entries are kept but tagged with the budget that produced
/// them, so a later call with a larger budget recomputes instead of
/// resurfacing a stale partial result.
pub struct FactorizationCache {
    entries: HashMap<BigUint, CacheSlot>,
    recency: BTreeMap<u64, BigUint>,
    capacity: usize,
    seq: u64,
}

impl FactorizationCache {
    pub fn new(capacity: usize) -> FactorizationCache {
        FactorizationCache {
            entries: HashMap::new(),
            recency: BTreeMap::new(),
            capacity,
            seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Fetch and refresh recency.
    pub fn cache_get(&mut self, c: &BigUint) -> Option<(&Factorization, u64)> {
        self.seq += 1;
        let seq = self.seq;
        let slot = self.entries.get_mut(c)?;
        self.recency.remove(&slot.last_used);
        slot.last_used = seq;
        self.recency.insert(seq, c.clone());
        Some((&slot.factorization, slot.budget))
    }

    /// Insert or replace, evicting the least recently used entry beyond
    /// capacity.
    pub fn cache_put(&mut self, c: BigUint, factorization: Factorization, budget: StepBudget) {
        if self.capacity == 0 {
            return;
        }
        self.seq += 1;
        if let Some(old) = self.entries.get(&c) {
            self.recency.remove(&old.last_used);
        }
        self.recency.insert(self.seq, c.clone());
        self.entries.insert(
            c,
            CacheSlot { factorization, budget: budget.steps(), last_used: self.seq },
        );
        while self.entries.len() > self.capacity {
            let (_, victim) = self.recency.pop_first().expect("recency tracks entries");
            self.entries.remove(&victim);
        }
    }
}

/// Factor `c` within `budget` deterministic steps.
///
/// Values at or below [`SPF_LIMIT`] complete through the table no matter
/// the budget. Everything else goes cache, then trial division by the
/// primes below 1000 (capped at 70% of the budget, one step per
/// divisibility test), then rho on the remainder with whatever budget is
/// left (one step per iteration). Prime cofactors are recognized with
/// primality tests rather than burned down by rho, and every emitted
/// factor has passed a primality check.
pub fn factorize(
    c: &BigUint,
    budget: StepBudget,
    cache: &mut FactorizationCache,
    spf: &SpfTable,
) -> Result<FactorizeOutcome, FactorError> {
    if c < &BigUint::from(2u32) {
        return Err(FactorError::InvalidComposite(c.clone()));
    }
    if let Some(small) = c.to_u64() {
        if small <= SPF_LIMIT {
            let factors = spf
                .factorize_small(small)
                .into_iter()
                .map(Prime::new_unchecked)
                .collect();
            return Ok(FactorizeOutcome {
                factorization: Factorization {
                    factors,
                    remainder: BigUint::one(),
                    complete: true,
                },
                provenance: Provenance::Table,
            });
        }
    }
    if let Some((cached, cached_budget)) = cache.cache_get(c) {
        if cached.complete || budget.steps() <= cached_budget {
            return Ok(FactorizeOutcome {
                factorization: cached.clone(),
                provenance: Provenance::Cached,
            });
        }
    }

    let factorization = factorize_stages(c, budget, spf);
    cache.cache_put(c.clone(), factorization.clone(), budget);
    Ok(FactorizeOutcome { factorization, provenance: Provenance::Computed })
}

fn factorize_stages(c: &BigUint, budget: StepBudget, spf: &SpfTable) -> Factorization {
    let mut factors: Vec<u64> = Vec::new();
    let mut remainder = c.clone();
    let stage1_cap = budget.steps() * 7 / 10;
    let mut used = 0u64;

    'trial: for &p in primes::small_primes() {
        loop {
            if used >= stage1_cap {
                break 'trial;
            }
            used += 1;
            if (&remainder % p).is_zero() {
                remainder /= p;
                factors.push(p);
                match remainder.to_u64() {
                    Some(1) => break 'trial,
                    Some(v) if v <= SPF_LIMIT => {
                        factors.extend(spf.factorize_small(v));
                        remainder = BigUint::one();
                        break 'trial;
                    }
                    _ => {}
                }
            } else {
                break;
            }
        }
    }

    let mut steps_left = budget.steps() - used;
    let mut unresolved: Vec<BigUint> = Vec::new();
    let mut pending: Vec<BigUint> = Vec::new();
    if !remainder.is_one() {
        pending.push(remainder);
    }
    while let Some(m) = pending.pop() {
        if m.is_one() {
            continue;
        }
        if let Some(v) = m.to_u64() {
            if v <= SPF_LIMIT {
                factors.extend(spf.factorize_small(v));
                continue;
            }
            if primes::is_prime(v) {
                factors.push(v);
                continue;
            }
        } else if is_prime_big(&m) {
            // Prime wider than the factor type; stays unresolved.
            unresolved.push(m);
            continue;
        }
        if let Some((root, k)) = perfect_power(&m) {
            pending.extend(std::iter::repeat_n(root, k as usize));
            continue;
        }
        match pollard_rho_budgeted(&m, &mut steps_left, RHO_SEED) {
            Some(d) => {
                let q = &m / &d;
                pending.push(d);
                pending.push(q);
            }
            None => unresolved.push(m),
        }
    }

    factors.sort_unstable();
    let remainder = unresolved
        .into_iter()
        .fold(BigUint::one(), |acc, m| acc * m);
    Factorization {
        complete: remainder.is_one(),
        factors: factors.into_iter().map(Prime::new_unchecked).collect(),
        remainder,
    }
}

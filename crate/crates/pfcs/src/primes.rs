//! Prime generation, primality testing, and per-level prime pools.
//!
//! Pools hand out the smallest free prime in their range first, extend
//! lazily by segmented sieving (so unbounded ranges never materialize
//! more primes than have been requested), and reclaim the least recently
//! used primes when a bounded range runs dry.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::config::{Level, PrimeRange};

/// Default cap on a single sieve segment, in integers covered.
pub const DEFAULT_SEGMENT_SIZE: u64 = 1 << 16;

/// A prime number witnessed by [`is_prime`] at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prime(u64);

impl Prime {
    /// Checked constructor; `None` unless `v` is prime.
    pub fn new(v: u64) -> Option<Prime> {
        is_prime(v).then_some(Prime(v))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub(crate) fn new_unchecked(v: u64) -> Prime {
        debug_assert!(is_prime(v), "{v} is not prime");
        Prime(v)
    }
}

impl std::fmt::Display for Prime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrimeError {
    #[error("segment {lo}..={hi} exceeds the configured cap of {cap} integers")]
    SegmentTooLarge { lo: u64, hi: u64, cap: u64 },
    #[error("range is empty or starts below 2: {lo}..={hi}")]
    BadRange { lo: u64, hi: u64 },
    #[error("prime {0} is not allocated in this pool")]
    UnknownPrime(u64),
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin primality test, exact for every `u64`.
///
/// Uses the seven-witness base set {2, 325, 9375, 28178, 450775, 9780504,
/// 1795265022}, which has no strong pseudoprime below 2^64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'witness: for a in [2u64, 325, 9375, 28178, 450775, 9780504, 1795265022] {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// All primes `p` with `lo <= p <= hi`, ascending.
///
/// The span `hi - lo` must not exceed [`DEFAULT_SEGMENT_SIZE`]; use
/// repeated calls (or a pool, which segments internally) for wider scans.
pub fn sieve_primes(lo: u64, hi: u64) -> Result<Vec<Prime>, PrimeError> {
    sieve_primes_capped(lo, hi, DEFAULT_SEGMENT_SIZE)
}

/// [`sieve_primes`] with an explicit segment cap.
pub fn sieve_primes_capped(lo: u64, hi: u64, cap: u64) -> Result<Vec<Prime>, PrimeError> {
    if lo < 2 || lo > hi {
        return Err(PrimeError::BadRange { lo, hi });
    }
    if hi - lo > cap {
        return Err(PrimeError::SegmentTooLarge { lo, hi, cap });
    }
    Ok(sieve_segment(lo, hi))
}

/// Segmented sieve of Eratosthenes over `lo..=hi` (unchecked span).
fn sieve_segment(lo: u64, hi: u64) -> Vec<Prime> {
    debug_assert!(2 <= lo && lo <= hi);
    let root = hi.isqrt();
    let base = simple_sieve(root.max(2));
    let len = (hi - lo + 1) as usize;
    let mut composite = vec![false; len];
    for &p in &base {
        // First multiple of p at or above max(lo, p*p); never p itself.
        let mut m = if p * p >= lo { p * p } else { lo.div_ceil(p) * p };
        while m <= hi {
            composite[(m - lo) as usize] = true;
            match m.checked_add(p) {
                Some(next) => m = next,
                None => break,
            }
        }
    }
    (0..len)
        .filter(|&i| !composite[i])
        .map(|i| Prime::new_unchecked(lo + i as u64))
        .collect()
}

/// The 168 primes below 1000, as used by the trial-division stage.
pub(crate) fn small_primes() -> &'static [u64] {
    use std::sync::OnceLock;
    static SMALL: OnceLock<Vec<u64>> = OnceLock::new();
    SMALL.get_or_init(|| simple_sieve(1000))
}

/// Plain sieve of all primes up to `n` inclusive.
fn simple_sieve(n: u64) -> Vec<u64> {
    let n = n as usize;
    let mut flags = vec![true; n + 1];
    flags[0] = false;
    if n >= 1 {
        flags[1] = false;
    }
    let mut i = 2usize;
    while i * i <= n {
        if flags[i] {
            let mut j = i * i;
            while j <= n {
                flags[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    (2..=n).filter(|&i| flags[i]).map(|i| i as u64).collect()
}

/// Outcome of a pool allocation attempt. Exhaustion is an ordinary value:
/// the caller reacts by recycling and retrying.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    Allocated(Prime),
    Exhausted,
}

/// A per-level pool of primes with smallest-first allocation and
/// least-recently-used recycling.
///
/// Primes enter the free set by lazy segmented sieving: the pool only
/// sieves ahead when the free set is empty, one segment at a time, so an
/// unbounded range (the backing store's) costs memory proportional to the
/// primes actually handed out.
#[derive(Debug)]
pub struct PrimePool {
    level: Level,
    range: PrimeRange,
    free: BTreeSet<u64>,
    allocated: HashMap<u64, u64>,
    /// Next integer the lazy sieve will start from.
    next_cursor: u64,
    segment: u64,
    use_counter: u64,
}

impl PrimePool {
    pub fn new(level: Level, range: PrimeRange, segment: u64) -> PrimePool {
        PrimePool {
            level,
            range,
            free: BTreeSet::new(),
            allocated: HashMap::new(),
            next_cursor: range.lo.max(2),
            segment: segment.max(2),
            use_counter: 0,
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn range(&self) -> PrimeRange {
        self.range
    }

    pub fn free_len(&self) -> usize {
        self.free.len()
    }

    pub fn allocated_len(&self) -> usize {
        self.allocated.len()
    }

    pub fn is_allocated(&self, p: Prime) -> bool {
        self.allocated.contains_key(&p.get())
    }

    /// True once the whole bounded range has been sieved.
    fn fully_explored(&self) -> bool {
        match self.range.hi {
            Some(hi) => self.next_cursor > hi,
            None => false,
        }
    }

    /// Sieve the next segment of the range into the free set. Returns
    /// false when the range is bounded and already fully explored.
    fn extend(&mut self) -> bool {
        if self.fully_explored() {
            return false;
        }
        let lo = self.next_cursor;
        let hi_cap = lo.saturating_add(self.segment - 1);
        let hi = match self.range.hi {
            Some(range_hi) => hi_cap.min(range_hi),
            None => hi_cap,
        };
        for p in sieve_segment(lo, hi) {
            self.free.insert(p.get());
        }
        self.next_cursor = hi.saturating_add(1);
        true
    }

    /// Take the smallest free prime, extending the sieve as needed.
    pub fn allocate(&mut self) -> Allocation {
        loop {
            if let Some(&p) = self.free.iter().next() {
                self.free.remove(&p);
                self.use_counter += 1;
                self.allocated.insert(p, self.use_counter);
                return Allocation::Allocated(Prime::new_unchecked(p));
            }
            if !self.extend() {
                return Allocation::Exhausted;
            }
        }
    }

    /// Refresh the use ordinal of an allocated prime.
    pub fn touch(&mut self, p: Prime) -> Result<(), PrimeError> {
        match self.allocated.get_mut(&p.get()) {
            Some(ord) => {
                self.use_counter += 1;
                *ord = self.use_counter;
                Ok(())
            }
            None => Err(PrimeError::UnknownPrime(p.get())),
        }
    }

    /// Return the `count` least recently used primes to the free set and
    /// report them so the caller can invalidate dependent state. Ties on
    /// the use ordinal reclaim the smallest prime first. Yields fewer
    /// than `count` when fewer are allocated.
    pub fn recycle_lru(&mut self, count: usize) -> Vec<Prime> {
        let mut by_age: Vec<(u64, u64)> = self
            .allocated
            .iter()
            .map(|(&p, &ord)| (ord, p))
            .collect();
        by_age.sort_unstable();
        by_age.truncate(count);
        let mut reclaimed = Vec::with_capacity(by_age.len());
        for (_, p) in by_age {
            self.allocated.remove(&p);
            self.free.insert(p);
            reclaimed.push(Prime::new_unchecked(p));
        }
        reclaimed
    }

    /// Return one specific prime to the free set (release path).
    pub fn release(&mut self, p: Prime) -> Result<(), PrimeError> {
        match self.allocated.remove(&p.get()) {
            Some(_) => {
                self.free.insert(p.get());
                Ok(())
            }
            None => Err(PrimeError::UnknownPrime(p.get())),
        }
    }
}

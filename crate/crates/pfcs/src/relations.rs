//! Relationship registry and discovery.
//!
//! A relationship group is a set of elements; its identity is the exact
//! product of the members' primes, which is squarefree because members
//! are distinct. Discovery inverts that product by factorization and maps
//! each prime factor back to its element. Unique factorization makes the
//! mapping exact: a composite can only surface the elements whose primes
//! divide it, so discovery has no false positives by construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

use crate::assignment::{AssignmentTable, ElementId, Tick};
use crate::config::StepBudget;
use crate::factorizer::{
    factorize, FactorError, FactorizationCache, Provenance, SpfTable,
};
use crate::primes::Prime;

/// Arbitrary-precision product of distinct element primes.
pub type Composite = BigUint;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RelationError {
    #[error("group arity {got} outside 2..={cap}")]
    ArityViolation { got: usize, cap: usize },
    #[error("member {0} has no assigned prime")]
    UnassignedMember(ElementId),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// One registered group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationGroup {
    pub members: BTreeSet<ElementId>,
    /// Member primes at registration time, ascending. Kept in the group
    /// because purging may run after the element mappings are gone.
    pub primes: Vec<u64>,
    pub composite: Composite,
    pub created_at: Tick,
    /// Registration order, newest groups have the largest sequence.
    seq: u64,
}

/// Registry of relationship groups with a prime-to-composites index.
///
/// The index satisfies: `p` posts to `c` exactly when `p` divides `c`
/// and `c` is registered, so prefetch never factorizes just to find the
/// composites an element participates in.
#[derive(Debug, Default)]
pub struct RelationRegistry {
    groups: HashMap<Composite, RelationGroup>,
    by_prime: HashMap<u64, BTreeSet<Composite>>,
    /// How many registered groups contain each element.
    degree: HashMap<ElementId, usize>,
    arity_cap: usize,
    next_seq: u64,
}

/// Result of mapping a composite back to elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discovery {
    pub members: BTreeSet<ElementId>,
    /// Prime factors with no currently mapped element (possible after
    /// recycling); surfaced rather than silently dropped.
    pub dangling: BTreeSet<u64>,
    /// Mirrors the factorization's completeness.
    pub complete: bool,
    pub provenance: Provenance,
}

impl RelationRegistry {
    pub fn new(arity_cap: usize) -> Self {
        RelationRegistry { arity_cap: arity_cap.max(2), ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn arity_cap(&self) -> usize {
        self.arity_cap
    }

    /// Number of registered groups containing `d`. Exact, not estimated.
    pub fn group_count(&self, d: ElementId) -> usize {
        self.degree.get(&d).copied().unwrap_or(0)
    }

    pub fn group(&self, c: &Composite) -> Option<&RelationGroup> {
        self.groups.get(c)
    }

    /// Register `members` as one relationship group, returning its
    /// composite. Members must be distinct, within the arity cap, and
    /// already hold primes. Registering an identical member set again is
    /// a no-op that returns the existing composite.
    pub fn register_group(
        &mut self,
        table: &AssignmentTable,
        members: &[ElementId],
        now: Tick,
    ) -> Result<Composite, RelationError> {
        let set: BTreeSet<ElementId> = members.iter().copied().collect();
        if set.len() < 2 || set.len() > self.arity_cap || set.len() != members.len() {
            return Err(RelationError::ArityViolation { got: members.len(), cap: self.arity_cap });
        }
        let mut primes = Vec::with_capacity(set.len());
        for &d in &set {
            match table.prime_of(d) {
                Some(p) => primes.push(p.get()),
                None => return Err(RelationError::UnassignedMember(d)),
            }
        }
        primes.sort_unstable();
        let composite: Composite = primes.iter().fold(BigUint::one(), |acc, &p| acc * p);
        if let Some(existing) = self.groups.get(&composite) {
            debug_assert_eq!(existing.members, set);
            return Ok(composite);
        }
        self.next_seq += 1;
        for &p in &primes {
            self.by_prime.entry(p).or_default().insert(composite.clone());
        }
        for &d in &set {
            *self.degree.entry(d).or_insert(0) += 1;
        }
        self.groups.insert(
            composite.clone(),
            RelationGroup {
                members: set,
                primes,
                composite: composite.clone(),
                created_at: now,
                seq: self.next_seq,
            },
        );
        Ok(composite)
    }

    /// Exactly the registered composites divisible by `p`, straight from
    /// the index.
    pub fn related_composites(&self, p: Prime) -> BTreeSet<Composite> {
        self.by_prime.get(&p.get()).cloned().unwrap_or_default()
    }

    /// Registered groups containing `p`, most recently registered first.
    pub fn related_groups_recent_first(&self, p: Prime) -> Vec<&RelationGroup> {
        let mut groups: Vec<&RelationGroup> = self
            .by_prime
            .get(&p.get())
            .into_iter()
            .flatten()
            .map(|c| &self.groups[c])
            .collect();
        groups.sort_by(|a, b| b.seq.cmp(&a.seq));
        groups
    }

    /// Remove every group whose composite is divisible by `p`, from
    /// storage and from all index postings. Returns the removed
    /// composites.
    pub fn purge_prime(&mut self, p: Prime) -> BTreeSet<Composite> {
        let Some(postings) = self.by_prime.remove(&p.get()) else {
            return BTreeSet::new();
        };
        for c in &postings {
            let group = self.groups.remove(c).expect("indexed composite must be stored");
            for &d in &group.members {
                match self.degree.get_mut(&d) {
                    Some(n) if *n > 1 => *n -= 1,
                    _ => {
                        self.degree.remove(&d);
                    }
                }
            }
            for &q in &group.primes {
                if q == p.get() {
                    continue;
                }
                if let Some(set) = self.by_prime.get_mut(&q) {
                    set.remove(c);
                    if set.is_empty() {
                        self.by_prime.remove(&q);
                    }
                }
            }
        }
        postings
    }

    /// All registered composites, in ascending value order.
    pub fn composites(&self) -> Vec<Composite> {
        let mut all: Vec<Composite> = self.groups.keys().cloned().collect();
        all.sort();
        all
    }

    /// Iterate registered groups in registration order.
    pub fn groups_in_registration_order(&self) -> Vec<&RelationGroup> {
        let mut all: Vec<&RelationGroup> = self.groups.values().collect();
        all.sort_by_key(|g| g.seq);
        all
    }
}

/// Factorize `c` and map each prime factor to its element.
///
/// Returns exactly the elements whose primes divide `c`; factors without
/// a live element land in `dangling`. The completeness flag mirrors the
/// factorization's, so a budget too small for `c` yields a partial
/// member set flagged incomplete.
pub fn discover(
    table: &AssignmentTable,
    c: &Composite,
    budget: StepBudget,
    cache: &mut FactorizationCache,
    spf: &SpfTable,
) -> Result<Discovery, RelationError> {
    let outcome = factorize(c, budget, cache, spf)?;
    let mut members = BTreeSet::new();
    let mut dangling = BTreeSet::new();
    for p in &outcome.factorization.factors {
        match table.element_of(*p) {
            Some(d) => {
                members.insert(d);
            }
            None => {
                dangling.insert(p.get());
            }
        }
    }
    Ok(Discovery {
        members,
        dangling,
        complete: outcome.factorization.complete,
        provenance: outcome.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        table: AssignmentTable,
        registry: RelationRegistry,
        cache: FactorizationCache,
        spf: SpfTable,
    }

    /// Elements 0..n bound directly to the given primes.
    fn fixture_with_primes(primes: &[u64]) -> Fixture {
        let mut table = AssignmentTable::new();
        for (i, &p) in primes.iter().enumerate() {
            table.bind_for_tests(ElementId(i as u64), Prime::new(p).unwrap());
        }
        Fixture {
            table,
            registry: RelationRegistry::new(16),
            cache: FactorizationCache::new(256),
            spf: SpfTable::build(),
        }
    }

    fn ids(fix: &Fixture, primes: &[u64]) -> Vec<ElementId> {
        primes
            .iter()
            .map(|&p| fix.table.element_of(Prime::new(p).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn register_computes_exact_products() {
        let mut fix = fixture_with_primes(&[2, 3, 5, 11, 13]);
        let pair = ids(&fix, &[11, 13]);
        let c = fix.registry.register_group(&fix.table, &pair, 1).unwrap();
        assert_eq!(c, BigUint::from(143u32));

        let pair = ids(&fix, &[2, 3]);
        let c = fix.registry.register_group(&fix.table, &pair, 2).unwrap();
        assert_eq!(c, BigUint::from(6u32));

        let triple = ids(&fix, &[2, 3, 5]);
        let c = fix.registry.register_group(&fix.table, &triple, 3).unwrap();
        assert_eq!(c, BigUint::from(30u32));
        assert_eq!(fix.registry.len(), 3);
    }

    #[test]
    fn register_is_idempotent_for_identical_member_sets() {
        let mut fix = fixture_with_primes(&[2, 3]);
        let pair = ids(&fix, &[2, 3]);
        let c1 = fix.registry.register_group(&fix.table, &pair, 1).unwrap();
        let reversed: Vec<ElementId> = pair.iter().rev().copied().collect();
        let c2 = fix.registry.register_group(&fix.table, &reversed, 9).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(fix.registry.len(), 1);
        assert_eq!(fix.registry.group_count(pair[0]), 1);
    }

    #[test]
    fn register_rejects_arity_violations_and_unassigned_members() {
        let mut fix = fixture_with_primes(&[2, 3]);
        let pair = ids(&fix, &[2, 3]);
        assert!(matches!(
            fix.registry.register_group(&fix.table, &pair[..1], 1),
            Err(RelationError::ArityViolation { got: 1, .. })
        ));
        let mut dupes = pair.clone();
        dupes.push(pair[0]);
        assert!(matches!(
            fix.registry.register_group(&fix.table, &dupes, 1),
            Err(RelationError::ArityViolation { .. })
        ));
        assert!(matches!(
            fix.registry.register_group(&fix.table, &[pair[0], ElementId(777)], 1),
            Err(RelationError::UnassignedMember(ElementId(777)))
        ));
        let wide: Vec<ElementId> = (0..20).map(ElementId).collect();
        assert!(matches!(
            fix.registry.register_group(&fix.table, &wide, 1),
            Err(RelationError::ArityViolation { got: 20, .. })
        ));
    }

    #[test]
    fn discover_round_trips_registered_groups() {
        let mut fix = fixture_with_primes(&[2, 3, 11, 13]);
        let pair = ids(&fix, &[11, 13]);
        let c = fix.registry.register_group(&fix.table, &pair, 1).unwrap();
        let found = discover(&fix.table, &c, StepBudget(1_000), &mut fix.cache, &fix.spf).unwrap();
        assert!(found.complete);
        assert!(found.dangling.is_empty());
        assert_eq!(found.members, pair.iter().copied().collect());

        let pair6 = ids(&fix, &[2, 3]);
        let c6 = fix.registry.register_group(&fix.table, &pair6, 2).unwrap();
        let found = discover(&fix.table, &c6, StepBudget(1_000), &mut fix.cache, &fix.spf).unwrap();
        assert_eq!(found.members, pair6.iter().copied().collect());
    }

    #[test]
    fn discover_prime_input_yields_singleton() {
        let mut fix = fixture_with_primes(&[13]);
        let d = ids(&fix, &[13])[0];
        let found = discover(
            &fix.table,
            &BigUint::from(13u32),
            StepBudget(10),
            &mut fix.cache,
            &fix.spf,
        )
        .unwrap();
        assert_eq!(found.members, std::iter::once(d).collect());
        assert!(found.complete);
    }

    #[test]
    fn discover_surfaces_dangling_factors() {
        let mut fix = fixture_with_primes(&[11]);
        // 143 = 11 * 13, but no element holds 13.
        let found = discover(
            &fix.table,
            &BigUint::from(143u32),
            StepBudget(10),
            &mut fix.cache,
            &fix.spf,
        )
        .unwrap();
        assert_eq!(found.dangling, std::iter::once(13u64).collect());
        assert_eq!(found.members.len(), 1);
    }

    #[test]
    fn related_composites_uses_the_index() {
        let mut fix = fixture_with_primes(&[2, 3, 5, 7]);
        let ab = ids(&fix, &[2, 3]);
        let ac = ids(&fix, &[2, 5]);
        fix.registry.register_group(&fix.table, &ab, 1).unwrap();
        fix.registry.register_group(&fix.table, &ac, 2).unwrap();
        let got = fix.registry.related_composites(Prime::new(2).unwrap());
        let want: BTreeSet<Composite> =
            [BigUint::from(6u32), BigUint::from(10u32)].into_iter().collect();
        assert_eq!(got, want);
        assert!(fix.registry.related_composites(Prime::new(7).unwrap()).is_empty());
    }

    #[test]
    fn index_matches_divisibility_scan_oracle() {
        use rand::{Rng, SeedableRng};
        let primes: Vec<u64> = crate::primes::sieve_primes(2, 997)
            .unwrap()
            .iter()
            .map(|p| p.get())
            .collect();
        let mut fix = fixture_with_primes(&primes);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for now in 0..600u64 {
            let arity = rng.gen_range(2..=5usize);
            let mut chosen = BTreeSet::new();
            while chosen.len() < arity {
                chosen.insert(primes[rng.gen_range(0..primes.len())]);
            }
            let members: Vec<ElementId> = chosen
                .iter()
                .map(|&p| fix.table.element_of(Prime::new(p).unwrap()).unwrap())
                .collect();
            fix.registry.register_group(&fix.table, &members, now).unwrap();
        }
        let all = fix.registry.composites();
        for &p in primes.iter().step_by(7) {
            let via_index = fix.registry.related_composites(Prime::new(p).unwrap());
            let via_scan: BTreeSet<Composite> = all
                .iter()
                .filter(|c| (*c % p).is_zero())
                .cloned()
                .collect();
            assert_eq!(via_index, via_scan, "p={p}");
        }
    }

    #[test]
    fn purge_removes_exactly_the_divisible_groups() {
        let mut fix = fixture_with_primes(&[2, 3, 5]);
        let ab = ids(&fix, &[2, 3]);
        let ac = ids(&fix, &[2, 5]);
        let bc = ids(&fix, &[3, 5]);
        fix.registry.register_group(&fix.table, &ab, 1).unwrap();
        fix.registry.register_group(&fix.table, &ac, 2).unwrap();
        fix.registry.register_group(&fix.table, &bc, 3).unwrap();

        let removed = fix.registry.purge_prime(Prime::new(2).unwrap());
        let want: BTreeSet<Composite> =
            [BigUint::from(6u32), BigUint::from(10u32)].into_iter().collect();
        assert_eq!(removed, want);
        assert_eq!(fix.registry.len(), 1);
        assert!(fix.registry.group(&BigUint::from(15u32)).is_some());

        assert!(fix.registry.purge_prime(Prime::new(7919).unwrap()).is_empty());
    }

    #[test]
    fn purge_leaves_no_stale_index_postings() {
        use rand::{Rng, SeedableRng};
        let primes: Vec<u64> = crate::primes::sieve_primes(2, 200)
            .unwrap()
            .iter()
            .map(|p| p.get())
            .collect();
        let mut fix = fixture_with_primes(&primes);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for now in 0..300u64 {
            let arity = rng.gen_range(2..=4usize);
            let mut chosen = BTreeSet::new();
            while chosen.len() < arity {
                chosen.insert(primes[rng.gen_range(0..primes.len())]);
            }
            let members: Vec<ElementId> = chosen
                .iter()
                .map(|&p| fix.table.element_of(Prime::new(p).unwrap()).unwrap())
                .collect();
            fix.registry.register_group(&fix.table, &members, now).unwrap();
        }
        for &p in &[2u64, 13, 97, 199] {
            fix.registry.purge_prime(Prime::new(p).unwrap());
        }
        // Full index audit: every posting points at a stored group that
        // the prime actually divides, and every stored group is fully
        // indexed.
        for (&p, postings) in &fix.registry.by_prime {
            for c in postings {
                assert!((c % p).is_zero(), "posting {p} -> {c} not a divisor");
                assert!(fix.registry.groups.contains_key(c), "dangling posting {p} -> {c}");
            }
        }
        for (c, group) in &fix.registry.groups {
            for &p in &group.primes {
                assert!(
                    fix.registry.by_prime.get(&p).is_some_and(|s| s.contains(c)),
                    "missing posting {p} -> {c}"
                );
            }
        }
    }

    #[test]
    fn registered_composites_are_squarefree() {
        let mut fix = fixture_with_primes(&[2, 3, 5, 7, 11, 13]);
        let members = ids(&fix, &[2, 3, 5, 7, 11, 13]);
        let c = fix.registry.register_group(&fix.table, &members, 1).unwrap();
        let f = factorize(&c, StepBudget(10_000), &mut fix.cache, &fix.spf)
            .unwrap()
            .factorization;
        let mut seen = BTreeSet::new();
        for p in &f.factors {
            assert!(seen.insert(p.get()), "repeated factor {p}");
        }
    }

    #[test]
    fn zero_false_positives_over_random_groups() {
        use rand::{Rng, SeedableRng};
        let primes: Vec<u64> = crate::primes::sieve_primes(2, 997)
            .unwrap()
            .iter()
            .map(|p| p.get())
            .collect();
        let mut fix = fixture_with_primes(&primes);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut registered: Vec<(Composite, BTreeSet<ElementId>)> = Vec::new();
        for now in 0..2_000u64 {
            let arity = rng.gen_range(2..=8usize);
            let mut chosen = BTreeSet::new();
            while chosen.len() < arity {
                chosen.insert(primes[rng.gen_range(0..primes.len())]);
            }
            let members: Vec<ElementId> = chosen
                .iter()
                .map(|&p| fix.table.element_of(Prime::new(p).unwrap()).unwrap())
                .collect();
            let c = fix.registry.register_group(&fix.table, &members, now).unwrap();
            registered.push((c, members.into_iter().collect()));
        }
        for (c, want) in &registered {
            let found =
                discover(&fix.table, c, StepBudget(100_000), &mut fix.cache, &fix.spf).unwrap();
            assert!(found.complete);
            assert!(found.dangling.is_empty());
            assert_eq!(&found.members, want, "composite {c}");
        }
    }
}

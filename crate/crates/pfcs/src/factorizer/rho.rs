//! Brent's cycle-finding variant of Pollard's rho with batched gcd, plus
//! seeded Miller-Rabin for inputs wider than 64 bits.

use num_bigint::BigUint;
use num_integer::{Integer, Roots};
use num_traits::{One, ToPrimitive, Zero};

use crate::config::StepBudget;
use crate::factorizer::rings::{ring_pow, BigRing, ModRing, MontRing};
use crate::primes;

/// Gcd batch size: one gcd per this many rho iterations.
const GCD_BATCH: u64 = 64;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Last-ditch gcd of the accumulated product when the budget runs out.
fn salvage<R: ModRing>(ring: &R, n: &BigUint, q: &R::Elem) -> Option<BigUint> {
    let g = ring.gcd_with_modulus(q);
    (!g.is_one() && g != *n).then_some(g)
}

/// One Brent rho attempt with polynomial x^2 + c, consuming from `steps`.
///
/// Returns a nontrivial divisor of `n`, or `None` when the attempt failed
/// (cycle closed on n itself) or the step budget ran out. Every
/// evaluation of the iteration polynomial costs one step.
fn brent_attempt<R: ModRing>(
    ring: &R,
    n: &BigUint,
    c_raw: u64,
    steps: &mut u64,
) -> Option<BigUint> {
    let c = ring.from_u64(c_raw);
    let step = |y: &R::Elem| -> R::Elem { ring.add(&ring.mul(y, y), &c) };

    let mut y = ring.from_u64(2);
    let mut q = ring.one();
    let mut r: u64 = 1;

    loop {
        let x = y.clone();
        for _ in 0..r {
            if *steps == 0 {
                return salvage(ring, n, &q);
            }
            *steps -= 1;
            y = step(&y);
        }
        let mut k: u64 = 0;
        while k < r {
            let checkpoint = y.clone();
            let lim = GCD_BATCH.min(r - k);
            for _ in 0..lim {
                if *steps == 0 {
                    return salvage(ring, n, &q);
                }
                *steps -= 1;
                y = step(&y);
                q = ring.mul(&q, &ring.sub(&x, &y));
            }
            let g = ring.gcd_with_modulus(&q);
            if !g.is_one() {
                if g != *n {
                    return Some(g);
                }
                // The whole batch collapsed to n; replay it one gcd at a
                // time from the checkpoint to isolate a single factor.
                let mut ys = checkpoint;
                loop {
                    if *steps == 0 {
                        return None;
                    }
                    *steps -= 1;
                    ys = step(&ys);
                    let g = ring.gcd_with_modulus(&ring.sub(&x, &ys));
                    if !g.is_one() {
                        return (g != *n).then_some(g);
                    }
                }
            }
            k += lim;
        }
        r = r.saturating_mul(2);
    }
}

fn run_attempts<R: ModRing>(
    ring: &R,
    n: &BigUint,
    seed: u64,
    steps: &mut u64,
) -> Option<BigUint> {
    let mut c_state = seed;
    let mut attempt = 0u64;
    while *steps > 0 {
        // First few polynomials are the classic small constants; later
        // ones come from the seeded stream.
        let c_raw = match attempt {
            0..=2 => attempt + 1,
            _ => 1 + (splitmix64(&mut c_state) >> 1),
        };
        if let Some(d) = brent_attempt(ring, n, c_raw, steps) {
            return Some(d);
        }
        attempt += 1;
    }
    None
}

/// Budget-threaded rho core: consumes iterations from `steps` so a
/// caller can share one allowance across several cofactors.
pub(crate) fn pollard_rho_budgeted(
    n: &BigUint,
    steps: &mut u64,
    seed: u64,
) -> Option<BigUint> {
    let two = BigUint::from(2u32);
    if n <= &two {
        return None;
    }
    if n.is_even() {
        return Some(two);
    }
    match n.bits() {
        0..=64 => {
            let ring = MontRing::<1>::new(n).expect("odd u64 modulus");
            run_attempts(&ring, n, seed, steps)
        }
        65..=128 => {
            let ring = MontRing::<2>::new(n).expect("odd 2-limb modulus");
            run_attempts(&ring, n, seed, steps)
        }
        129..=192 => {
            let ring = MontRing::<3>::new(n).expect("odd 3-limb modulus");
            run_attempts(&ring, n, seed, steps)
        }
        _ => {
            let ring = BigRing::new(n.clone());
            run_attempts(&ring, n, seed, steps)
        }
    }
}

/// Find one nontrivial divisor of `n` with Pollard's rho (Brent's cycle
/// detection, gcds batched by 64), or `None` on budget exhaustion.
///
/// Deterministic given `(n, budget, seed)`: the polynomial constant
/// cycles through a seed-derived sequence when an attempt fails. Intended
/// for odd composites; even inputs short-circuit to the factor 2 and
/// perfect powers are the caller's job to decompose.
pub fn pollard_rho(n: &BigUint, budget: StepBudget, seed: u64) -> Option<BigUint> {
    let mut steps = budget.steps();
    pollard_rho_budgeted(n, &mut steps, seed)
}

/// Fixed seed for the primality witness stream; primality must be a pure
/// function of the input.
const MR_SEED: u64 = 0x1BAD_B002_5EED_F00D;

/// Witness rounds for moduli wider than 64 bits.
const MR_ROUNDS: usize = 40;

fn random_below(state: &mut u64, bound: &BigUint) -> BigUint {
    let limbs = bound.bits().div_ceil(64) as usize;
    let digits: Vec<u64> = (0..limbs).map(|_| splitmix64(state)).collect();
    let mut v = BigUint::zero();
    for &d in digits.iter().rev() {
        v <<= 64;
        v += d;
    }
    v % bound
}

fn miller_rabin_round<R: ModRing>(
    ring: &R,
    a: &BigUint,
    d: &BigUint,
    s: u64,
    one: &R::Elem,
    minus_one: &R::Elem,
) -> bool {
    let mut x = ring_pow(ring, &ring.from_big(a), d);
    if x == *one || x == *minus_one {
        return true;
    }
    for _ in 1..s {
        x = ring.mul(&x, &x);
        if x == *minus_one {
            return true;
        }
    }
    false
}

fn is_prime_via_ring<R: ModRing>(ring: &R, n: &BigUint) -> bool {
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().expect("n > 2 is odd");
    let d = &n_minus_one >> s;
    let one = ring.one();
    let minus_one = ring.from_big(&n_minus_one);
    let mut state = MR_SEED;
    let three = BigUint::from(3u32);
    for _ in 0..MR_ROUNDS {
        let a = &random_below(&mut state, &(n - &three)) + 2u32;
        if !miller_rabin_round(ring, &a, &d, s, &one, &minus_one) {
            return false;
        }
    }
    true
}

/// Primality for arbitrary-precision inputs: exact deterministic testing
/// up to 64 bits, fixed seeded 40-round Miller-Rabin above.
pub fn is_prime_big(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return primes::is_prime(small);
    }
    if n.is_even() {
        return false;
    }
    match n.bits() {
        0..=128 => is_prime_via_ring(&MontRing::<2>::new(n).expect("odd modulus"), n),
        129..=192 => is_prime_via_ring(&MontRing::<3>::new(n).expect("odd modulus"), n),
        _ => is_prime_via_ring(&BigRing::new(n.clone()), n),
    }
}

/// Decompose a perfect power m = r^k (k ≥ 2, prime), if m is one.
pub(crate) fn perfect_power(m: &BigUint) -> Option<(BigUint, u32)> {
    let bits = m.bits();
    for k in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61] {
        if u64::from(k) > bits {
            break;
        }
        let r = m.nth_root(k);
        if r > BigUint::one() && r.pow(k) == *m {
            return Some((r, k));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u128) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn rho_splits_the_textbook_semiprime() {
        // 8051 = 83 * 97, confirmed by trial division.
        assert_eq!(8051 % 83, 0);
        let d = pollard_rho(&big(8051), StepBudget(10_000), 0).unwrap();
        assert!(d == big(83) || d == big(97), "got {d}");
    }

    #[test]
    fn rho_on_a_prime_finds_nothing() {
        assert_eq!(pollard_rho(&big(104_729), StepBudget(50_000), 0), None);
    }

    #[test]
    fn rho_is_deterministic() {
        let n = big(1_000_003u128 * 1_000_033);
        let a = pollard_rho(&n, StepBudget(100_000), 7);
        let b = pollard_rho(&n, StepBudget(100_000), 7);
        assert_eq!(a, b);
        assert!(a.is_some());
    }

    #[test]
    fn rho_handles_wide_moduli() {
        // (2^61-1) * (2^31-1): both Mersenne primes.
        let n = big((1u128 << 61) - 1) * big((1u128 << 31) - 1);
        let d = pollard_rho(&n, StepBudget(2_000_000), 1).unwrap();
        assert!(d == big((1 << 61) - 1) || d == big((1 << 31) - 1));

        // A 3-limb modulus: product of four 35-bit primes found by the
        // deterministic u64 test.
        let next_prime = |mut v: u64| {
            while !crate::primes::is_prime(v) {
                v += 1;
            }
            v
        };
        let ps: Vec<u64> = [0u64, 100, 10_000, 1_000_000]
            .iter()
            .map(|off| next_prime((1u64 << 35) + 1 + off))
            .collect();
        let n = ps.iter().fold(BigUint::one(), |acc, &p| acc * p);
        assert!(n.bits() > 128);
        let d = pollard_rho(&n, StepBudget(5_000_000), 1).unwrap();
        assert!((&n % &d).is_zero() && d > BigUint::one() && d < n);
    }

    #[test]
    fn rho_budget_exhaustion_returns_none() {
        let n = big(0xFFFF_FFFB_u128 * 0xFFFF_FFEF); // two 32-bit primes
        assert_eq!(pollard_rho(&n, StepBudget(1), 0), None);
    }

    #[test]
    fn is_prime_big_agrees_with_u64_path() {
        for v in [2u64, 3, 4, 997, 1_000_003, 99_991, 10_000_019] {
            assert_eq!(is_prime_big(&BigUint::from(v)), primes::is_prime(v));
        }
    }

    #[test]
    fn is_prime_big_wide_inputs() {
        let m61 = big((1u128 << 61) - 1);
        let m89 = (BigUint::one() << 89u32) - 1u32;
        let m107 = (BigUint::one() << 107u32) - 1u32;
        assert!(is_prime_big(&m89), "2^89-1 is a Mersenne prime");
        assert!(is_prime_big(&m107), "2^107-1 is a Mersenne prime");
        assert!(!is_prime_big(&(&m89 * &m61)));
        assert!(!is_prime_big(&((BigUint::one() << 101u32) - 1u32))); // 2^101-1 composite
    }

    #[test]
    fn perfect_power_detection() {
        let p = big(1_000_003);
        assert_eq!(perfect_power(&(&p * &p)), Some((p.clone(), 2)));
        assert_eq!(perfect_power(&(&p * &p * &p)), Some((p.clone(), 3)));
        assert_eq!(perfect_power(&(&p * big(1_000_033))), None);
        assert_eq!(perfect_power(&big(64)), Some((big(8), 2)));
    }
}

//! Modular arithmetic backends for the factorization inner loops.
//!
//! Rho iterations and Miller-Rabin rounds dominate discovery cost, so
//! moduli up to three 64-bit limbs run on fixed-width Montgomery
//! arithmetic (CIOS reduction, no heap traffic per operation). Wider
//! moduli fall back to plain `BigUint` arithmetic.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

/// A residue ring Z/nZ exposing just what rho and Miller-Rabin need.
///
/// Elements may live in an internal representation (Montgomery form);
/// equality of elements is representation equality, which matches value
/// equality within one ring. `gcd_with_modulus` may see the element up to
/// a unit factor, which leaves the gcd unchanged.
pub(crate) trait ModRing {
    type Elem: Clone + PartialEq;

    fn from_u64(&self, v: u64) -> Self::Elem;
    fn from_big(&self, v: &BigUint) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn gcd_with_modulus(&self, a: &Self::Elem) -> BigUint;
}

/// Square-and-multiply over any ring; `exp` is a plain integer.
pub(crate) fn ring_pow<R: ModRing>(ring: &R, base: &R::Elem, exp: &BigUint) -> R::Elem {
    let mut acc = ring.one();
    let bits = exp.bits();
    for i in (0..bits).rev() {
        acc = ring.mul(&acc, &acc);
        if exp.bit(i) {
            acc = ring.mul(&acc, base);
        }
    }
    acc
}

fn limbs_from_big<const N: usize>(v: &BigUint) -> [u64; N] {
    let digits = v.to_u64_digits();
    debug_assert!(digits.len() <= N);
    let mut out = [0u64; N];
    out[..digits.len()].copy_from_slice(&digits);
    out
}

fn big_from_limbs(limbs: &[u64]) -> BigUint {
    let mut v = BigUint::zero();
    for &limb in limbs.iter().rev() {
        v <<= 64;
        v += limb;
    }
    v
}

/// Fixed-width Montgomery ring over an odd modulus that fits `N` limbs.
pub(crate) struct MontRing<const N: usize> {
    n: [u64; N],
    n_big: BigUint,
    /// -n^{-1} mod 2^64.
    neg_inv: u64,
    /// R^2 mod n where R = 2^(64 N).
    r2: [u64; N],
}

impl<const N: usize> MontRing<N> {
    /// `None` unless `n` is odd, greater than 1, and fits `N` limbs.
    pub(crate) fn new(n: &BigUint) -> Option<Self> {
        if n.is_even() || n <= &BigUint::one() || n.bits() > 64 * N as u64 {
            return None;
        }
        let limbs: [u64; N] = limbs_from_big(n);
        // Newton iteration doubles the number of correct low bits.
        let n0 = limbs[0];
        let mut inv = 1u64;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(n0.wrapping_mul(inv)));
        }
        debug_assert_eq!(n0.wrapping_mul(inv), 1);
        let mut ring = MontRing {
            n: limbs,
            n_big: n.clone(),
            neg_inv: inv.wrapping_neg(),
            r2: [0u64; N],
        };
        // R^2 mod n by 128N modular doublings of 1.
        let mut x = [0u64; N];
        x[0] = 1;
        for _ in 0..(128 * N) {
            x = ring.add_raw(&x, &x);
        }
        ring.r2 = x;
        Some(ring)
    }

    fn ge_n(&self, a: &[u64; N]) -> bool {
        for j in (0..N).rev() {
            if a[j] != self.n[j] {
                return a[j] > self.n[j];
            }
        }
        true
    }

    fn sub_n(&self, a: &mut [u64; N]) -> bool {
        let mut borrow = 0u64;
        for j in 0..N {
            let (d1, b1) = a[j].overflowing_sub(self.n[j]);
            let (d2, b2) = d1.overflowing_sub(borrow);
            a[j] = d2;
            borrow = (b1 | b2) as u64;
        }
        borrow != 0
    }

    fn add_raw(&self, a: &[u64; N], b: &[u64; N]) -> [u64; N] {
        let mut out = [0u64; N];
        let mut carry = 0u64;
        for j in 0..N {
            let acc = a[j] as u128 + b[j] as u128 + carry as u128;
            out[j] = acc as u64;
            carry = (acc >> 64) as u64;
        }
        if carry != 0 || self.ge_n(&out) {
            self.sub_n(&mut out);
        }
        out
    }

    /// CIOS Montgomery multiplication: returns a*b*R^{-1} mod n.
    fn mont_mul(&self, a: &[u64; N], b: &[u64; N]) -> [u64; N] {
        let mut t = [0u64; N];
        let mut t_hi = 0u64;
        let mut t_top = 0u64;
        for i in 0..N {
            let mut carry = 0u64;
            for j in 0..N {
                let acc = t[j] as u128 + a[i] as u128 * b[j] as u128 + carry as u128;
                t[j] = acc as u64;
                carry = (acc >> 64) as u64;
            }
            let (hi, c1) = t_hi.overflowing_add(carry);
            t_hi = hi;
            t_top += c1 as u64;

            let m = t[0].wrapping_mul(self.neg_inv);
            let acc0 = t[0] as u128 + m as u128 * self.n[0] as u128;
            let mut carry = (acc0 >> 64) as u64;
            for j in 1..N {
                let acc = t[j] as u128 + m as u128 * self.n[j] as u128 + carry as u128;
                t[j - 1] = acc as u64;
                carry = (acc >> 64) as u64;
            }
            let (hi, c2) = t_hi.overflowing_add(carry);
            t[N - 1] = hi;
            t_hi = t_top + c2 as u64;
            t_top = 0;
        }
        if t_hi != 0 || self.ge_n(&t) {
            self.sub_n(&mut t);
        }
        t
    }

    fn to_mont(&self, raw: &[u64; N]) -> [u64; N] {
        self.mont_mul(raw, &self.r2)
    }
}

impl<const N: usize> ModRing for MontRing<N> {
    type Elem = [u64; N];

    fn from_u64(&self, v: u64) -> [u64; N] {
        self.from_big(&BigUint::from(v))
    }

    fn from_big(&self, v: &BigUint) -> [u64; N] {
        let reduced = v % &self.n_big;
        self.to_mont(&limbs_from_big(&reduced))
    }

    fn one(&self) -> [u64; N] {
        let mut raw = [0u64; N];
        raw[0] = 1;
        self.to_mont(&raw)
    }

    fn mul(&self, a: &[u64; N], b: &[u64; N]) -> [u64; N] {
        self.mont_mul(a, b)
    }

    fn add(&self, a: &[u64; N], b: &[u64; N]) -> [u64; N] {
        self.add_raw(a, b)
    }

    fn sub(&self, a: &[u64; N], b: &[u64; N]) -> [u64; N] {
        let mut out = *a;
        let mut borrow = 0u64;
        for j in 0..N {
            let (d1, b1) = out[j].overflowing_sub(b[j]);
            let (d2, b2) = d1.overflowing_sub(borrow);
            out[j] = d2;
            borrow = (b1 | b2) as u64;
        }
        if borrow != 0 {
            // Wrap back into range by adding n.
            let mut carry = 0u64;
            for j in 0..N {
                let acc = out[j] as u128 + self.n[j] as u128 + carry as u128;
                out[j] = acc as u64;
                carry = (acc >> 64) as u64;
            }
        }
        out
    }

    fn gcd_with_modulus(&self, a: &[u64; N]) -> BigUint {
        big_from_limbs(a).gcd(&self.n_big)
    }
}

/// Arbitrary-width fallback ring.
pub(crate) struct BigRing {
    n: BigUint,
}

impl BigRing {
    pub(crate) fn new(n: BigUint) -> Self {
        debug_assert!(n > BigUint::one());
        BigRing { n }
    }
}

impl ModRing for BigRing {
    type Elem = BigUint;

    fn from_u64(&self, v: u64) -> BigUint {
        BigUint::from(v) % &self.n
    }

    fn from_big(&self, v: &BigUint) -> BigUint {
        v % &self.n
    }

    fn one(&self) -> BigUint {
        BigUint::one() % &self.n
    }

    fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        a * b % &self.n
    }

    fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if s >= self.n {
            s - &self.n
        } else {
            s
        }
    }

    fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            a + &self.n - b
        }
    }

    fn gcd_with_modulus(&self, a: &BigUint) -> BigUint {
        a.gcd(&self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_big(rng: &mut impl Rng, bits: u64) -> BigUint {
        let limbs = bits.div_ceil(64) as usize;
        let digits: Vec<u64> = (0..limbs).map(|_| rng.gen()).collect();
        let mut v = BigUint::new(Vec::new());
        for &d in digits.iter().rev() {
            v <<= 64;
            v += d;
        }
        v >> (limbs as u64 * 64 - bits)
    }

    fn check_against_biguint<const N: usize>(rng: &mut impl Rng, bits: u64) {
        let mut n = random_big(rng, bits);
        n |= BigUint::one(); // odd
        if n <= BigUint::one() {
            return;
        }
        let ring = MontRing::<N>::new(&n).unwrap();
        let oracle = BigRing::new(n.clone());
        for _ in 0..50 {
            let a = random_big(rng, bits) % &n;
            let b = random_big(rng, bits) % &n;
            let am = ring.from_big(&a);
            let bm = ring.from_big(&b);
            // Multiply out of Montgomery form via a*b*1 lift: compare
            // through a third value to avoid needing from_mont.
            let prod_m = ring.mul(&am, &bm);
            let prod_oracle = oracle.mul(&a, &b);
            assert_eq!(prod_m, ring.from_big(&prod_oracle), "mul mismatch mod {n}");
            let sum_m = ring.add(&am, &bm);
            assert_eq!(sum_m, ring.from_big(&oracle.add(&a, &b)));
            let diff_m = ring.sub(&am, &bm);
            assert_eq!(diff_m, ring.from_big(&oracle.sub(&a, &b)));
        }
    }

    #[test]
    fn montgomery_matches_biguint_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            check_against_biguint::<1>(&mut rng, 63);
            check_against_biguint::<2>(&mut rng, 127);
            check_against_biguint::<3>(&mut rng, 191);
        }
    }

    #[test]
    fn ring_pow_matches_modpow() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let mut n = random_big(&mut rng, 120);
            n |= BigUint::one();
            let ring = MontRing::<2>::new(&n).unwrap();
            let base = random_big(&mut rng, 100) % &n;
            let exp = random_big(&mut rng, 40);
            let got = ring_pow(&ring, &ring.from_big(&base), &exp);
            let want = base.modpow(&exp, &n);
            assert_eq!(got, ring.from_big(&want));
        }
    }

    #[test]
    fn gcd_ignores_montgomery_unit() {
        // gcd(aR mod n, n) == gcd(a, n) because gcd(R, n) = 1 for odd n.
        let n = BigUint::from(3u32 * 5 * 7 * 11 * 13) * BigUint::from(1_000_003u64);
        let ring = MontRing::<2>::new(&n).unwrap();
        let a = BigUint::from(21u32); // shares 21 with n
        let got = ring.gcd_with_modulus(&ring.from_big(&a));
        assert_eq!(got, BigUint::from(21u32));
    }
}

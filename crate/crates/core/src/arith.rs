//! Modular arithmetic substrate: primality, primitive roots, discrete-log and
//! inverse tables for a prime modulus.
//!
//! Everything downstream (characters, Kloosterman sums, moment kernels)
//! coordinates the unit group `(ℤ/qℤ)*` through the discrete log base the
//! smallest primitive root, so the tables here are built once per `q` and
//! shared immutably.

use crate::{Error, Result};

/// Default cap on the modulus; tables are dense arrays of length `q`.
pub const DEFAULT_Q_CAP: u64 = 2_000_000;

/// Dense tables for `(ℤ/qℤ)*`, immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeContext {
    /// Odd prime modulus.
    pub q: u64,
    /// Smallest primitive root mod q.
    pub g: u64,
    /// `ind[n]` = discrete log of n base g, for 1 ≤ n ≤ q−1; `ind[0]` is a sentinel.
    ind: Vec<u32>,
    /// `inv[n]` = n⁻¹ mod q for 1 ≤ n ≤ q−1; `inv[0]` is a sentinel.
    inv: Vec<u32>,
}

const SENTINEL: u32 = u32::MAX;

/// Deterministic Miller–Rabin, valid for all n < 3.3·10¹⁴ with this base set.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17] {
        let mut x = mod_pow(a, d, n);
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

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
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

/// Distinct prime factors by trial division.
pub fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Smallest primitive root of the odd prime q.
///
/// Candidates are tested in increasing order; g generates `(ℤ/qℤ)*` iff
/// `g^((q−1)/p) ≢ 1` for every prime p | q−1.
pub fn find_primitive_root(q: u64) -> Result<u64> {
    if q < 3 || !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    let order = q - 1;
    let factors = distinct_prime_factors(order);
    'candidate: for g in 2..q {
        for &p in &factors {
            if mod_pow(g, order / p, q) == 1 {
                continue 'candidate;
            }
        }
        return Ok(g);
    }
    unreachable!("every odd prime has a primitive root")
}

/// Modular inverse of n mod the odd prime q.
pub fn mod_inverse(n: u64, q: u64) -> Result<u64> {
    if n % q == 0 {
        return Err(Error::NotAUnit(n));
    }
    Ok(mod_pow(n % q, q - 2, q))
}

impl PrimeContext {
    /// Build the tables with the default memory cap.
    pub fn new(q: u64) -> Result<Self> {
        Self::with_cap(q, DEFAULT_Q_CAP)
    }

    /// Build the tables; O(q) time and space.
    pub fn with_cap(q: u64, cap: u64) -> Result<Self> {
        if q > cap {
            return Err(Error::ModulusCap { q, cap });
        }
        let g = find_primitive_root(q)?;
        let mut ind = vec![SENTINEL; q as usize];
        let mut val = 1u64;
        for j in 0..(q - 1) {
            debug_assert_eq!(ind[val as usize], SENTINEL);
            ind[val as usize] = j as u32;
            val = mul_mod(val, g, q);
        }
        debug_assert_eq!(val, 1);

        // inv[n] = -(q/n)·inv[q mod n] mod q, the standard linear-time recurrence.
        let mut inv = vec![SENTINEL; q as usize];
        inv[1] = 1;
        for n in 2..q {
            let r = (q % n) as usize;
            inv[n as usize] = ((q - (q / n) % q) as u128 * inv[r] as u128 % q as u128) as u32;
        }
        Ok(Self { q, g, ind, inv })
    }

    /// Rebuild from raw tables (used by the binary cache after validation).
    pub(crate) fn from_parts(q: u64, g: u64, ind: Vec<u32>, inv: Vec<u32>) -> Self {
        Self { q, g, ind, inv }
    }

    /// Discrete log of n base g; n is reduced mod q and must be a unit.
    #[inline]
    pub fn ind(&self, n: u64) -> Result<u32> {
        let r = (n % self.q) as usize;
        if r == 0 {
            return Err(Error::NotAUnit(n));
        }
        Ok(self.ind[r])
    }

    /// Discrete log of a residue already known to lie in 1..q−1.
    #[inline]
    pub fn ind_unit(&self, r: u64) -> u32 {
        debug_assert!(r >= 1 && r < self.q);
        self.ind[r as usize]
    }

    /// n⁻¹ mod q; n is reduced mod q and must be a unit.
    #[inline]
    pub fn inverse(&self, n: u64) -> Result<u64> {
        let r = (n % self.q) as usize;
        if r == 0 {
            return Err(Error::NotAUnit(n));
        }
        Ok(self.inv[r] as u64)
    }

    /// g^j mod q. O(log j); prefer table walks in hot loops.
    pub fn pow_g(&self, j: u64) -> u64 {
        mod_pow(self.g, j, self.q)
    }

    /// The residue with discrete log j, via one table scan amortized by the
    /// caller: this builds the full inverse permutation.
    pub fn dlog_inverse_permutation(&self) -> Vec<u64> {
        let q = self.q;
        let mut by_dlog = vec![0u64; (q - 1) as usize];
        for r in 1..q {
            by_dlog[self.ind[r as usize] as usize] = r;
        }
        by_dlog
    }

    /// Group order q−1.
    #[inline]
    pub fn order(&self) -> u64 {
        self.q - 1
    }
}

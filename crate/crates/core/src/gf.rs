//! Prime-field arithmetic GF(q) and prime search.
//!
//! Only prime orders are supported; elements are canonical residues in
//! `[0, q)` stored as `u64`. The order is capped at 2^31 - 1 so products
//! never overflow a `u64`.

use crate::error::{Error, Result};

/// Largest supported field order.
pub const MAX_FIELD_ORDER: u64 = (1 << 31) - 1;

/// Arithmetic context for GF(q) with q prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    /// Builds the field of order `q`, verifying primality by trial division.
    pub fn new(q: u64) -> Result<Self> {
        if q > MAX_FIELD_ORDER {
            return Err(Error::FieldTooLarge { q });
        }
        if !is_prime(q) {
            return Err(Error::NotPrime { q });
        }
        Ok(PrimeField { q })
    }

    pub fn order(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        a * b % self.q
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        debug_assert!(a < self.q);
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: u64) -> Result<u64> {
        if a == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(a, self.q - 2))
    }

    /// Square-and-multiply exponentiation.
    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        debug_assert!(base < self.q);
        if self.q == 1 {
            return 0;
        }
        let mut acc = 1u64;
        let mut b = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }
}

/// Trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut f = 3u64;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

/// Least prime p >= x. By Bertrand's postulate p < 2x for x >= 2.
pub fn smallest_prime_at_least(x: u64) -> u64 {
    let mut p = x.max(2);
    while !is_prime(p) {
        p += 1;
    }
    p
}

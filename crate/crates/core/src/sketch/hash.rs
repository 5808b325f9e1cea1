//! Seed-keyed multiply-add-shift hashing.
//!
//! `h(x) = ((a * x + b) mod 2^128) >> 64` with `a, b` uniform 128-bit keys
//! is strongly universal on 64-bit inputs, so buckets and signs derived
//! from it are pairwise independent.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplyShift {
    a: u128,
    b: u128,
}

impl MultiplyShift {
    pub fn new(a: u128, b: u128) -> Self {
        MultiplyShift { a, b }
    }

    pub fn from_rng<R: Rng + ?Sized>(rng: &mut R) -> Self {
        MultiplyShift {
            a: rng.random(),
            b: rng.random(),
        }
    }

    #[inline]
    pub fn hash(&self, x: u64) -> u64 {
        (self.a.wrapping_mul(x as u128).wrapping_add(self.b) >> 64) as u64
    }

    /// Maps into `[0, range)` by multiply-high.
    #[inline]
    pub fn bucket(&self, x: u64, range: usize) -> usize {
        ((self.hash(x) as u128 * range as u128) >> 64) as usize
    }

    /// +1 or -1 from the low output bit.
    #[inline]
    pub fn sign(&self, x: u64) -> f64 {
        if self.hash(x) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

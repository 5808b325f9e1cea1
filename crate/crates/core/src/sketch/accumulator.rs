//! Order-independent accumulation of bucket sums.
//!
//! Each entry keeps its running sum as three integer digits on an absolute
//! binary grid shared by its column: digit `b` counts multiples of
//! `2^(top - 32 (b + 1))`, where `top` is a multiple of 32 above every value
//! the column has received. A deposited value is split top-down into
//! round-to-nearest digits, so its contribution to a given digit does not
//! depend on how many finer digits exist. Raising `top` therefore only
//! shifts digits down and drops the finest one, which is exactly what
//! depositing under the new grid from the start would have produced.
//!
//! Integer digit sums are associative, so the final state is bit-identical
//! for any deposit order and any partition-then-merge schedule. The value
//! read back is the correctly rounded sum of the per-value grid roundings,
//! which keep 96 bits below the column's top.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DIGIT_BITS: i32 = 32;
const DIGITS: usize = 3;
/// Keeps the finest unit `2^(top - 96)` a normal double.
const MIN_TOP: i32 = -896;
/// Keeps the coarsest unit `2^(top - 32)` finite.
const MAX_TOP: i32 = 1024;

#[inline]
fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Smallest admissible top with `|x| < 2^(top - 1)`.
fn top_for(x: f64) -> i32 {
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i32;
    // Subnormals sit below every admissible grid.
    let exp = if biased == 0 { -1023 } else { biased - 1023 };
    let need = exp + 2;
    let top = (need + DIGIT_BITS - 1).div_euclid(DIGIT_BITS) * DIGIT_BITS;
    top.max(MIN_TOP)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactAccumulator {
    rows: usize,
    cols: usize,
    top: Vec<i32>,
    digits: Vec<[i64; DIGITS]>,
}

impl ExactAccumulator {
    pub fn new(rows: usize, cols: usize) -> Self {
        ExactAccumulator {
            rows,
            cols,
            top: vec![MIN_TOP; cols],
            digits: vec![[0; DIGITS]; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Bytes of digit storage, for communication accounting.
    pub fn payload_bytes(&self) -> usize {
        self.digits.len() * DIGITS * 8 + self.top.len() * 4
    }

    fn raise_column(&mut self, col: usize, new_top: i32) {
        let shift = ((new_top - self.top[col]) / DIGIT_BITS) as usize;
        self.top[col] = new_top;
        if shift == 0 {
            return;
        }
        for row in 0..self.rows {
            let cell = &mut self.digits[row * self.cols + col];
            for b in (0..DIGITS).rev() {
                cell[b] = if b >= shift { cell[b - shift] } else { 0 };
            }
        }
    }

    /// Adds `sign * values` to row `row`.
    pub fn deposit_row(&mut self, row: usize, sign: f64, values: &[f64]) -> Result<()> {
        debug_assert_eq!(values.len(), self.cols);
        for (col, &v) in values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let x = sign * v;
            let needed = top_for(x);
            if needed > MAX_TOP {
                return Err(Error::InvalidSpec(format!(
                    "value {x:e} is too large to accumulate exactly"
                )));
            }
            if needed > self.top[col] {
                self.raise_column(col, needed);
            }
            let top = self.top[col];
            let cell = &mut self.digits[row * self.cols + col];
            let mut rest = x;
            for (b, digit) in cell.iter_mut().enumerate() {
                let unit = top - DIGIT_BITS * (b as i32 + 1);
                let q = (rest * pow2(-unit)).round();
                *digit += q as i64;
                rest -= q * pow2(unit);
            }
        }
        Ok(())
    }

    /// Adds `other` into `self`; shapes must match.
    pub fn merge_from(&mut self, other: &ExactAccumulator) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::IncompatibleSketch(format!(
                "accumulator shapes {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        for col in 0..self.cols {
            let top = self.top[col].max(other.top[col]);
            if top > self.top[col] {
                self.raise_column(col, top);
            }
            let shift = ((top - other.top[col]) / DIGIT_BITS) as usize;
            for row in 0..self.rows {
                let idx = row * self.cols + col;
                let src = other.digits[idx];
                let dst = &mut self.digits[idx];
                for b in shift..DIGITS {
                    dst[b] += src[b - shift];
                }
            }
        }
        Ok(())
    }

    /// Reads entry `(row, col)` as a correctly rounded double.
    pub fn value(&self, row: usize, col: usize) -> f64 {
        let cell = self.digits[row * self.cols + col];
        let total = ((cell[0] as i128) << (2 * DIGIT_BITS))
            + ((cell[1] as i128) << DIGIT_BITS)
            + cell[2] as i128;
        (total as f64) * pow2(self.top[col] - DIGIT_BITS * DIGITS as i32)
    }

    /// All entries, row-major, multiplied by `scale`.
    pub fn to_dense(&self, scale: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for row in 0..self.rows {
            for col in 0..self.cols {
                out.push(self.value(row, col) * scale);
            }
        }
        out
    }
}

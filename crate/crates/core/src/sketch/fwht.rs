//! In-place fast Walsh-Hadamard transform.

/// Unnormalized transform: applying it twice multiplies by `buf.len()`.
///
/// Panics unless the length is a power of two (or zero).
pub fn fwht(buf: &mut [f64]) {
    let n = buf.len();
    assert!(n == 0 || n.is_power_of_two(), "FWHT length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// Entry `(row, col)` of the unnormalized Hadamard matrix in Sylvester order.
#[inline]
pub fn hadamard_entry(row: usize, col: usize) -> f64 {
    if (row & col).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

//! Order-independent floating-point summation.
//!
//! Per-entity sums in the solver must not depend on the order edges appear
//! in the input file, or relabeling a network and shuffling its rows would
//! change low-order bits of the scores. [`ExactSum`] keeps the running sum
//! as a list of non-overlapping partials whose total is exact, and rounds
//! once at the end. The rounded result is a function of the multiset of
//! inputs only, so any accumulation order yields identical bits.
//!
//! The partial-tracking scheme and the final half-even correction mirror
//! the classic `fsum` construction for IEEE floats.

use crate::scalar::{two, Real};

/// Exact accumulator for IEEE floats.
#[derive(Debug, Clone)]
pub struct ExactSum<S> {
    partials: Vec<S>,
}

impl<S: Real> Default for ExactSum<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> ExactSum<S> {
    pub fn new() -> Self {
        Self {
            partials: Vec::with_capacity(4),
        }
    }

    /// Adds one term. The list of partials stays non-overlapping and sums
    /// to the exact (infinitely precise) total of everything added so far.
    pub fn add(&mut self, mut x: S) {
        let zero = S::zero();
        let mut keep = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != zero {
                self.partials[keep] = lo;
                keep += 1;
            }
            x = hi;
        }
        self.partials.truncate(keep);
        self.partials.push(x);
    }

    /// Rounds the exact total to the nearest representable value,
    /// breaking the halfway case to even.
    pub fn value(&self) -> S {
        let zero = S::zero();
        let n = self.partials.len();
        if n == 0 {
            return zero;
        }
        let mut j = n - 1;
        let mut hi = self.partials[j];
        let mut lo = zero;
        while j > 0 {
            let x = hi;
            let y = self.partials[j - 1];
            j -= 1;
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != zero {
                break;
            }
        }
        // The discarded low part may sit exactly on a rounding boundary;
        // nudge toward the remaining partials' sign to round correctly.
        if j > 0 && ((lo < zero && self.partials[j - 1] < zero) || (lo > zero && self.partials[j - 1] > zero)) {
            let y = lo * two::<S>();
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

/// Correctly rounded sum of the given terms.
pub fn exact_sum<S: Real, I: IntoIterator<Item = S>>(values: I) -> S {
    let mut acc = ExactSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(exact_sum::<f64, _>(std::iter::empty()), 0.0);
    }

    #[test]
    fn cancellation_is_exact() {
        assert_eq!(exact_sum([1e16, 1.0, -1e16]), 1.0);
        assert_eq!(exact_sum([1e100, 1.0, -1e100, 0.5]), 1.5);
    }

    #[test]
    fn tenths_sum_correctly_rounded() {
        // the exact total of ten f64 0.1s rounds to 1.0 exactly, unlike
        // the naive left-to-right sum
        let naive: f64 = std::iter::repeat_n(0.1f64, 10).sum();
        assert_eq!(naive, 0.9999999999999999);
        assert_eq!(exact_sum(std::iter::repeat_n(0.1f64, 10)), 1.0);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut xs in proptest::collection::vec(-1.0f64..1.0, 0..60), seed in any::<u64>()) {
            let forward = exact_sum(xs.iter().copied());
            // deterministic shuffle from the seed
            let mut s = seed;
            for i in (1..xs.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % (i + 1);
                xs.swap(i, j);
            }
            let shuffled = exact_sum(xs.iter().copied());
            prop_assert_eq!(forward.to_bits(), shuffled.to_bits());
        }

        #[test]
        fn close_to_naive(xs in proptest::collection::vec(-1.0f64..1.0, 0..60)) {
            let naive: f64 = xs.iter().sum();
            let exact = exact_sum(xs.iter().copied());
            prop_assert!((naive - exact).abs() <= 1e-12 * (1.0 + naive.abs()));
        }
    }
}

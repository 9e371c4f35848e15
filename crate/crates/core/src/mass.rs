//! Fixed-point cell mass.
//!
//! Weights are converted once to an unsigned 64.64 fixed-point integer and all
//! further accumulation is integer addition. Addition is therefore associative
//! and commutative, so a table built from shuffled records or from shards
//! counted in any order is bit-identical. Unit weights are represented
//! exactly; the resolution for fractional weights is 2^-64.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

const FRAC_BITS: i32 = 64;
const SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Largest single weight accepted (2^62).
pub const MAX_WEIGHT: f64 = 4_611_686_018_427_387_904.0;

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mass(u128);

impl Mass {
    pub const ZERO: Mass = Mass(0);

    /// Converts a weight; `None` when it is negative, non-finite or above [`MAX_WEIGHT`].
    pub fn from_weight(weight: f64) -> Option<Mass> {
        if !weight.is_finite() || !(0.0..=MAX_WEIGHT).contains(&weight) {
            return None;
        }
        // Multiplying by a power of two is exact; the cast truncates.
        Some(Mass((weight * SCALE) as u128))
    }

    pub fn from_count(count: u64) -> Mass {
        Mass(u128::from(count) << FRAC_BITS)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, other: Mass) -> Option<Mass> {
        self.0.checked_add(other.0).map(Mass)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }
}

impl Add for Mass {
    type Output = Mass;

    fn add(self, rhs: Mass) -> Mass {
        Mass(self.0 + rhs.0)
    }
}

impl AddAssign for Mass {
    fn add_assign(&mut self, rhs: Mass) {
        self.0 += rhs.0;
    }
}

impl Sum for Mass {
    fn sum<I: Iterator<Item = Mass>>(iter: I) -> Mass {
        iter.fold(Mass::ZERO, Add::add)
    }
}

impl fmt::Debug for Mass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mass({})", self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_weights_are_exact() {
        let m: Mass = (0..1000).map(|_| Mass::from_weight(1.0).unwrap()).sum();
        assert_eq!(m, Mass::from_count(1000));
        assert_eq!(m.to_f64(), 1000.0);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(Mass::from_weight(-0.5).is_none());
        assert!(Mass::from_weight(f64::NAN).is_none());
        assert!(Mass::from_weight(f64::INFINITY).is_none());
        assert!(Mass::from_weight(MAX_WEIGHT * 2.0).is_none());
        assert!(Mass::from_weight(0.0).unwrap().is_zero());
    }

    #[test]
    fn fractional_sum_is_order_independent() {
        let w = [0.1, 0.7, 1e-3, 123.456, 0.3333];
        let fwd: Mass = w.iter().map(|&x| Mass::from_weight(x).unwrap()).sum();
        let rev: Mass = w.iter().rev().map(|&x| Mass::from_weight(x).unwrap()).sum();
        assert_eq!(fwd, rev);
        assert!((fwd.to_f64() - w.iter().sum::<f64>()).abs() < 1e-12);
    }
}

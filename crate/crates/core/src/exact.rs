//! Exact arithmetic backend.
//!
//! Matching matrices only ever contain `0`, `1/2` and `1`, so every window
//! product, continuous load and rounding residual is a dyadic rational
//! `m / 2^k`. [`Dyadic`] represents those exactly and is closed under the
//! operations the engines need (sum, difference, product, halving).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Ratio;

/// Numeric type usable in dense matrices and continuous loads.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Send
    + Sync
{
    fn zero() -> Self;
    fn one() -> Self;
    fn half(&self) -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    #[inline(always)]
    fn zero() -> Self {
        0.0
    }
    #[inline(always)]
    fn one() -> Self {
        1.0
    }
    #[inline(always)]
    fn half(&self) -> Self {
        self * 0.5
    }
    #[inline(always)]
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    #[inline(always)]
    fn to_f64(&self) -> f64 {
        *self
    }
}

/// Exact dyadic rational `num / 2^exp`, kept in lowest terms.
///
/// Arithmetic panics on `i128` overflow; at the sizes this backend is meant
/// for (n ≤ 16, ≤ 64 rounds, loads well below 2^40) that never happens.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dyadic {
    num: i128,
    exp: u32,
}

fn shl_exact(x: i128, s: u32) -> i128 {
    if x == 0 {
        return 0;
    }
    assert!(s < 127, "dyadic overflow: shift by {s}");
    let r = x << s;
    assert!(r >> s == x, "dyadic overflow: {x} << {s}");
    r
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };
    pub const HALF: Dyadic = Dyadic { num: 1, exp: 1 };

    /// `num / 2^exp`, normalised.
    pub fn new(num: i128, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.normalize();
        d
    }

    pub fn from_int(v: i128) -> Self {
        Dyadic { num: v, exp: 0 }
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    /// Power of two in the denominator.
    pub fn exponent(&self) -> u32 {
        self.exp
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    /// Both numerators brought to the larger exponent.
    fn aligned(self, other: Self) -> (i128, i128, u32) {
        let e = self.exp.max(other.exp);
        (
            shl_exact(self.num, e - self.exp),
            shl_exact(other.num, e - other.exp),
            e,
        )
    }

    pub fn abs(self) -> Self {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_ratio(&self) -> Ratio<i128> {
        Ratio::new(self.num, shl_exact(1, self.exp))
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Self) -> Self {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a.checked_add(b).expect("dyadic overflow in add"), e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Self) -> Self {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a.checked_sub(b).expect("dyadic overflow in sub"), e)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        let num = self
            .num
            .checked_mul(rhs.num)
            .expect("dyadic overflow in mul");
        Dyadic::new(num, self.exp + rhs.exp)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Self {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

impl serde::Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.to_ratio())
    }
}

impl Scalar for Dyadic {
    fn zero() -> Self {
        Dyadic::ZERO
    }
    fn one() -> Self {
        Dyadic::ONE
    }
    fn half(&self) -> Self {
        Dyadic::new(self.num, self.exp + 1)
    }
    fn from_i64(v: i64) -> Self {
        Dyadic::from_int(v as i128)
    }
    fn to_f64(&self) -> f64 {
        self.num as f64 / 2f64.powi(self.exp as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalises() {
        assert_eq!(Dyadic::new(4, 3), Dyadic::new(1, 1));
        assert_eq!(Dyadic::new(0, 9), Dyadic::ZERO);
        assert_eq!(Dyadic::new(6, 0).exponent(), 0);
    }

    #[test]
    fn halving_and_sums() {
        let q = Dyadic::ONE.half().half();
        assert_eq!(q + q + q + q, Dyadic::ONE);
        assert_eq!(Dyadic::ONE - Dyadic::HALF, Dyadic::HALF);
        assert_eq!(Dyadic::HALF * Dyadic::HALF, q);
        assert!(q < Dyadic::HALF);
        assert!(-q < Dyadic::ZERO);
    }

    #[test]
    fn ratio_conversion() {
        assert_eq!(Dyadic::new(3, 2).to_ratio(), Ratio::new(3, 4));
    }

    fn small() -> impl Strategy<Value = Dyadic> {
        (-1000i128..1000, 0u32..20).prop_map(|(n, e)| Dyadic::new(n, e))
    }

    proptest! {
        #[test]
        fn agrees_with_ratio(a in small(), b in small()) {
            prop_assert_eq!((a + b).to_ratio(), a.to_ratio() + b.to_ratio());
            prop_assert_eq!((a - b).to_ratio(), a.to_ratio() - b.to_ratio());
            prop_assert_eq!((a * b).to_ratio(), a.to_ratio() * b.to_ratio());
            prop_assert_eq!(a.cmp(&b), a.to_ratio().cmp(&b.to_ratio()));
        }
    }
}

//! Exact nonnegative dyadic rationals and the `lognorm` scale.
//!
//! Every probability mass the crate manipulates is of the form `n / 2^e`.
//! Values are kept in canonical form (odd numerator, or zero with exponent
//! zero) so that derived `Eq`/`Hash` are value-based.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nonnegative rational with a power-of-two denominator.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    numerator: BigUint,
    exponent: u32,
}

impl Dyadic {
    pub fn new(numerator: impl Into<BigUint>, exponent: u32) -> Self {
        let mut d = Dyadic {
            numerator: numerator.into(),
            exponent,
        };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic {
            numerator: BigUint::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic {
            numerator: BigUint::one(),
            exponent: 0,
        }
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u32) -> Self {
        Dyadic {
            numerator: BigUint::one(),
            exponent: k,
        }
    }

    /// `2^k`.
    pub fn pow2(k: u32) -> Self {
        Dyadic {
            numerator: BigUint::one() << k,
            exponent: 0,
        }
    }

    pub fn from_u64(n: u64) -> Self {
        Dyadic::new(BigUint::from(n), 0)
    }

    fn normalize(&mut self) {
        if self.numerator.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0);
        let shift = tz.min(self.exponent as u64) as u32;
        if shift > 0 {
            self.numerator >>= shift;
            self.exponent -= shift;
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    /// Numerator when the value is written over `2^exp`; `None` if `exp`
    /// is too small to represent the value exactly.
    pub fn scaled_numerator(&self, exp: u32) -> Option<BigUint> {
        if exp < self.exponent {
            return None;
        }
        Some(&self.numerator << (exp - self.exponent))
    }

    /// Multiply by `2^-k`.
    pub fn shr(&self, k: u32) -> Self {
        Dyadic::new(self.numerator.clone(), self.exponent + k)
    }

    /// Multiply by `2^k`.
    pub fn shl(&self, k: u32) -> Self {
        let drop = k.min(self.exponent);
        Dyadic::new(&self.numerator << (k - drop), self.exponent - drop)
    }

    /// Difference `self - other`; errors if it would be negative.
    pub fn checked_sub(&self, other: &Dyadic) -> Result<Dyadic> {
        let e = self.exponent.max(other.exponent);
        let a = self.scaled_numerator(e).unwrap();
        let b = other.scaled_numerator(e).unwrap();
        if a < b {
            return Err(Error::NegativeDyadic);
        }
        Ok(Dyadic::new(a - b, e))
    }

    pub fn min(&self, other: &Dyadic) -> Dyadic {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn max(&self, other: &Dyadic) -> Dyadic {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.numerator.clone()),
            BigInt::from(BigUint::one() << self.exponent),
        )
    }

    /// Converts an exact rational that happens to be dyadic and nonnegative.
    pub fn from_rational(r: &BigRational) -> Option<Dyadic> {
        let (n, d) = (r.numer(), r.denom());
        if n.sign() == num_bigint::Sign::Minus {
            return None;
        }
        let d = d.to_biguint()?;
        let tz = d.trailing_zeros().unwrap_or(0);
        if d != (BigUint::one() << tz) {
            return None;
        }
        Some(Dyadic::new(n.to_biguint()?, tz as u32))
    }

    /// Smallest integer `>= self`.
    pub fn ceil(&self) -> BigUint {
        let q = &self.numerator >> self.exponent;
        if (&q << self.exponent) == self.numerator {
            q
        } else {
            q + 1u32
        }
    }

    /// Lossy conversion for display only.
    pub fn to_f64(&self) -> f64 {
        let n = self.numerator.to_f64().unwrap_or(f64::INFINITY);
        n * (-(self.exponent as f64)).exp2()
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exponent.max(other.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &other.numerator << (e - other.exponent);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exponent.max(rhs.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &rhs.numerator << (e - rhs.exponent);
        Dyadic::new(a + b, e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

/// Saturating at zero is never wanted in invariant code, so `-` panics on
/// underflow; use [`Dyadic::checked_sub`] where negativity is possible.
impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self.checked_sub(rhs).expect("dyadic subtraction underflow")
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(
            &self.numerator * &rhs.numerator,
            self.exponent + rhs.exponent,
        )
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl<'a> Sum<&'a Dyadic> for Dyadic {
    fn sum<I: Iterator<Item = &'a Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |acc, x| &acc + x)
    }
}

impl Sum<Dyadic> for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |acc, x| &acc + &x)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.exponent)
        }
    }
}

/// Integer extended with both infinities.
///
/// `PosInf` is the sentinel for "no mass yet" complexities and for tests that
/// blow up on a zero-mass prefix; `NegInf` marks an empty test sum (`⌈0⌉`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtInt {
    NegInf,
    Finite(i64),
    PosInf,
}

impl ExtInt {
    pub fn finite(self) -> Option<i64> {
        match self {
            ExtInt::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtInt::Finite(_))
    }

    /// Sum; `None` for the indeterminate `+∞ + −∞`.
    pub fn add(self, other: ExtInt) -> Option<ExtInt> {
        use ExtInt::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(Finite(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => None,
            (PosInf, _) | (_, PosInf) => Some(PosInf),
            (NegInf, _) | (_, NegInf) => Some(NegInf),
        }
    }

    pub fn neg(self) -> ExtInt {
        match self {
            ExtInt::NegInf => ExtInt::PosInf,
            ExtInt::PosInf => ExtInt::NegInf,
            ExtInt::Finite(v) => ExtInt::Finite(-v),
        }
    }

    pub fn sub(self, other: ExtInt) -> Option<ExtInt> {
        self.add(other.neg())
    }
}

impl fmt::Display for ExtInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtInt::NegInf => write!(f, "-inf"),
            ExtInt::PosInf => write!(f, "inf"),
            ExtInt::Finite(v) => write!(f, "{}", v),
        }
    }
}

/// Smallest `c` with `2^c >= v`, for `v > 0`.
fn ceil_log2_biguint(v: &BigUint) -> i64 {
    let bits = v.bits() as i64;
    if v.count_ones() == 1 {
        bits - 1
    } else {
        bits
    }
}

/// `⌈log₂ a⌉` for a positive dyadic, computed from the bit length.
pub fn ceil_log2(a: &Dyadic) -> Result<i64> {
    if a.is_zero() {
        return Err(Error::UndefinedLognorm);
    }
    Ok(ceil_log2_biguint(a.numerator()) - a.exponent() as i64)
}

/// `‖a‖ = |⌈log₂ a⌉ − 1|`.
pub fn lognorm(a: &Dyadic) -> Result<u64> {
    Ok((ceil_log2(a)? - 1).unsigned_abs())
}

/// `lognorm` on a positive integer.
pub fn lognorm_int(a: &BigUint) -> Result<u64> {
    if a.is_zero() {
        return Err(Error::UndefinedLognorm);
    }
    Ok((ceil_log2_biguint(a) - 1).unsigned_abs())
}

/// `lognorm` mapped onto [`ExtInt`], with zero mass giving `+∞`.
pub fn lognorm_ext(a: &Dyadic) -> ExtInt {
    match lognorm(a) {
        Ok(v) => ExtInt::Finite(v as i64),
        Err(_) => ExtInt::PosInf,
    }
}

/// Smallest integer `>= r` for a nonnegative rational.
pub fn ceil_rational(r: &BigRational) -> BigUint {
    let c = r.ceil().to_integer();
    c.to_biguint().unwrap_or_default()
}

/// The rarity scale `‖⌈T⌉‖ − 2`, with `T = 0` giving `−∞`.
pub fn rarity_of(t: &BigRational) -> ExtInt {
    let c = ceil_rational(t);
    match lognorm_int(&c) {
        Ok(v) => ExtInt::Finite(v as i64 - 2),
        Err(_) => ExtInt::NegInf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(n: u64, e: u32) -> Dyadic {
        Dyadic::new(BigUint::from(n), e)
    }

    #[test]
    fn value_equality() {
        assert_eq!(d(1, 1), d(2, 2));
        assert_eq!(d(0, 5), Dyadic::zero());
        assert!(d(3, 2) > d(1, 1));
    }

    #[test]
    fn lognorm_examples() {
        assert_eq!(lognorm(&Dyadic::one()).unwrap(), 1);
        assert_eq!(lognorm(&d(1, 3)).unwrap(), 4);
        assert_eq!(lognorm(&d(3, 2)).unwrap(), 1);
        assert!(matches!(lognorm(&Dyadic::zero()), Err(Error::UndefinedLognorm)));
        assert_eq!(lognorm_ext(&Dyadic::zero()), ExtInt::PosInf);
    }

    /// Bit-length oracle: ⌈log₂(n/2^e)⌉ is the least c with n <= 2^(c+e).
    fn ceil_log2_oracle(n: u64, e: u32) -> i64 {
        let mut c: i64 = -(e as i64) - 1;
        loop {
            c += 1;
            let shift = c + e as i64;
            if shift >= 0 && (n as u128) <= (1u128 << shift) {
                return c;
            }
        }
    }

    #[test]
    fn ceil_log2_matches_oracle() {
        for n in 1..300u64 {
            for e in 0..10 {
                assert_eq!(ceil_log2(&d(n, e)).unwrap(), ceil_log2_oracle(n, e), "{n}/2^{e}");
            }
        }
    }

    #[test]
    fn ceil_and_rarity() {
        assert_eq!(d(5, 2).ceil(), BigUint::from(2u32));
        assert_eq!(d(8, 0).ceil(), BigUint::from(8u32));
        let r = |n: i64| BigRational::from_integer(BigInt::from(n));
        assert_eq!(rarity_of(&r(1)), ExtInt::Finite(-1));
        assert_eq!(rarity_of(&r(8)), ExtInt::Finite(0));
        assert_eq!(rarity_of(&r(0)), ExtInt::NegInf);
    }

    #[test]
    fn ext_int_arithmetic() {
        use ExtInt::*;
        assert_eq!(Finite(3).sub(Finite(5)), Some(Finite(-2)));
        assert_eq!(PosInf.add(Finite(1)), Some(PosInf));
        assert_eq!(PosInf.sub(PosInf), None);
        assert!(NegInf < Finite(i64::MIN) && Finite(i64::MAX) < PosInf);
    }

    #[test]
    fn rational_round_trip() {
        let x = d(13, 7);
        assert_eq!(Dyadic::from_rational(&x.to_rational()), Some(x));
        let third = BigRational::new(BigInt::from(1), BigInt::from(3));
        assert_eq!(Dyadic::from_rational(&third), None);
    }

    proptest! {
        #[test]
        fn add_sub_round_trip(a in 0u64..1_000_000, ea in 0u32..40, b in 0u64..1_000_000, eb in 0u32..40) {
            let (a, b) = (d(a, ea), d(b, eb));
            prop_assert_eq!(&(&a + &b) - &b, a.clone());
            prop_assert_eq!(&a + &b, &b + &a);
        }

        #[test]
        fn powers_of_two(k in 0u32..200) {
            prop_assert_eq!(lognorm(&Dyadic::pow2_neg(k)).unwrap(), k as u64 + 1);
            prop_assert_eq!(lognorm(&Dyadic::pow2(k)).unwrap(), (k as i64 - 1).unsigned_abs());
            prop_assert_eq!(Dyadic::pow2_neg(k).shl(k), Dyadic::one());
        }

        #[test]
        fn mul_by_power_is_shift(a in 0u64..1_000_000, e in 0u32..30, k in 0u32..30) {
            let x = d(a, e);
            prop_assert_eq!(&x * &Dyadic::pow2_neg(k), x.shr(k));
        }
    }
}

//! Exact dyadic rationals (`numerator / 2^exponent`) and exact decimal inputs.
//!
//! Every continuous load in the simulator is a sum of halvings of integer
//! initial loads, so the dyadic rationals are closed under everything the
//! algorithms do. Comparisons are exact, which lets the metric checks assert
//! inequalities with zero tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors produced when parsing exact numeric text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumberError {
    #[error("`{0}` is not a decimal number")]
    Malformed(String),
    #[error("`{0}` is not a dyadic rational (denominator must be a power of two)")]
    NotDyadic(String),
    #[error("`{0}` must be non-negative")]
    Negative(String),
}

/// An exact rational whose denominator is a power of two.
///
/// Canonical form: the numerator is odd, or the exponent is zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    numerator: BigInt,
    exponent: u32,
}

impl Dyadic {
    pub fn new(numerator: impl Into<BigInt>, exponent: u32) -> Self {
        let mut d = Dyadic { numerator: numerator.into(), exponent };
        d.canonicalize();
        d
    }

    pub fn zero() -> Self {
        Dyadic { numerator: BigInt::zero(), exponent: 0 }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        Dyadic { numerator: v.into(), exponent: 0 }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    fn canonicalize(&mut self) {
        if self.numerator.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0);
        let shift = tz.min(u64::from(self.exponent)) as u32;
        if shift > 0 {
            self.numerator >>= shift;
            self.exponent -= shift;
        }
    }

    /// Numerators of `self` and `other` scaled to a shared exponent.
    fn aligned(&self, other: &Dyadic) -> (BigInt, BigInt, u32) {
        match self.exponent.cmp(&other.exponent) {
            Ordering::Equal => (self.numerator.clone(), other.numerator.clone(), self.exponent),
            Ordering::Less => (
                &self.numerator << (other.exponent - self.exponent),
                other.numerator.clone(),
                other.exponent,
            ),
            Ordering::Greater => (
                self.numerator.clone(),
                &other.numerator << (self.exponent - other.exponent),
                self.exponent,
            ),
        }
    }

    pub fn half(&self) -> Dyadic {
        if self.numerator.is_zero() {
            return Dyadic::zero();
        }
        let mut d = Dyadic { numerator: self.numerator.clone(), exponent: self.exponent + 1 };
        d.canonicalize();
        d
    }

    /// `(a + b) / 2`, exactly.
    pub fn half_sum(a: &Dyadic, b: &Dyadic) -> Dyadic {
        (a + b).half()
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { numerator: self.numerator.abs(), exponent: self.exponent }
    }

    /// `|a - b|`
    pub fn abs_diff(a: &Dyadic, b: &Dyadic) -> Dyadic {
        (a - b).abs()
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.numerator.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.exponent == 0
    }

    pub fn to_integer(&self) -> Option<BigInt> {
        self.is_integer().then(|| self.numerator.clone())
    }

    /// `⌊self⌋`
    pub fn floor(&self) -> BigInt {
        if self.exponent == 0 {
            self.numerator.clone()
        } else {
            // Arithmetic shift on BigInt rounds toward negative infinity.
            &self.numerator >> self.exponent
        }
    }

    pub fn mul_int(&self, k: &BigInt) -> Dyadic {
        Dyadic::new(&self.numerator * k, self.exponent)
    }

    /// Multiply by `2^shift`.
    pub fn shl(&self, shift: u32) -> Dyadic {
        if shift <= self.exponent {
            Dyadic { numerator: self.numerator.clone(), exponent: self.exponent - shift }
        } else {
            Dyadic { numerator: &self.numerator << (shift - self.exponent), exponent: 0 }
        }
    }

    /// Euclidean decomposition `self = q * unit + r` with `0 <= r < unit`.
    ///
    /// Panics if `unit` is not strictly positive.
    pub fn div_rem_euclid(&self, unit: &Dyadic) -> (BigInt, Dyadic) {
        assert!(unit.numerator.is_positive(), "unit must be positive");
        let (a, b, e) = self.aligned(unit);
        let (q, r) = a.div_mod_floor(&b);
        (q, Dyadic::new(r, e))
    }

    pub fn to_f64(&self) -> f64 {
        let (mant, exp) = big_to_f64_parts(&self.numerator);
        mant * 2f64.powi(exp - self.exponent as i32)
    }

    /// Sum of an iterator of dyadics, exactly.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a Dyadic>) -> Dyadic {
        let mut acc = Dyadic::zero();
        for d in items {
            acc += d;
        }
        acc
    }

    /// Exact decimal rendering. Every dyadic has a finite decimal expansion.
    pub fn to_decimal_string(&self) -> String {
        if self.exponent == 0 {
            return self.numerator.to_string();
        }
        // n / 2^e == n * 5^e / 10^e
        let scaled = self.numerator.abs() * BigInt::from(5u32).pow(self.exponent);
        let digits = scaled.to_string();
        let e = self.exponent as usize;
        let (int_part, frac_part) = if digits.len() > e {
            let split = digits.len() - e;
            (digits[..split].to_string(), digits[split..].to_string())
        } else {
            ("0".to_string(), format!("{}{}", "0".repeat(e - digits.len()), digits))
        };
        let sign = if self.numerator.is_negative() { "-" } else { "" };
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// Split a big integer into an f64 mantissa and a power-of-two exponent so
/// that very large numerators don't overflow on conversion.
fn big_to_f64_parts(v: &BigInt) -> (f64, i32) {
    let bits = v.bits();
    if bits <= 1000 {
        return (v.to_f64().unwrap_or(0.0), 0);
    }
    let shift = bits - 64;
    let top = v >> shift;
    (top.to_f64().unwrap_or(0.0), shift as i32)
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl From<i64> for Dyadic {
    fn from(v: i64) -> Self {
        Dyadic::from_int(v)
    }
}

impl From<u64> for Dyadic {
    fn from(v: u64) -> Self {
        Dyadic::from_int(v)
    }
}

impl From<BigInt> for Dyadic {
    fn from(v: BigInt) -> Self {
        Dyadic::from_int(v)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.exponent == other.exponent {
            return self.numerator.cmp(&other.numerator);
        }
        // Sign check first avoids the shift for the common mixed-sign case.
        match (self.numerator.sign(), other.numerator.sign()) {
            (a, b) if a != b => return sign_rank(a).cmp(&sign_rank(b)),
            _ => {}
        }
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

fn sign_rank(s: Sign) -> i8 {
    match s {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add<&Dyadic> for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        if self.exponent == 0 && rhs.exponent == 0 {
            return Dyadic { numerator: &self.numerator + &rhs.numerator, exponent: 0 };
        }
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a + b, e)
    }
}

impl Sub<&Dyadic> for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        if self.exponent == 0 && rhs.exponent == 0 {
            return Dyadic { numerator: &self.numerator - &rhs.numerator, exponent: 0 };
        }
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a - b, e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl AddAssign<&Dyadic> for Dyadic {
    fn add_assign(&mut self, rhs: &Dyadic) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Dyadic> for Dyadic {
    fn sub_assign(&mut self, rhs: &Dyadic) {
        *self = &*self - rhs;
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { numerator: -self.numerator, exponent: self.exponent }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.exponent)
        }
    }
}

impl FromStr for Dyadic {
    type Err = NumberError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExactDecimal::from_str(s)?
            .to_dyadic()
            .ok_or_else(|| NumberError::NotDyadic(s.to_string()))
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal_string())
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An exact decimal `mantissa / 10^scale`, parsed from text without going
/// through binary floating point.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactDecimal {
    mantissa: BigInt,
    scale: u32,
}

impl ExactDecimal {
    pub fn from_int(v: impl Into<BigInt>) -> Self {
        ExactDecimal { mantissa: v.into(), scale: 0 }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.scale == 0
    }

    fn denominator(&self) -> BigInt {
        BigInt::from(10u32).pow(self.scale)
    }

    /// `⌊self⌋`
    pub fn floor(&self) -> BigInt {
        self.mantissa.div_floor(&self.denominator())
    }

    /// Fractional part as `(numerator, 10^scale)`, unreduced.
    pub fn fraction(&self) -> (BigInt, BigInt) {
        let den = self.denominator();
        let num = self.mantissa.mod_floor(&den);
        (num, den)
    }

    pub fn to_dyadic(&self) -> Option<Dyadic> {
        // m / (2^s 5^s) is dyadic iff 5^s divides m.
        let five_s = BigInt::from(5u32).pow(self.scale);
        let (q, r) = self.mantissa.div_rem(&five_s);
        r.is_zero().then(|| Dyadic::new(q, self.scale))
    }

    pub fn to_f64(&self) -> f64 {
        self.mantissa.to_f64().unwrap_or(f64::MAX) / 10f64.powi(self.scale as i32)
    }

    /// Ordering against a dyadic value, exactly.
    pub fn cmp_dyadic(&self, d: &Dyadic) -> Ordering {
        // m / 10^s  vs  n / 2^e  <=>  m * 2^e  vs  n * 10^s
        let lhs = &self.mantissa << d.exponent();
        let rhs = d.numerator() * self.denominator();
        lhs.cmp(&rhs)
    }
}

impl FromStr for ExactDecimal {
    type Err = NumberError;
    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let s = raw.trim();
        let bad = || NumberError::Malformed(raw.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let frac_trimmed = frac_part.trim_end_matches('0');
        let digits = format!("{int_part}{frac_trimmed}");
        let mut mantissa: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| bad())?
        };
        if negative {
            mantissa = -mantissa;
        }
        let scale = if mantissa.is_zero() { 0 } else { frac_trimmed.len() as u32 };
        Ok(ExactDecimal { mantissa, scale })
    }
}

impl fmt::Display for ExactDecimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.mantissa);
        }
        let digits = self.mantissa.abs().to_string();
        let s = self.scale as usize;
        let padded = if digits.len() <= s {
            format!("{}{}", "0".repeat(s + 1 - digits.len()), digits)
        } else {
            digits
        };
        let split = padded.len() - s;
        let sign = if self.mantissa.is_negative() { "-" } else { "" };
        write!(f, "{sign}{}.{}", &padded[..split], &padded[split..])
    }
}

impl fmt::Debug for ExactDecimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for ExactDecimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactDecimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `⌊(a+b)/2⌋` and `⌈(a+b)/2⌉` for integers.
pub fn integral_half_sum(a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
    let s = a + b;
    let low = s.div_floor(&BigInt::from(2));
    let high = &s - &low;
    (low, high)
}

/// `2^e` as a big integer.
pub fn pow2(e: u32) -> BigInt {
    BigInt::one() << e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn half_sum_examples() {
        assert_eq!(Dyadic::half_sum(&d("3"), &d("8")), Dyadic::new(11, 1));
        assert_eq!(Dyadic::half_sum(&d("5"), &d("5")), d("5"));
        assert_eq!(Dyadic::half_sum(&d("0.5"), &d("0.25")), Dyadic::new(3, 3));
    }

    #[test]
    fn integral_half_sum_examples() {
        let f = |a: i64, b: i64| {
            let (l, h) = integral_half_sum(&a.into(), &b.into());
            (l.to_i64().unwrap(), h.to_i64().unwrap())
        };
        assert_eq!(f(2, 9), (5, 6));
        assert_eq!(f(4, 4), (4, 4));
        assert_eq!(f(0, 3), (1, 2));
    }

    #[test]
    fn canonical_form() {
        let x = Dyadic::new(12, 3);
        assert_eq!(x.numerator(), &BigInt::from(3));
        assert_eq!(x.exponent(), 1);
        assert_eq!(Dyadic::new(0, 7).exponent(), 0);
        assert_eq!(Dyadic::new(-8, 2), Dyadic::from_int(-2));
    }

    #[test]
    fn decimal_rendering_is_exact() {
        assert_eq!(d("11").half().to_string(), "5.5");
        assert_eq!(Dyadic::new(3, 3).to_string(), "0.375");
        assert_eq!(Dyadic::new(-1, 4).to_string(), "-0.0625");
        assert_eq!(Dyadic::new(1, 10).to_string(), "0.0009765625");
        assert_eq!(Dyadic::zero().to_string(), "0");
    }

    #[test]
    fn parse_rejects_non_dyadic() {
        assert!(matches!("0.1".parse::<Dyadic>(), Err(NumberError::NotDyadic(_))));
        assert!(matches!("1.2.3".parse::<Dyadic>(), Err(NumberError::Malformed(_))));
        assert!(matches!("".parse::<Dyadic>(), Err(NumberError::Malformed(_))));
        assert_eq!(d("0.625"), Dyadic::new(5, 3));
        assert_eq!(d("-2.50"), Dyadic::new(-5, 1));
    }

    #[test]
    fn ordering_across_exponents() {
        assert!(d("0.5") < d("0.75"));
        assert!(d("-0.5") < d("0.25"));
        assert!(d("3") > d("2.875"));
        assert_eq!(d("1.5").cmp(&Dyadic::new(6, 2)), Ordering::Equal);
    }

    #[test]
    fn floor_and_euclid() {
        assert_eq!(d("2.75").floor(), BigInt::from(2));
        assert_eq!(d("-0.25").floor(), BigInt::from(-1));
        let (q, r) = d("1.3125").div_rem_euclid(&d("0.125"));
        assert_eq!(q, BigInt::from(10));
        assert_eq!(r, d("0.0625"));
        let (q, r) = d("0.5").div_rem_euclid(&d("1"));
        assert_eq!((q, r), (BigInt::zero(), d("0.5")));
    }

    #[test]
    fn exact_decimal_parts() {
        let k: ExactDecimal = "2.25".parse().unwrap();
        assert_eq!(k.floor(), BigInt::from(2));
        assert_eq!(k.fraction(), (BigInt::from(25), BigInt::from(100)));
        assert_eq!(k.to_string(), "2.25");
        let q: ExactDecimal = "0.050".parse().unwrap();
        assert_eq!(q.to_string(), "0.05");
        assert_eq!(q.scale(), 2);
        assert_eq!("7".parse::<ExactDecimal>().unwrap().to_dyadic(), Some(d("7")));
        assert_eq!("0.2".parse::<ExactDecimal>().unwrap().to_dyadic(), None);
        let t: ExactDecimal = "0.3".parse().unwrap();
        assert_eq!(t.cmp_dyadic(&d("0.25")), Ordering::Greater);
        assert_eq!(t.cmp_dyadic(&d("0.375")), Ordering::Less);
    }

    #[test]
    fn to_f64_handles_huge_exponents() {
        let x = Dyadic::new(BigInt::from(3) << 2000u32, 2001);
        assert!((x.to_f64() - 1.5).abs() < 1e-12);
    }
}

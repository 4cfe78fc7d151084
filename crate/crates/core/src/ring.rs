//! Minimal commutative-ring abstraction shared by the Pfaffian kernels, the
//! Q-function builders and the series evaluators.
//!
//! Values carry their own "shape" (a truncated polynomial knows its degree
//! cap), so zero and one are produced from an existing element rather than
//! from a bare type.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub trait Ring: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn is_zero_value(&self) -> bool;
    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;
}

/// Rings that admit exact (or floating) division by nonzero elements.
pub trait Field: Ring {
    fn div_ref(&self, other: &Self) -> Self;
}

/// Scalars that can be built from exact rationals and small integers.
pub trait Scalar: Field + Send + Sync {
    fn from_rational(r: &Rational) -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64_lossy(&self) -> f64;
}

impl Ring for Rational {
    fn zero_like(&self) -> Self {
        Rational::zero()
    }
    fn one_like(&self) -> Self {
        Rational::one()
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
}

impl Field for Rational {
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
}

impl Scalar for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn to_f64_lossy(&self) -> f64 {
        rational_to_f64(self)
    }
}

impl Ring for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn is_zero_value(&self) -> bool {
        *self == 0.0
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
}

impl Field for f64 {
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Ring for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one_like(&self) -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero_value(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn neg_ref(&self) -> Self {
        -self
    }
}

impl Field for Complex64 {
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
}

/// Converts a big rational to `f64`, surviving numerators and denominators
/// far outside the `f64` range.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let num_shift = (r.numer().bits() as i64 - 62).max(0);
    let den_shift = (r.denom().bits() as i64 - 62).max(0);
    let n = (r.numer() >> num_shift as usize).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> den_shift as usize).to_f64().unwrap_or(f64::NAN);
    let e = num_shift - den_shift;
    let e = e.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
    libm::ldexp(n / d, e)
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Parses `"p/q"`, `"p"`, or a finite decimal such as `"-0.125"` / `"1e-3"`
/// into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let negative = mantissa.starts_with('-');
    let body = mantissa.trim_start_matches(['-', '+']);
    let (int_part, frac_part) = match body.split_once('.') {
        Some((a, b)) => (a, b),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{}{}", int_part, frac_part).parse().ok()?;
    let mut value = Rational::new(digits, num_traits::pow(BigInt::from(10), frac_part.len()));
    let ten = Rational::from_integer(BigInt::from(10));
    if exponent >= 0 {
        value *= num_traits::pow(ten, exponent as usize);
    } else {
        value /= num_traits::pow(ten, (-exponent) as usize);
    }
    Some(if negative { -value } else { value })
}

pub fn rational_is_negative(r: &Rational) -> bool {
    r.is_negative()
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn factorial_rational(n: u32) -> Rational {
    Rational::from_integer(factorial(n))
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/6"), Some(rat(1, 2)));
        assert_eq!(parse_rational("-0.125"), Some(rat(-1, 8)));
        assert_eq!(parse_rational("2.5e-1"), Some(rat(1, 4)));
        assert_eq!(parse_rational("7"), Some(rat_int(7)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn huge_rationals_convert_to_f64() {
        let big = Rational::from_integer(factorial(200));
        let r = &big / (&big * rat_int(3));
        assert!((rational_to_f64(&r) - 1.0 / 3.0).abs() < 1e-15);
        let x = rational_to_f64(&(Rational::from_integer(factorial(170)) / rat_int(7)));
        assert!((x / (7.257415615307994e306 / 7.0) - 1.0).abs() < 1e-12);
    }
}

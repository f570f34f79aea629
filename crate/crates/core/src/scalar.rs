//! Scalar fields used by the operator calculus.
//!
//! Exact rationals are the source of truth for every algebraic identity;
//! complex doubles drive the dynamics and rendering. Gaussian rationals cover
//! the exact cases where complex values appear.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DroemError, Result};

pub type Q = BigRational;
pub type GaussQ = Complex<BigRational>;
pub type C64 = Complex<f64>;

pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when equality is exact (rational arithmetic).
    const EXACT: bool;

    fn from_q(q: &Q) -> Self;
    fn conj(&self) -> Self;
    fn to_c64(&self) -> C64;
    fn mul_ref(&self, other: &Self) -> Self;
    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;

    fn from_i64(v: i64) -> Self {
        Self::from_q(&Q::from_integer(BigInt::from(v)))
    }

    fn abs_f64(&self) -> f64 {
        self.to_c64().norm()
    }
}

impl Scalar for Q {
    const EXACT: bool = true;

    fn from_q(q: &Q) -> Self {
        q.clone()
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn to_c64(&self) -> C64 {
        C64::new(q_to_f64(self), 0.0)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn abs_f64(&self) -> f64 {
        q_to_f64(self).abs()
    }
}

impl Scalar for GaussQ {
    const EXACT: bool = true;

    fn from_q(q: &Q) -> Self {
        Complex::new(q.clone(), Q::zero())
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn to_c64(&self) -> C64 {
        C64::new(q_to_f64(&self.re), q_to_f64(&self.im))
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
}

impl Scalar for C64 {
    const EXACT: bool = false;

    fn from_q(q: &Q) -> Self {
        C64::new(q_to_f64(q), 0.0)
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
}

/// Converts a big rational to the nearest double, including ratios whose
/// numerator and denominator individually overflow `f64`.
pub fn q_to_f64(q: &Q) -> f64 {
    if let Some(v) = q.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    let numer = q.numer();
    let denom = q.denom();
    let shift = numer.bits().max(denom.bits()).saturating_sub(1000) as usize;
    let n = (numer >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (denom >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

pub fn q_int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"3/4"`, `"-2"`, or a finite decimal such as `"0.55"` exactly.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || DroemError::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let q = Q::new(numer, denom);
    Ok(if neg { -q } else { q })
}

pub fn format_q(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Exact rational carried through configs and reports as a `"num/den"` string.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rational(pub Q);

impl Rational {
    pub fn value(&self) -> &Q {
        &self.0
    }
}

impl From<Q> for Rational {
    fn from(q: Q) -> Self {
        Rational(q)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Rational {
    type Err = DroemError;
    fn from_str(s: &str) -> Result<Self> {
        parse_q(s).map(Rational)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => parse_q(&s).map(Rational).map_err(serde::de::Error::custom),
            Raw::Int(v) => Ok(Rational(q_int(v))),
            Raw::Float(v) => Q::from_float(v)
                .map(Rational)
                .ok_or_else(|| serde::de::Error::custom("non-finite rational")),
        }
    }
}

/// Generalized binomial coefficient `C(p, r)` for any integer `p` and `r >= 0`.
pub fn binom(p: i64, r: u64) -> Q {
    let mut acc = Q::one();
    for i in 0..r as i64 {
        acc = acc * q_int(p - i) / q_int(i + 1);
    }
    acc
}

pub fn is_positive(q: &Q) -> bool {
    q.is_positive()
}

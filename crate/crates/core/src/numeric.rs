//! Number fields the solvers are generic over: exact rationals and `f64`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::model::SparseMdp;

/// Arbitrary-precision rational, the canonical representation of probabilities.
pub type Rational = BigRational;

pub trait Number:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Whether arithmetic in this field is exact.
    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;

    /// Converts a float. For rationals the conversion is exact.
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn abs(&self) -> Self;

    /// Probability of the transition entry `entry` of `mdp` in this field.
    /// Floats read the cached view instead of converting again.
    fn transition_prob(mdp: &SparseMdp, entry: usize) -> Self;
}

impl Number for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn transition_prob(mdp: &SparseMdp, entry: usize) -> Self {
        mdp.entry_prob_f64(entry)
    }
}

impl Number for Rational {
    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_f64(x: f64) -> Self {
        Rational::from_float(x).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn transition_prob(mdp: &SparseMdp, entry: usize) -> Self {
        mdp.entry_prob(entry).clone()
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    match ToPrimitive::to_f64(r) {
        Some(x) => x,
        None => {
            // huge numerator and denominator: fall back on a scaled division
            let n = r.numer().bits() as i64;
            let d = r.denom().bits() as i64;
            let shift = (n.max(d) - 1000).max(0) as usize;
            let num = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let den = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            num / den
        }
    }
}

pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rational_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, an integer, or a terminating decimal with optional
/// exponent (`0.125`, `1e-6`, `2.5E3`) into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = parse_integer(num.trim())?;
        let den: BigInt = parse_integer(den.trim())?;
        if den.is_zero() {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(all_digits.parse::<BigInt>().ok()?);
    let scale = exponent - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    let factor = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    Some(if negative { -value } else { value })
}

fn parse_integer(s: &str) -> Option<BigInt> {
    if s.is_empty()
        || !s
            .trim_start_matches(['-', '+'])
            .chars()
            .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    s.parse().ok()
}

/// `r` in lowest terms as `p/q`, or `p` when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

//! Numeric abstractions shared by the whole crate.
//!
//! Anything that samples, exponentiates or takes logarithms is written
//! against [`Scalar`] (a real floating-point type). Pure field arithmetic,
//! such as fitting outage models from CAIDI tables, only needs
//! [`FieldScalar`] so it can also run on exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Floating-point scalar used for simulation, learning and exact evaluation.
pub trait Scalar:
    Float + FromPrimitive + Sum + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    fn of_u64(n: u64) -> Self {
        Self::from_u64(n).expect("u64 representable in scalar type")
    }

    /// Lossy conversion used when handing rates to the `f64` samplers.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Ordered field arithmetic; enough for method-of-moments fitting.
pub trait FieldScalar: Num + Copy + PartialOrd + FromPrimitive + Debug {}

impl<T: Num + Copy + PartialOrd + FromPrimitive + Debug> FieldScalar for T {}

/// Exact rational scalar.
pub type Exact = Ratio<i64>;

/// Parses a plain decimal literal such as `22.55` or `-1.5e0` into an exact rational.
///
/// Only finite decimals are accepted; exponents are supported for completeness.
pub fn parse_exact_decimal(text: &str) -> Result<Exact> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a decimal number: {text:?}"));
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: i64 = all.parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let pow = |e: u32| 10i64.checked_pow(e).ok_or_else(bad);
    let value = if scale >= 0 {
        Ratio::from_integer(numer.checked_mul(pow(scale as u32)?).ok_or_else(bad)?)
    } else {
        Ratio::new(numer, pow((-scale) as u32)?)
    };
    Ok(if negative { -value } else { value })
}

/// Renders an exact rational as a decimal string.
///
/// Terminating decimals are printed exactly; anything else is cut after
/// `max_fraction_digits` digits and marked with a trailing `...`.
pub fn format_exact_decimal(value: &Exact, max_fraction_digits: usize) -> String {
    let negative = value.is_negative();
    let v = value.abs();
    let (numer, denom) = (*v.numer() as i128, *v.denom() as i128);
    let mut out = String::new();
    if negative && !v.is_zero() {
        out.push('-');
    }
    out.push_str(&(numer / denom).to_string());
    let mut rem = numer % denom;
    if rem == 0 {
        return out;
    }
    out.push('.');
    for _ in 0..max_fraction_digits {
        rem *= 10;
        out.push(char::from(b'0' + (rem / denom) as u8));
        rem %= denom;
        if rem == 0 {
            return out;
        }
    }
    out.push_str("...");
    out
}

/// Converts an exact rational into a floating scalar (nearest representable value).
pub fn exact_to<T: Scalar>(value: &Exact) -> T {
    T::of(value.to_f64().unwrap_or(f64::NAN))
}

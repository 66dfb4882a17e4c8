//! Exact time arithmetic.
//!
//! Schedule evaluation and the Jackson-rule equality tests must be exact, so
//! all job data and lateness values are rationals. Probabilities elsewhere in
//! the crate stay `f64`.

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use thiserror::Error;

/// Time values (release, processing, delivery, lateness) in common units.
pub type Time = Ratio<i64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimeParseError {
    #[error("empty time value")]
    Empty,
    #[error("invalid time value {0:?}")]
    Invalid(String),
    #[error("time value {0:?} out of range")]
    OutOfRange(String),
}

/// Parses a decimal rational such as `12`, `3.25`, or `-0.5`.
/// An exact fraction `a/b` is accepted too, for values that have no finite
/// decimal expansion.
pub fn parse_time(text: &str) -> Result<Time, TimeParseError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(TimeParseError::Empty);
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num
            .trim()
            .parse()
            .map_err(|_| TimeParseError::Invalid(s.to_string()))?;
        let d: i64 = den
            .trim()
            .parse()
            .map_err(|_| TimeParseError::Invalid(s.to_string()))?;
        if d == 0 {
            return Err(TimeParseError::Invalid(s.to_string()));
        }
        return Ok(Ratio::new(n, d));
    }
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, s),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(TimeParseError::Invalid(s.to_string()));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(TimeParseError::Invalid(s.to_string()));
    }
    let mut numerator: i64 = if int_part.is_empty() {
        0
    } else {
        int_part
            .parse()
            .map_err(|_| TimeParseError::OutOfRange(s.to_string()))?
    };
    let mut denominator: i64 = 1;
    for c in frac_part.chars() {
        numerator = numerator
            .checked_mul(10)
            .and_then(|v| v.checked_add((c as u8 - b'0') as i64))
            .ok_or_else(|| TimeParseError::OutOfRange(s.to_string()))?;
        denominator = denominator
            .checked_mul(10)
            .ok_or_else(|| TimeParseError::OutOfRange(s.to_string()))?;
    }
    Ok(Ratio::new(sign * numerator, denominator))
}

/// Formats a time as a minimal decimal (`5`, `2.5`); falls back to `a/b`
/// when the reduced denominator has a prime factor other than 2 or 5.
/// `parse_time(&format_time(t)) == t` for every value.
pub fn format_time(value: Time) -> String {
    let value = value.reduced();
    let den = *value.denom();
    if den == 1 {
        return value.numer().to_string();
    }
    let (mut twos, mut fives, mut rest) = (0u32, 0u32, den);
    while rest % 2 == 0 {
        twos += 1;
        rest /= 2;
    }
    while rest % 5 == 0 {
        fives += 1;
        rest /= 5;
    }
    if rest != 1 {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    // Scale to numerator over 10^places; places <= 63 by construction.
    let scale = 10i64.pow(places) / den;
    let scaled = value.numer() * scale;
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.abs();
    let pow = 10i64.pow(places);
    let int = abs / pow;
    let frac = abs % pow;
    let mut frac_str = format!("{:0width$}", frac, width = places as usize);
    while frac_str.ends_with('0') {
        frac_str.pop();
    }
    format!("{sign}{int}.{frac_str}")
}

/// Lossy conversion for report columns and probability math.
pub fn time_to_f64(value: Time) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

pub fn is_nonnegative(value: Time) -> bool {
    !value.is_negative()
}

pub fn zero() -> Time {
    Time::zero()
}

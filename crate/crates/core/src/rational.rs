//! Exact rational numbers and their textual forms.
//!
//! Every numeric quantity in a model (clock values, prices, budgets) is a
//! [`Rational`]. Files carry them as JSON integers or `"num/den"` strings so
//! nothing passes through binary floating point.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

pub type Rational = num_rational::BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

/// Parses `"n"`, `"-n"`, `"n/d"`; decimals such as `"1.25"` are accepted
/// and converted exactly.
pub fn parse(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        let whole_val = if whole_digits.is_empty() {
            BigInt::zero()
        } else {
            BigInt::from_str(whole_digits).map_err(|_| err())?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_val = BigInt::from_str(frac).map_err(|_| err())?;
        let mag = Rational::new(whole_val * &scale + frac_val, scale);
        return Ok(if negative { -mag } else { mag });
    }
    BigInt::from_str(s).map(Rational::from_integer).map_err(|_| err())
}

/// Canonical text: `"3"` for integers, `"1/3"` otherwise.
pub fn format(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn to_json(q: &Rational) -> serde_json::Value {
    if q.is_integer() {
        if let Some(i) = q.numer().to_i64() {
            return serde_json::Value::from(i);
        }
    }
    serde_json::Value::String(format(q))
}

/// Accepts JSON integers and rational strings; rejects JSON floats.
pub fn from_json(v: &serde_json::Value) -> Option<Rational> {
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(int)
            .or_else(|| n.as_u64().map(|u| Rational::from_integer(BigInt::from(u)))),
        serde_json::Value::String(s) => parse(s).ok(),
        _ => None,
    }
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn floor(q: &Rational) -> BigInt {
    q.numer().div_floor(q.denom())
}

/// The rational with the smallest denominator in the closed interval
/// `[lo, hi]` (Stern-Brocot descent). Requires `lo <= hi`.
pub fn simplest_between(lo: &Rational, hi: &Rational) -> Rational {
    assert!(lo <= hi, "empty interval");
    if lo.is_negative() && hi.is_positive() || lo.is_zero() || hi.is_zero() {
        return Rational::zero();
    }
    if hi.is_negative() {
        return -simplest_between(&-hi, &-lo);
    }
    let fl = floor(lo);
    let lo_int = Rational::from_integer(fl.clone());
    if &lo_int == lo {
        return lo.clone();
    }
    let next = Rational::from_integer(&fl + BigInt::one());
    if &next <= hi {
        return next;
    }
    // lo and hi share the integer part: recurse on reciprocals of the
    // fractional parts.
    let lo_frac = lo - &lo_int;
    let hi_frac = hi - &lo_int;
    let inner = simplest_between(&hi_frac.recip(), &lo_frac.recip());
    lo_int + inner.recip()
}

/// Simplest rational within `tol` of `value`.
pub fn snap(value: &Rational, tol: &Rational) -> Rational {
    simplest_between(&(value - tol), &(value + tol))
}

//! Exact money arithmetic.
//!
//! Bids, budgets, thresholds and payments are arbitrary-precision rationals so
//! that every acceptance comparison in the mechanisms is exact.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{invalid, Result};

pub type Rational = num_rational::BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn to_f64(value: &Rational) -> f64 {
    // Quotient-then-remainder keeps precision for large numerators.
    value.to_f64().unwrap_or_else(|| {
        let q = value.numer() / value.denom();
        let r = value - Rational::from_integer(q.clone());
        q.to_f64().unwrap_or(f64::NAN) + r.to_f64().unwrap_or(0.0)
    })
}

/// Renders `n` or `n/d` in lowest terms.
pub fn format(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Parses `"7"`, `"-3/4"`, or a plain decimal such as `"0.25"` exactly.
pub fn parse(text: &str) -> Result<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return Err(invalid("empty number"));
    }
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| invalid(format!("bad numerator in {text:?}")))?;
        let d: BigInt = d.trim().parse().map_err(|_| invalid(format!("bad denominator in {text:?}")))?;
        if d.is_zero() {
            return Err(invalid(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty()
        || !whole.chars().all(|c| c.is_ascii_digit())
        || !frac.chars().all(|c| c.is_ascii_digit())
    {
        return Err(invalid(format!("not a number: {text:?}")));
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().unwrap() };
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

pub fn is_positive(value: &Rational) -> bool {
    value.is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse("10").unwrap(), int(10));
        assert_eq!(parse(".5").unwrap(), ratio(1, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse(".").is_err());
    }

    #[test]
    fn formats_lowest_terms() {
        assert_eq!(format(&ratio(4, 8)), "1/2");
        assert_eq!(format(&int(16)), "16");
        assert_eq!(format(&ratio(-2, 6)), "-1/3");
    }

    #[test]
    fn converts_to_float() {
        assert_eq!(to_f64(&ratio(1, 4)), 0.25);
    }
}

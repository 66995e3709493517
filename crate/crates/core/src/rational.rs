//! Rational helpers shared by every module.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {0:?} (expected \"p\" or \"p/q\")")]
pub struct ParseRationalError(pub String);

/// Parses `"p"`, `"-p/q"`, `"+p/q"`; whitespace around the literal is ignored.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    if num.is_empty() || den.is_empty() || den.starts_with(['-', '+']) {
        return Err(err());
    }
    let valid = |s: &str| {
        let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    };
    if !valid(num) || !valid(den) {
        return Err(err());
    }
    let n = BigInt::from_str(num).map_err(|_| err())?;
    let d = BigInt::from_str(den).map_err(|_| err())?;
    if d.is_zero() {
        return Err(err());
    }
    Ok(Rational::new(n, d))
}

/// Canonical `"p/q"` / `"p"` rendering of a reduced rational.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact conversion of a finite double.
pub fn from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

pub fn to_i64(r: &Rational) -> Option<i64> {
    if r.is_integer() {
        r.numer().to_i64()
    } else {
        None
    }
}

pub fn lcm(a: &BigInt, b: &BigInt) -> BigInt {
    a.lcm(b)
}

/// Integer m-th root when `n` is a perfect m-th power.
pub fn exact_nth_root(n: &BigInt, m: u32) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.nth_root(m);
    (num_traits::pow(r.clone(), m as usize) == *n).then_some(r)
}

pub fn pow(r: &Rational, e: u32) -> Rational {
    num_traits::pow(r.clone(), e as usize)
}

/// Decimal rendering rounded to `digits` significant digits.
pub fn decimal_string(r: &Rational, digits: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let a = r.abs();
    // Find e with 10^e <= a < 10^(e+1).
    let ten = Rational::from_integer(BigInt::from(10));
    let mut e: i64 = (a.numer().bits() as i64 - a.denom().bits() as i64) * 3 / 10;
    let pow10 = |k: i64| -> Rational {
        if k >= 0 {
            num_traits::pow(ten.clone(), k as usize)
        } else {
            num_traits::pow(ten.clone(), (-k) as usize).recip()
        }
    };
    while pow10(e) > a {
        e -= 1;
    }
    while pow10(e + 1) <= a {
        e += 1;
    }
    let shift = digits as i64 - 1 - e;
    let scaled = &a * pow10(shift);
    let mut mantissa = (scaled + Rational::new(BigInt::one(), BigInt::from(2))).floor().to_integer();
    if mantissa.to_string().len() > digits {
        mantissa /= 10;
        e += 1;
    }
    let mut m = mantissa.to_string();
    let body = if e >= 0 && (e as usize) < digits.max(21) {
        let int_len = e as usize + 1;
        while m.len() < int_len {
            m.push('0');
        }
        let (i, f) = m.split_at(int_len);
        let f = f.trim_end_matches('0');
        if f.is_empty() {
            i.to_string()
        } else {
            format!("{i}.{f}")
        }
    } else if e < 0 && e > -7 {
        let zeros = "0".repeat((-e - 1) as usize);
        format!("0.{zeros}{}", m.trim_end_matches('0'))
    } else {
        let (i, f) = m.split_at(1);
        let f = f.trim_end_matches('0');
        if f.is_empty() {
            format!("{i}e{e}")
        } else {
            format!("{i}.{f}e{e}")
        }
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

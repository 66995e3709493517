use crate::rational::{exact_nth_root, format_rational, Rational};
use num_bigint::BigInt;
use num_traits::Signed;

const FRACTION_DIGITS: usize = 50;

/// The positive real `base^(1/index)`, exact when rational.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactRoot {
    base: Rational,
    index: u32,
    value: RootValue,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RootValue {
    Rational(Rational),
    /// Truncated decimal expansion with 50 fractional digits.
    Irrational { decimal: String },
}

impl ExactRoot {
    /// `base` must be positive and `index >= 1`.
    pub fn new(base: Rational, index: u32) -> Self {
        assert!(base.is_positive() && index >= 1, "root of a non-positive base");
        let value = match (
            exact_nth_root(base.numer(), index),
            exact_nth_root(base.denom(), index),
        ) {
            (Some(p), Some(q)) => RootValue::Rational(Rational::new(p, q)),
            _ => RootValue::Irrational {
                decimal: truncated_root(&base, index),
            },
        };
        ExactRoot { base, index, value }
    }

    pub fn base(&self) -> &Rational {
        &self.base
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn value(&self) -> &RootValue {
        &self.value
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.value, RootValue::Rational(_))
    }

    pub fn rational(&self) -> Option<&Rational> {
        match &self.value {
            RootValue::Rational(r) => Some(r),
            RootValue::Irrational { .. } => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match &self.value {
            RootValue::Rational(r) => crate::rational::to_f64(r),
            RootValue::Irrational { decimal } => decimal.parse().unwrap_or(f64::NAN),
        }
    }

    pub fn decimal(&self) -> String {
        match &self.value {
            RootValue::Rational(r) => format_rational(r),
            RootValue::Irrational { decimal } => decimal.clone(),
        }
    }

    /// The reciprocal root `(1/base)^(1/index)`.
    pub fn recip(&self) -> Self {
        ExactRoot::new(self.base.recip(), self.index)
    }
}

/// floor(base^(1/m) * 10^D) / 10^D rendered as a decimal string.
fn truncated_root(base: &Rational, m: u32) -> String {
    let scale = num_traits::pow(BigInt::from(10), FRACTION_DIGITS * m as usize);
    let scaled = (base.numer() * scale) / base.denom();
    let digits = scaled.nth_root(m).to_string();
    let digits = format!("{digits:0>width$}", width = FRACTION_DIGITS + 1);
    let (int_part, frac) = digits.split_at(digits.len() - FRACTION_DIGITS);
    format!("{int_part}.{frac}")
}

use crate::poly::ExactRoot;
use crate::rational::{decimal_string, format_rational, to_f64, Rational};
use num_traits::Zero;
use serde::ser::{Serialize, SerializeMap, Serializer};

/// A real number carried exactly when rational, otherwise as a double.
#[derive(Clone, Debug, PartialEq)]
pub struct Value {
    pub approx: f64,
    pub exact: Option<Rational>,
}

impl Value {
    pub fn exact(r: Rational) -> Self {
        Value {
            approx: to_f64(&r),
            exact: Some(r),
        }
    }

    pub fn approx(x: f64) -> Self {
        Value { approx: x, exact: None }
    }

    pub fn zero() -> Self {
        Value::exact(Rational::zero())
    }

    pub fn is_exact_zero(&self) -> bool {
        self.exact.as_ref().is_some_and(Zero::is_zero)
    }

    /// Zero exactly, or within `tol` when only approximate.
    pub fn is_zero_within(&self, tol: f64) -> bool {
        match &self.exact {
            Some(r) => r.is_zero(),
            None => self.approx.abs() <= tol,
        }
    }

    pub fn add(&self, other: &Value) -> Value {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Value::exact(a + b),
            _ => Value::approx(self.approx + other.approx),
        }
    }

    pub fn sub(&self, other: &Value) -> Value {
        self.add(&other.scale(&-Rational::from_integer(1.into())))
    }

    pub fn scale(&self, s: &Rational) -> Value {
        match &self.exact {
            Some(a) => Value::exact(a * s),
            None => Value::approx(self.approx * to_f64(s)),
        }
    }

    pub fn mul(&self, other: &Value) -> Value {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Value::exact(a * b),
            _ => Value::approx(self.approx * other.approx),
        }
    }

    pub fn mul_root(&self, c: &ExactRoot) -> Value {
        match c.rational() {
            Some(r) => self.scale(r),
            None if self.is_exact_zero() => Value::zero(),
            None => Value::approx(self.approx * c.to_f64()),
        }
    }

    pub fn decimal(&self) -> String {
        match &self.exact {
            Some(r) => decimal_string(r, 17),
            None => format!("{:.16e}", self.approx),
        }
    }
}

impl From<&ExactRoot> for Value {
    fn from(c: &ExactRoot) -> Self {
        match c.rational() {
            Some(r) => Value::exact(r.clone()),
            None => Value::approx(c.to_f64()),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("value", &self.decimal())?;
        map.serialize_entry("exact", &self.exact.as_ref().map(format_rational))?;
        map.end()
    }
}

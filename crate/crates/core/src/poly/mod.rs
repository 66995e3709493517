//! Integer-valued polynomial families: validation, structure, equivalence
//! witnesses and asymptotic densities of coinciding values.

mod density;
mod family;
mod root;
mod univariate;
mod witness;

pub use density::{
    empirical_subset_density, family_density, m_count, subset_density, DensityResult,
};
pub use family::{analyze_family, leading_ratio, FamilyStructure};
pub use root::{ExactRoot, RootValue};
pub use univariate::Poly;
pub use witness::{equivalence_witness, strict_witness, EquivalenceWitness};

use crate::rational::{format_rational, parse_rational, to_i64, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("empty coefficient list")]
    Empty,
    #[error("polynomial has degree zero")]
    DegreeZero,
    #[error("leading coefficient {0} is not positive")]
    NonPositiveLeading(String),
    #[error("not integer-valued: binomial coordinate {index} is {value}")]
    NotIntegerValued { index: usize, value: String },
    #[error("not positive on the naturals: q({n}) = {value}")]
    NotPositiveOnNaturals { n: u64, value: String },
    #[error("family is not eventually increasing at position {index}")]
    NotEventuallyOrdered { index: usize },
    #[error("polynomials {index} and {next} coincide", next = index + 1)]
    DuplicatePolynomial { index: usize },
    #[error("indices {i} and {j} lie in different degree blocks")]
    DegreeMismatch { i: usize, j: usize },
    #[error("irrational prefactor {0} multiplies a positive density")]
    IrrationalPrefactor(String),
    #[error("empty family")]
    EmptyFamily,
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("subset must be nonempty and strictly increasing")]
    BadSubset,
    #[error("{0}")]
    Parse(#[from] crate::rational::ParseRationalError),
    #[error("polynomial value at n = {0} exceeds the 128-bit evaluation range")]
    Overflow(u64),
}

/// A polynomial mapping the positive integers into themselves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntegerValuedPolynomial {
    poly: Poly,
    binomial: Vec<BigInt>,
    monotone_from: u64,
    numer: Option<Vec<i128>>,
    denom: i128,
}

/// Checks integrality (binomial basis), positive leading coefficient and
/// `q(n) >= 1` for every `n >= 1`.
pub fn validate_polynomial(coeffs: &[Rational]) -> Result<IntegerValuedPolynomial, PolyError> {
    if coeffs.is_empty() {
        return Err(PolyError::Empty);
    }
    let poly = Poly::new(coeffs.to_vec());
    let m = match poly.degree() {
        None | Some(0) => return Err(PolyError::DegreeZero),
        Some(m) => m,
    };
    if !poly.leading().is_positive() {
        return Err(PolyError::NonPositiveLeading(format_rational(&poly.leading())));
    }

    // Forward differences at 0 are the binomial-basis coordinates.
    let mut table: Vec<Rational> = (0..=m).map(|k| poly.eval(&Rational::from_integer(k.into()))).collect();
    let mut binomial = Vec::with_capacity(m + 1);
    for k in 0..=m {
        if !table[0].is_integer() {
            return Err(PolyError::NotIntegerValued {
                index: k,
                value: format_rational(&table[0]),
            });
        }
        binomial.push(table[0].to_integer());
        table = table.windows(2).map(|w| &w[1] - &w[0]).collect();
    }

    let monotone_from = increasing_threshold(&poly);
    for n in 1..=monotone_from {
        let v = poly.eval(&Rational::from_integer(n.into()));
        if v < Rational::one() {
            return Err(PolyError::NotPositiveOnNaturals {
                n,
                value: format_rational(&v),
            });
        }
    }

    let denom_big = poly
        .coeffs()
        .iter()
        .fold(BigInt::one(), |acc, c| num_integer::Integer::lcm(&acc, c.denom()));
    let denom = denom_big.to_i128().unwrap_or(0);
    let numer = (denom != 0)
        .then(|| {
            poly.coeffs()
                .iter()
                .map(|c| (c * Rational::from_integer(denom_big.clone())).to_integer().to_i128())
                .collect::<Option<Vec<i128>>>()
        })
        .flatten();

    Ok(IntegerValuedPolynomial {
        poly,
        binomial,
        monotone_from,
        numer,
        denom,
    })
}

/// Smallest power of two `B >= 1` such that every real root of `q'` is below
/// `B` (Fujiwara bound), so `q` is increasing on `[B, inf)`.
fn increasing_threshold(poly: &Poly) -> u64 {
    let d = poly.derivative();
    let top = d.degree().unwrap_or(0);
    if top == 0 {
        return 1;
    }
    let lead = d.leading();
    let mut half = Rational::one();
    let mut bound: u64 = 2;
    loop {
        let ok = (0..top).all(|k| {
            let ratio = (d.coeff(k) / &lead).abs();
            crate::rational::pow(&half, (top - k) as u32) >= ratio
        });
        if ok {
            return bound;
        }
        half *= Rational::from_integer(2.into());
        bound *= 2;
    }
}

impl IntegerValuedPolynomial {
    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn coeffs(&self) -> &[Rational] {
        self.poly.coeffs()
    }

    pub fn degree(&self) -> usize {
        self.poly.degree().unwrap_or(0)
    }

    pub fn leading(&self) -> Rational {
        self.poly.leading()
    }

    /// Coordinates in the basis `C(x,0), …, C(x,m)`.
    pub fn binomial_coordinates(&self) -> &[BigInt] {
        &self.binomial
    }

    /// `q` is nondecreasing on the integers `>= monotone_from()`.
    pub fn monotone_from(&self) -> u64 {
        self.monotone_from
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.poly.eval(x)
    }

    /// Exact value at a natural number through 128-bit integer arithmetic.
    pub fn value_at(&self, n: u64) -> Option<i128> {
        match &self.numer {
            Some(numer) => {
                let x = n as i128;
                let mut acc: i128 = 0;
                for c in numer.iter().rev() {
                    acc = acc.checked_mul(x)?.checked_add(*c)?;
                }
                Some(acc / self.denom)
            }
            None => self.eval(&Rational::from_integer(n.into())).to_integer().to_i128(),
        }
    }

    /// Exact value at a natural number as an `i64`, when it fits.
    pub fn value_i64(&self, n: u64) -> Option<i64> {
        self.value_at(n).and_then(|v| i64::try_from(v).ok())
    }

    /// Ascending coefficient strings.
    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs().iter().map(format_rational).collect()
    }

    pub fn from_strings<S: AsRef<str>>(coeffs: &[S]) -> Result<Self, PolyError> {
        let parsed = coeffs
            .iter()
            .map(|s| parse_rational(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        validate_polynomial(&parsed)
    }

    /// Constant value of `self - other`, when that difference is constant.
    pub fn constant_difference(&self, other: &Self) -> Option<Rational> {
        let d = &self.poly - &other.poly;
        d.is_constant().then(|| d.coeff(0))
    }

    /// Constant difference as an integer (always integral for valid inputs).
    pub fn integer_difference(&self, other: &Self) -> Option<i64> {
        self.constant_difference(other).and_then(|r| to_i64(&r))
    }
}

impl std::fmt::Display for IntegerValuedPolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut terms = Vec::new();
        for (k, c) in self.coeffs().iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let coef = format_rational(c);
            let term = match k {
                0 => coef,
                _ => {
                    let var = if k == 1 { "n".to_string() } else { format!("n^{k}") };
                    if c.is_one() {
                        var
                    } else {
                        format!("{coef}*{var}")
                    }
                }
            };
            terms.push(term);
        }
        write!(f, "{}", terms.join(" + ").replace("+ -", "- "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn accepts_squares_and_triangular_numbers() {
        let q = validate_polynomial(&[int(0), int(0), int(1)]).unwrap();
        assert_eq!(q.degree(), 2);
        let tri = validate_polynomial(&[int(0), rat(1, 2), rat(1, 2)]).unwrap();
        let vals: Vec<i128> = (1..=5).map(|n| tri.value_at(n).unwrap()).collect();
        assert_eq!(vals, vec![1, 3, 6, 10, 15]);
        assert_eq!(tri.binomial_coordinates(), &[0.into(), 1.into(), 1.into()]);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(matches!(
            validate_polynomial(&[int(0), rat(1, 2)]),
            Err(PolyError::NotIntegerValued { .. })
        ));
        assert_eq!(validate_polynomial(&[int(3)]), Err(PolyError::DegreeZero));
        assert_eq!(validate_polynomial(&[]), Err(PolyError::Empty));
        assert!(matches!(
            validate_polynomial(&[int(0), int(-1)]),
            Err(PolyError::NonPositiveLeading(_))
        ));
        // n^2 - 3n + 1 is -1 at n = 1.
        assert!(matches!(
            validate_polynomial(&[int(1), int(-3), int(1)]),
            Err(PolyError::NotPositiveOnNaturals { n: 1, .. })
        ));
        // n^2 - 10n + 30 is 5 at n = 5 but the minimum over the naturals is 5; valid.
        assert!(validate_polynomial(&[int(30), int(-10), int(1)]).is_ok());
        // n^2 - 10n + 25 hits 0 at n = 5.
        assert!(matches!(
            validate_polynomial(&[int(25), int(-10), int(1)]),
            Err(PolyError::NotPositiveOnNaturals { n: 5, .. })
        ));
    }

    #[test]
    fn monotone_threshold_is_sound() {
        let q = validate_polynomial(&[int(100), int(-40), int(1)]).unwrap_err();
        assert!(matches!(q, PolyError::NotPositiveOnNaturals { .. }));
        let q = validate_polynomial(&[int(500), int(-40), int(1)]).unwrap();
        let t = q.monotone_from();
        for n in t..t + 50 {
            assert!(q.value_at(n + 1).unwrap() >= q.value_at(n).unwrap());
        }
    }

    #[test]
    fn displays_readably() {
        let q = validate_polynomial(&[int(1), int(-4), int(4)]).unwrap();
        assert_eq!(q.to_string(), "4*n^2 - 4*n + 1");
    }
}

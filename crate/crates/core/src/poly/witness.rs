use super::{ExactRoot, IntegerValuedPolynomial};
use crate::rational::Rational;
use num_bigint::BigInt;
use num_traits::Zero;

/// Affine change of variable relating two polynomials of one degree:
/// `q_j(y) = q_i(c * (y - x)) + offset` with `c = (a_j / a_i)^(1/m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceWitness {
    pub c: Rational,
    pub x: Rational,
    pub offset: Rational,
}

impl EquivalenceWitness {
    /// Numerator of `c`; the period of the congruence condition on `y`.
    pub fn alpha(&self) -> BigInt {
        self.c.numer().clone()
    }

    pub fn beta(&self) -> BigInt {
        self.c.denom().clone()
    }

    pub fn is_strict(&self) -> bool {
        self.offset.is_zero()
    }

    /// Re-checks the identity coefficient by coefficient.
    pub fn verify(&self, qi: &IntegerValuedPolynomial, qj: &IntegerValuedPolynomial) -> bool {
        let shift = -(&self.c * &self.x);
        let lhs = qi.poly().compose_affine(&self.c, &shift);
        let diff = qj.poly() - &lhs;
        diff.is_constant() && diff.coeff(0) == self.offset
    }
}

pub fn equivalence_witness(
    qi: &IntegerValuedPolynomial,
    qj: &IntegerValuedPolynomial,
) -> Option<EquivalenceWitness> {
    let m = qi.degree();
    if m != qj.degree() {
        return None;
    }
    let root = ExactRoot::new(qj.leading() / qi.leading(), m as u32);
    let c = root.rational()?.clone();
    // Match the y^(m-1) coefficient of q_i(c*y + s) against q_j; linear in s.
    let cm1 = crate::rational::pow(&c, (m - 1) as u32);
    let mm = Rational::from_integer(m.into());
    let s = (qj.poly().coeff(m - 1) - qi.poly().coeff(m - 1) * &cm1) / (qi.leading() * mm * cm1);
    let composed = qi.poly().compose_affine(&c, &s);
    let diff = qj.poly() - &composed;
    if !diff.is_constant() {
        return None;
    }
    let x = -(s / &c);
    Some(EquivalenceWitness {
        c,
        x,
        offset: diff.coeff(0),
    })
}

/// Witness with zero offset: the value sets coincide along the substitution.
pub fn strict_witness(
    qi: &IntegerValuedPolynomial,
    qj: &IntegerValuedPolynomial,
) -> Option<EquivalenceWitness> {
    equivalence_witness(qi, qj).filter(EquivalenceWitness::is_strict)
}

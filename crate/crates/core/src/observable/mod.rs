//! Polynomial observables, their centering and martingale-friendly
//! decomposition, and the reduction that merges constant-difference groups.

use crate::poly::FamilyStructure;
use crate::process::{FiniteLaw, ProcessError, ProcessSpec};
use crate::rational::{pow, Rational};
use num_traits::{One, Zero};
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Largest stacked dimension `|D̂|·℘` accepted by [`reduce_setup`].
pub const MAX_STACKED_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error("variable (slot {slot}, coordinate {coord}) repeated within a monomial")]
    DuplicateVariable { slot: usize, coord: usize },
    #[error("observable uses slot {slot} but the family has {slots}")]
    SlotOutOfRange { slot: usize, slots: usize },
    #[error("observable uses coordinate {coord} but the process has dimension {dim}")]
    CoordOutOfRange { coord: usize, dim: usize },
    #[error("stacked dimension {dim} exceeds the cap {cap}")]
    StackTooLarge { dim: usize, cap: usize },
    #[error("exponents must be positive")]
    ZeroExponent,
    #[error(transparent)]
    Process(#[from] ProcessError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub slot: usize,
    pub coord: usize,
}

/// Sorted `(variable, exponent)` list with positive exponents.
pub type Monomial = Vec<(Var, u32)>;

/// Polynomial in the variables `x_{slot, coord}` with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default, Hash)]
pub struct MultiPolynomial {
    terms: BTreeMap<Monomial, Rational>,
}

fn merge_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x.0 == y.0 => {
                out.push((x.0, x.1 + y.1));
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.0 < y.0 => {
                out.push(*x);
                i += 1;
            }
            (Some(x), None) => {
                out.push(*x);
                i += 1;
            }
            (_, Some(y)) => {
                out.push(*y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

impl MultiPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(slot: usize, coord: usize) -> Self {
        let mut p = Self::zero();
        p.add_term(vec![(Var { slot, coord }, 1)], Rational::one());
        p
    }

    /// Builds from `(coefficient, [(slot, coord, exponent)])` terms (zero-based).
    pub fn from_terms<I>(terms: I) -> Result<Self, ObservableError>
    where
        I: IntoIterator<Item = (Rational, Vec<(usize, usize, u32)>)>,
    {
        let mut p = Self::zero();
        for (coef, powers) in terms {
            let mut mono: Monomial = Vec::with_capacity(powers.len());
            for (slot, coord, e) in powers {
                if e == 0 {
                    return Err(ObservableError::ZeroExponent);
                }
                mono.push((Var { slot, coord }, e));
            }
            mono.sort();
            if let Some(w) = mono.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(ObservableError::DuplicateVariable {
                    slot: w[0].0.slot,
                    coord: w[0].0.coord,
                });
            }
            p.add_term(mono, coef);
        }
        Ok(p)
    }

    fn add_term(&mut self, mono: Monomial, coef: Rational) {
        if coef.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += coef;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(coef);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> Rational {
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(Rational::zero)
    }

    /// Largest slot index used, plus one.
    pub fn slot_bound(&self) -> usize {
        self.vars().map(|v| v.slot + 1).max().unwrap_or(0)
    }

    pub fn coord_bound(&self) -> usize {
        self.vars().map(|v| v.coord + 1).max().unwrap_or(0)
    }

    fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.terms.keys().flat_map(|m| m.iter().map(|(v, _)| *v))
    }

    pub fn uses_slot(&self, slot: usize) -> bool {
        self.vars().any(|v| v.slot == slot)
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut p = Self::zero();
        for (m, c) in &self.terms {
            p.add_term(m.clone(), c * s);
        }
        p
    }

    pub fn evaluate_with<F: Fn(Var) -> Rational>(&self, value: F) -> Rational {
        self.terms
            .iter()
            .map(|(m, c)| m.iter().fold(c.clone(), |acc, (v, e)| acc * pow(&value(*v), *e)))
            .sum()
    }

    /// Evaluates at `point[slot][coord]`.
    pub fn evaluate(&self, point: &[Vec<Rational>]) -> Rational {
        self.evaluate_with(|v| point[v.slot][v.coord].clone())
    }

    /// Floating-point evaluation at `point[slot][coord]`.
    pub fn evaluate_f64(&self, point: &[&[f64]]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.iter()
                    .fold(crate::rational::to_f64(c), |acc, (v, e)| acc * point[v.slot][v.coord].powi(*e as i32))
            })
            .sum()
    }

    /// Integrates out every variable of `slot` against `law` (coordinate `c`
    /// of the law feeds `x_{slot, c}`).
    pub fn integrate_slot(&self, slot: usize, law: &FiniteLaw) -> Self {
        let mut out = Self::zero();
        let mut cache: BTreeMap<Vec<(usize, u32)>, Rational> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (inside, rest): (Vec<_>, Vec<_>) = m.iter().partition(|(v, _)| v.slot == slot);
            let key: Vec<(usize, u32)> = inside.iter().map(|(v, e)| (v.coord, *e)).collect();
            let mean = cache.entry(key.clone()).or_insert_with(|| law.moment(&key)).clone();
            out.add_term(rest, c * mean);
        }
        out
    }

    /// Renames variables; terms that collide are merged.
    pub fn remap<F: Fn(Var) -> Var>(&self, f: F) -> Result<Self, ObservableError> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut mono: Monomial = m.iter().map(|(v, e)| (f(*v), *e)).collect();
            mono.sort();
            if let Some(w) = mono.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(ObservableError::DuplicateVariable {
                    slot: w[0].0.slot,
                    coord: w[0].0.coord,
                });
            }
            out.add_term(mono, c.clone());
        }
        Ok(out)
    }

    /// Upper bound on `|F|` given per-(slot, coord) bounds on `|x|`.
    pub fn sup_bound<F: Fn(Var) -> Rational>(&self, bound: F) -> Rational {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.iter()
                    .fold(num_traits::Signed::abs(c), |acc, (v, e)| acc * pow(&bound(*v), *e))
            })
            .sum()
    }

    /// `(coefficient, [(slot, coord, exponent)])` in canonical order.
    pub fn to_terms(&self) -> Vec<(Rational, Vec<(usize, usize, u32)>)> {
        self.terms
            .iter()
            .map(|(m, c)| (c.clone(), m.iter().map(|(v, e)| (v.slot, v.coord, *e)).collect()))
            .collect()
    }
}

impl Add for &MultiPolynomial {
    type Output = MultiPolynomial;
    fn add(self, rhs: &MultiPolynomial) -> MultiPolynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &MultiPolynomial {
    type Output = MultiPolynomial;
    fn sub(self, rhs: &MultiPolynomial) -> MultiPolynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Neg for &MultiPolynomial {
    type Output = MultiPolynomial;
    fn neg(self) -> MultiPolynomial {
        self.scale(&-Rational::one())
    }
}

impl Mul for &MultiPolynomial {
    type Output = MultiPolynomial;
    fn mul(self, rhs: &MultiPolynomial) -> MultiPolynomial {
        let mut out = MultiPolynomial::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                out.add_term(merge_monomials(a, b), ca * cb);
            }
        }
        out
    }
}

/// `F = F̄ + Σ_i F_i`, where `F_i` depends on slots `0..=i` only and
/// integrates to zero in slot `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedObservable {
    pub fbar: Rational,
    pub parts: Vec<MultiPolynomial>,
}

impl DecomposedObservable {
    pub fn total(&self) -> MultiPolynomial {
        self.parts.iter().fold(MultiPolynomial::zero(), |acc, p| &acc + p)
    }
}

/// Integral of `F` against `laws[0] ⊗ … ⊗ laws[L-1]`, and `F` minus it.
pub fn center(f: &MultiPolynomial, laws: &[FiniteLaw]) -> (Rational, MultiPolynomial) {
    let fbar = (0..laws.len())
        .rev()
        .fold(f.clone(), |acc, s| acc.integrate_slot(s, &laws[s]))
        .constant_term();
    (fbar.clone(), f - &MultiPolynomial::constant(fbar))
}

/// `F_i = ∫ F dν_{i+1}⋯ − ∫ F dν_i⋯` with one law per slot.
pub fn decompose(f: &MultiPolynomial, laws: &[FiniteLaw]) -> DecomposedObservable {
    let l = laws.len();
    assert!(f.slot_bound() <= l, "observable uses more slots than laws supplied");
    // partial[k] = F integrated over slots k..l-1; partial[l] = F.
    let mut partial = vec![MultiPolynomial::zero(); l + 1];
    partial[l] = f.clone();
    for k in (0..l).rev() {
        partial[k] = partial[k + 1].integrate_slot(k, &laws[k]);
    }
    let fbar = partial[0].constant_term();
    let parts = (0..l).map(|i| &partial[i + 1] - &partial[i]).collect();
    DecomposedObservable { fbar, parts }
}

/// Family with constant-difference groups merged into one stacked process
/// `Z(n) = (X(n + k))_{k ∈ D̂}` and the observable rewritten as `G`.
#[derive(Clone, Debug)]
pub struct ReducedSetup {
    pub original: FamilyStructure,
    /// Structure of the reduced family `p_s`; its `ℓ̂` equals its `ℓ`.
    pub reduced: FamilyStructure,
    pub d_hat: Vec<i64>,
    /// Dimension `℘` of the underlying process.
    pub dim: usize,
    pub f: MultiPolynomial,
    pub g: MultiPolynomial,
    /// Law of `Z(0)`.
    pub nu: FiniteLaw,
}

impl ReducedSetup {
    pub fn slots(&self) -> usize {
        self.reduced.ell()
    }

    pub fn stacked_dim(&self) -> usize {
        self.d_hat.len() * self.dim
    }

    /// Stacked coordinate holding coordinate `c` of `X(n + d_hat[j])`.
    pub fn stacked_coord(&self, j: usize, c: usize) -> usize {
        j * self.dim + c
    }

    /// Time offset and process coordinate behind a stacked coordinate.
    pub fn unstack(&self, sc: usize) -> (i64, usize) {
        (self.d_hat[sc / self.dim], sc % self.dim)
    }

    pub fn laws(&self) -> Vec<FiniteLaw> {
        vec![self.nu.clone(); self.slots()]
    }

    pub fn decompose(&self) -> DecomposedObservable {
        decompose(&self.g, &self.laws())
    }
}

pub fn reduce_setup(
    family: &FamilyStructure,
    f: &MultiPolynomial,
    spec: &ProcessSpec,
) -> Result<ReducedSetup, ObservableError> {
    if f.slot_bound() > family.ell() {
        return Err(ObservableError::SlotOutOfRange {
            slot: f.slot_bound() - 1,
            slots: family.ell(),
        });
    }
    let dim = spec.dimension();
    if f.coord_bound() > dim {
        return Err(ObservableError::CoordOutOfRange {
            coord: f.coord_bound() - 1,
            dim,
        });
    }
    let d_hat = family.d_hat().to_vec();
    let stacked = d_hat.len() * dim;
    if stacked > MAX_STACKED_DIM {
        return Err(ObservableError::StackTooLarge {
            dim: stacked,
            cap: MAX_STACKED_DIM,
        });
    }
    let g = f.remap(|v| {
        let j = d_hat.binary_search(&family.offset_of(v.slot)).unwrap();
        Var {
            slot: family.group_of(v.slot),
            coord: j * dim + v.coord,
        }
    })?;
    let reduced = crate::poly::analyze_family(&family.reduced_family())
        .expect("a sub-family of an ordered family is ordered");
    let nu = spec.joint_law(&d_hat)?.flatten();
    Ok(ReducedSetup {
        original: family.clone(),
        reduced,
        d_hat,
        dim,
        f: f.clone(),
        g,
        nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{analyze_family, validate_polynomial};
    use crate::rational::{int, rat};

    fn uniform01() -> FiniteLaw {
        FiniteLaw {
            atoms: vec![(vec![int(0)], rat(1, 2)), (vec![int(1)], rat(1, 2))],
        }
    }

    fn pm() -> FiniteLaw {
        FiniteLaw {
            atoms: vec![(vec![int(-1)], rat(1, 2)), (vec![int(1)], rat(1, 2))],
        }
    }

    fn x(slot: usize) -> MultiPolynomial {
        MultiPolynomial::var(slot, 0)
    }

    #[test]
    fn centering() {
        let xy = &x(0) * &x(1);
        let (fbar, centered) = center(&xy, &[uniform01(), uniform01()]);
        assert_eq!(fbar, rat(1, 4));
        assert_eq!(centered.constant_term(), rat(-1, 4));
        let (fbar, centered) = center(&MultiPolynomial::constant(int(7)), &[pm()]);
        assert_eq!((fbar, centered.is_zero()), (int(7), true));
        assert_eq!(center(&x(0), &[pm()]).0, int(0));
    }

    #[test]
    fn decomposition_examples() {
        let xy = &x(0) * &x(1);
        let d = decompose(&xy, &[uniform01(), uniform01()]);
        let half = MultiPolynomial::constant(rat(1, 2));
        assert_eq!(d.parts[0], &(&x(0) * &half) - &MultiPolynomial::constant(rat(1, 4)));
        assert_eq!(d.parts[1], &xy - &(&x(0) * &half));

        let f = &(&(&x(0) * &x(0)) * &x(1)) + &x(0);
        let d = decompose(&f, &[pm(), pm()]);
        assert_eq!(d.fbar, int(0));
        assert_eq!(d.parts[0], x(0));
        assert_eq!(d.parts[1], &(&x(0) * &x(0)) * &x(1));

        let g = &(&x(0) * &x(0)) + &x(0);
        let d = decompose(&g, &[uniform01(), uniform01(), uniform01()]);
        assert_eq!(d.parts[0], &g - &MultiPolynomial::constant(d.fbar.clone()));
        assert!(d.parts[1].is_zero() && d.parts[2].is_zero());
    }

    #[test]
    fn evaluation() {
        let xy = &x(0) * &x(1);
        assert_eq!(xy.evaluate(&[vec![int(2)], vec![int(3)]]), int(6));
        let f = &(&(&x(0) * &x(0)) * &x(1)) + &x(0);
        assert_eq!(f.evaluate(&[vec![int(1)], vec![int(-1)]]), int(0));
        assert_eq!(MultiPolynomial::zero().evaluate(&[]), int(0));
    }

    #[test]
    fn rejects_duplicate_variables() {
        let err = MultiPolynomial::from_terms([(int(1), vec![(0, 0, 1), (0, 0, 2)])]).unwrap_err();
        assert_eq!(err, ObservableError::DuplicateVariable { slot: 0, coord: 0 });
    }

    #[test]
    fn reduction_stacks_constant_offsets() {
        let polys: Vec<_> = [vec![int(0), int(1)], vec![int(2), int(1)], vec![int(0), int(0), int(1)]]
            .iter()
            .map(|c| validate_polynomial(c).unwrap())
            .collect();
        let family = analyze_family(&polys).unwrap();
        let spec = crate::process::ProcessSpec::iid(vec![(vec![int(0)], rat(1, 2)), (vec![int(1)], rat(1, 2))]).unwrap();
        let f = MultiPolynomial::from_terms([(int(1), vec![(0, 0, 1), (1, 0, 2), (2, 0, 1)])]).unwrap();
        let setup = reduce_setup(&family, &f, &spec).unwrap();
        assert_eq!(setup.slots(), 2);
        assert_eq!(setup.d_hat, vec![0, 2]);
        let expect = MultiPolynomial::from_terms([(int(1), vec![(0, 0, 1), (0, 1, 2), (1, 0, 1)])]).unwrap();
        assert_eq!(setup.g, expect);
        assert_eq!(setup.nu.atoms.len(), 4);
    }
}

use super::{strict_witness, ExactRoot, FamilyStructure, IntegerValuedPolynomial, PolyError};
use crate::rational::{to_f64, Rational};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use std::collections::HashSet;

/// Asymptotic density of `{n : q_{t_1}(n) ∈ q_{t_i}(ℕ) for all i}` relative
/// to the head of the degree block.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityResult {
    pub m: u64,
    pub a: u64,
    pub prefactor: ExactRoot,
    /// `prefactor * m / a` when that product is rational.
    pub density: Option<Rational>,
    pub approx: f64,
}

/// Counts residues `z mod lcm(α_i)` with `β_i z / α_i + x_i ∈ ℤ` for every
/// triple `(α_i, β_i, x_i)`; returns `(M, a)`.
pub fn m_count(witnesses: &[(u64, u64, Rational)]) -> (u64, u64) {
    let a = witnesses.iter().fold(1u64, |acc, w| acc.lcm(&w.0));
    let allowed: Vec<Vec<bool>> = witnesses
        .iter()
        .map(|(alpha, beta, x)| {
            (0..*alpha)
                .map(|w| {
                    let v = Rational::new((*beta * w).into(), (*alpha).into()) + x;
                    v.is_integer()
                })
                .collect()
        })
        .collect();
    let m = (0..a)
        .filter(|z| {
            witnesses
                .iter()
                .zip(&allowed)
                .all(|((alpha, _, _), ok)| ok[(z % alpha) as usize])
        })
        .count() as u64;
    (m, a)
}

fn check_subset(family: &FamilyStructure, t: &[usize]) -> Result<(), PolyError> {
    if t.is_empty() || t.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PolyError::BadSubset);
    }
    if let Some(&bad) = t.iter().find(|&&i| i >= family.ell()) {
        return Err(PolyError::IndexOutOfRange(bad));
    }
    let k = family.block_of(t[0]);
    if let Some(&j) = t.iter().find(|&&j| family.block_of(j) != k) {
        return Err(PolyError::DegreeMismatch { i: t[0], j });
    }
    Ok(())
}

pub fn subset_density(family: &FamilyStructure, t: &[usize]) -> Result<DensityResult, PolyError> {
    check_subset(family, t)?;
    let head = family.block_head(t[0]);
    let prefactor = family.ratio(t[0], head)?.clone();
    let q1 = &family.polys()[t[0]];
    let mut triples = Vec::with_capacity(t.len() - 1);
    let mut missing = false;
    for &ti in &t[1..] {
        match strict_witness(q1, &family.polys()[ti]) {
            Some(w) => triples.push((
                w.alpha().to_u64().expect("small witness numerator"),
                w.beta().to_u64().expect("small witness denominator"),
                w.x,
            )),
            None => missing = true,
        }
    }
    let (m, a) = if missing { (0, 1) } else { m_count(&triples) };
    let ratio = Rational::new(m.into(), a.into());
    let density = if m == 0 {
        Some(Rational::zero())
    } else {
        prefactor.rational().map(|c| c * &ratio)
    };
    let approx = density
        .as_ref()
        .map(to_f64)
        .unwrap_or_else(|| prefactor.to_f64() * to_f64(&ratio));
    Ok(DensityResult {
        m,
        a,
        prefactor,
        density,
        approx,
    })
}

/// Inclusion-exclusion over the nonempty subsets of degree block `k`.
pub fn family_density(family: &FamilyStructure, k: usize) -> Result<Rational, PolyError> {
    if k >= family.block_count() {
        return Err(PolyError::IndexOutOfRange(k));
    }
    let members: Vec<usize> = family.block_range(k).collect();
    assert!(members.len() < 24, "degree block too large for inclusion-exclusion");
    let mut total = Rational::zero();
    for mask in 1u32..(1 << members.len()) {
        let subset: Vec<usize> = (0..members.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| members[b])
            .collect();
        let r = subset_density(family, &subset)?;
        let term = r
            .density
            .ok_or_else(|| PolyError::IrrationalPrefactor(r.prefactor.decimal()))?;
        if subset.len() % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

/// Membership in `q(ℕ)` for a nondecreasing stream of queries, by merging
/// against the sorted value sequence of `q`. Values before the monotone range
/// are kept in a set.
struct ImageCursor<'a> {
    q: &'a IntegerValuedPolynomial,
    early: HashSet<i128>,
    next: u64,
    current: i128,
}

impl<'a> ImageCursor<'a> {
    fn new(q: &'a IntegerValuedPolynomial) -> Result<Self, PolyError> {
        let start = q.monotone_from().max(1);
        let early = (1..start)
            .map(|n| q.value_at(n).ok_or(PolyError::Overflow(n)))
            .collect::<Result<_, _>>()?;
        let current = q.value_at(start).ok_or(PolyError::Overflow(start))?;
        Ok(ImageCursor {
            q,
            early,
            next: start,
            current,
        })
    }

    fn contains(&mut self, v: i128) -> Result<bool, PolyError> {
        if self.early.contains(&v) {
            return Ok(true);
        }
        while self.current < v {
            self.next += 1;
            self.current = self.q.value_at(self.next).ok_or(PolyError::Overflow(self.next))?;
        }
        Ok(self.current == v)
    }

    /// Binary search, for queries that arrive out of order.
    fn contains_unordered(&self, v: i128) -> Result<bool, PolyError> {
        if self.early.contains(&v) {
            return Ok(true);
        }
        let start = self.q.monotone_from().max(1);
        let eval = |n: u64| self.q.value_at(n).ok_or(PolyError::Overflow(n));
        let mut hi = start;
        while eval(hi)? < v {
            hi = hi.checked_mul(2).ok_or(PolyError::Overflow(hi))?;
        }
        let mut lo = start;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if eval(mid)? < v {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        Ok(eval(lo)? == v)
    }
}

/// `|{1 <= n <= N : q_{t_1}(n) ∈ q_{t_i}(ℕ) ∀ i}| / N`, in exact integer arithmetic.
pub fn empirical_subset_density(
    family: &FamilyStructure,
    t: &[usize],
    n_max: u64,
) -> Result<Rational, PolyError> {
    check_subset(family, t)?;
    assert!(n_max >= 1, "N must be positive");
    let q1 = &family.polys()[t[0]];
    let mut cursors = t[1..]
        .iter()
        .map(|&i| ImageCursor::new(&family.polys()[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let ordered_from = q1.monotone_from().max(1);
    let mut count: u64 = 0;
    for n in 1..=n_max {
        let v = q1.value_at(n).ok_or(PolyError::Overflow(n))?;
        let mut hit = true;
        for c in cursors.iter_mut() {
            let inside = if n >= ordered_from {
                c.contains(v)?
            } else {
                c.contains_unordered(v)?
            };
            if !inside {
                hit = false;
                break;
            }
        }
        count += hit as u64;
    }
    Ok(Rational::new(count.into(), n_max.into()))
}

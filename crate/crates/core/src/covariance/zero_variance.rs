use super::CovarianceError;
use crate::observable::MultiPolynomial;
use crate::poly::{IntegerValuedPolynomial, Poly};
use crate::process::{MomentOracle, ProcessSpec};
use crate::rational::{int, pow, to_f64, Rational};
use num_traits::{One, Signed, Zero};

/// Moving-average coefficients `a_n = s(−1)^n d_n` solving
/// `1 + E X⁴ + 2 b(k) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroVarianceSolution {
    pub coefficients: Vec<f64>,
    /// `t = s²`.
    pub t: f64,
    /// Factor applied to `d_0` before the quadratic became solvable.
    pub d0_scale: Rational,
}

fn alternating(template: &[Rational]) -> Vec<Rational> {
    template
        .iter()
        .enumerate()
        .map(|(n, d)| if n % 2 == 0 { d.clone() } else { -d })
        .collect()
}

/// Searches the alternating template for a zero of `P t² − 2 Q t + 1`, where
/// `P = E X⁴` and `−Q = b(k)` are computed exactly at unit scale.
pub fn solve_zero_variance(
    k: u32,
    innovations: &[(Rational, Rational)],
    template: &[Rational],
    max_doublings: u32,
) -> Result<ZeroVarianceSolution, CovarianceError> {
    if template.is_empty() || template.iter().all(Zero::is_zero) {
        return Err(CovarianceError::NoSolutionInTemplate(0));
    }
    let mut d = template.to_vec();
    let mut scale = Rational::one();
    for _ in 0..=max_doublings {
        let spec = ProcessSpec::moving_average(innovations.to_vec(), alternating(&d))?;
        let oracle = MomentOracle::new(&spec);
        let p = oracle.moment(&[(0, 0, 4)])?;
        let b = oracle.moment(&[(0, 0, 1), (k as i64, 0, 1)])?;
        let q = -b;
        let disc = &q * &q - &p;
        if q.is_positive() && !disc.is_negative() && p.is_positive() {
            let (qf, pf) = (to_f64(&q), to_f64(&p));
            let t = (qf - to_f64(&disc).sqrt()) / pf;
            let s = t.sqrt();
            return Ok(ZeroVarianceSolution {
                coefficients: alternating(&d).iter().map(|a| s * to_f64(a)).collect(),
                t,
                d0_scale: scale,
            });
        }
        d[0] *= int(2);
        scale *= int(2);
    }
    Err(CovarianceError::NoSolutionInTemplate(max_doublings))
}

/// The ratios `(A, B)` whose sum must not exceed 1 for the template to be
/// solvable by the shorthand fourth-moment expansion.
pub fn template_proxy(r2: &Rational, r4: &Rational, d: &[Rational]) -> (Rational, Rational) {
    let cross: Rational = d.windows(2).map(|w| &w[0] * &w[1]).sum();
    let fourth: Rational = d[1..].iter().map(|x| pow(x, 4)).sum();
    let second: Rational = d[1..].iter().map(|x| x * x).sum();
    let c2 = &cross * &cross;
    let a = r4 * fourth / &c2 / (r2 * r2);
    let b = int(3) * &second * &second / c2;
    (a, b)
}

/// A two-polynomial nonlinear scenario whose observable telescopes:
/// `q = (n², n² + 2n)`, `X(n) = ξ_n + B ξ_{n+1}`, `F(x, y) = e₀(x) − e₁(y)`
/// with `e₀(X(n)) = ξ_n` and `e₁(X(n)) = ξ_{n+1}`.
#[derive(Clone, Debug)]
pub struct CoboundaryWitness {
    pub polynomials: Vec<IntegerValuedPolynomial>,
    pub coefficients: Vec<Rational>,
    pub process: ProcessSpec,
    pub observable: MultiPolynomial,
    pub e0: Poly,
    pub e1: Poly,
}

fn lagrange(points: &[(Rational, Rational)]) -> Poly {
    let mut total = Poly::zero();
    for (i, (xi, yi)) in points.iter().enumerate() {
        let mut basis = Poly::constant(yi.clone());
        for (j, (xj, _)) in points.iter().enumerate() {
            if i != j {
                let factor = Poly::new(vec![-xj.clone(), Rational::one()]).scale(&(xi - xj).recip());
                basis = &basis * &factor;
            }
        }
        total = &total + &basis;
    }
    total
}

fn poly_in_slot(p: &Poly, slot: usize) -> MultiPolynomial {
    let x = MultiPolynomial::var(slot, 0);
    let mut out = MultiPolynomial::zero();
    let mut power = MultiPolynomial::constant(Rational::one());
    for c in p.coeffs() {
        out = &out + &power.scale(c);
        power = &power * &x;
    }
    out
}

pub fn coboundary_witness(innovations: &[(Rational, Rational)]) -> Result<CoboundaryWitness, CovarianceError> {
    let values: Vec<Rational> = innovations.iter().map(|(v, _)| v.clone()).collect();
    let mean: Rational = innovations.iter().map(|(v, p)| v * p).sum();
    if values.len() < 2 {
        return Err(CovarianceError::NoSolutionInTemplate(0));
    }
    let mut sorted = values.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != values.len() {
        return Err(CovarianceError::Process(crate::process::ProcessError::DimensionMismatch));
    }
    let range = sorted.last().unwrap() - &sorted[0];
    let gap = sorted.windows(2).map(|w| &w[1] - &w[0]).min().unwrap();
    let b = Rational::one() + range / gap;
    let coefficients = vec![Rational::one(), b.clone()];
    let process = ProcessSpec::moving_average(innovations.to_vec(), coefficients.clone())?;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for u in &values {
        for w in &values {
            let x = u + &b * w;
            first.push((x.clone(), u - &mean));
            second.push((x, w - &mean));
        }
    }
    let e0 = lagrange(&first);
    let e1 = lagrange(&second);
    let observable = &poly_in_slot(&e0, 0) - &poly_in_slot(&e1, 1);
    let polynomials = vec![
        crate::poly::validate_polynomial(&[int(0), int(0), int(1)])?,
        crate::poly::validate_polynomial(&[int(0), int(2), int(1)])?,
    ];
    Ok(CoboundaryWitness {
        polynomials,
        coefficients,
        process,
        observable,
        e0,
        e1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{analyze, EngineOptions};
    use crate::observable::reduce_setup;
    use crate::poly::analyze_family;
    use crate::rational::rat;

    fn pm() -> Vec<(Rational, Rational)> {
        vec![(int(-1), rat(1, 2)), (int(1), rat(1, 2))]
    }

    #[test]
    fn exact_moments_leave_no_solution() {
        let t = vec![int(1), int(1), int(1), int(1)];
        assert_eq!(solve_zero_variance(1, &pm(), &t, 12), Err(CovarianceError::NoSolutionInTemplate(12)));
        assert_eq!(solve_zero_variance(1, &pm(), &[int(3)], 2), Err(CovarianceError::NoSolutionInTemplate(2)));
    }

    #[test]
    fn proxy_decreases_with_d0() {
        let d = vec![int(1), int(1), rat(1, 2), rat(1, 4)];
        let (a0, b0) = template_proxy(&int(1), &int(1), &d);
        let mut big = d.clone();
        big[0] *= int(10);
        let (a1, b1) = template_proxy(&int(1), &int(1), &big);
        assert!(a1 + b1 < a0 + b0);
    }

    #[test]
    fn witness_has_zero_variance() {
        let w = coboundary_witness(&pm()).unwrap();
        assert_eq!(w.coefficients, vec![int(1), int(2)]);
        for (u, v) in [(-1, -1), (-1, 1), (1, -1), (1, 1)] {
            let x = int(u) + int(2) * int(v);
            assert_eq!(w.e0.eval(&x), int(u));
            assert_eq!(w.e1.eval(&x), int(v));
        }
        let family = analyze_family(&w.polynomials).unwrap();
        let setup = reduce_setup(&family, &w.observable, &w.process).unwrap();
        let r = analyze(&setup, &w.process, EngineOptions::default()).unwrap();
        assert_eq!(r.dmatrix[0][0].value.exact, Some(int(1)));
        assert_eq!(r.dmatrix[1][1].value.exact, Some(int(1)));
        assert_eq!(r.dmatrix[0][1].value.exact, Some(int(-1)));
        assert!(r.d2.is_exact_zero());
        let parts = setup.decompose();
        assert!(!parts.parts[0].is_zero() && !parts.parts[1].is_zero());
    }
}

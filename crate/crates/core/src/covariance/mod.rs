//! Limiting covariances `D_{i,j}`, the total variance `D²`, the increment
//! constant `Δ`, increment covariances and positivity certificates.
//!
//! Indices refer to the reduced family of a [`ReducedSetup`]. Every measure
//! integral is an exact rational; floating point enters only through
//! irrational leading-coefficient ratios and the Markov tail bound.

mod long_run;
mod value;
mod zero_variance;

pub use long_run::{long_run_sigma, LongRunEstimate, LongRunTarget};
pub use value::Value;
pub use zero_variance::{coboundary_witness, solve_zero_variance, template_proxy, CoboundaryWitness, ZeroVarianceSolution};

use crate::observable::{DecomposedObservable, MultiPolynomial, ObservableError, ReducedSetup};
use crate::poly::{equivalence_witness, m_count, ExactRoot, PolyError};
use crate::process::{DependenceHorizon, MomentOracle, ProcessError, ProcessSpec};
use crate::rational::{int, to_f64, to_i64, Rational};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovarianceError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("entry ({i}, {j}) needs two linear polynomials")]
    NotLinear { i: usize, j: usize },
    #[error("entry ({i}, {j}) needs a nonlinear q_j")]
    NotNonlinear { i: usize, j: usize },
    #[error("series for entry ({i}, {j}) needs lag {needed} above the cap {cap}")]
    TolNotMet { i: usize, j: usize, needed: u64, cap: u64 },
    #[error("times must satisfy 0 <= t1 <= t2 <= t3")]
    BadTimes,
    #[error("template admits no zero-variance solution after {0} doublings of d_0")]
    NoSolutionInTemplate(u32),
    #[error("the family has no linear polynomial")]
    NoLinearPart,
    #[error("internal: Cauchy-Schwarz fails for entry ({i}, {j})")]
    CauchySchwarzViolated { i: usize, j: usize },
    #[error("internal: negative diagonal entry {0}")]
    NegativeDiagonal(usize),
    #[error("internal: pairing lag between slots {s} and {t} is not an integer")]
    LagNotInteger { s: usize, t: usize },
    #[error("internal: series term for entry ({i}, {j}) at lag {u} past the cutoff is nonzero")]
    TruncationInvariant { i: usize, j: usize, u: i64 },
    #[error("internal: {0}")]
    AssemblyMismatch(String),
}

impl CovarianceError {
    /// Errors that indicate a defect in the engine rather than in the input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            CovarianceError::CauchySchwarzViolated { .. }
                | CovarianceError::NegativeDiagonal(_)
                | CovarianceError::LagNotInteger { .. }
                | CovarianceError::TruncationInvariant { .. }
                | CovarianceError::AssemblyMismatch(_)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    LinearSeries,
    NonlinearPairing,
    Diagonal,
    ZeroByDegree,
    ZeroByClass,
    ZeroByM,
    ZeroByIrrationalC,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::LinearSeries => "linear-series",
            Provenance::NonlinearPairing => "nonlinear-pairing",
            Provenance::Diagonal => "diagonal",
            Provenance::ZeroByDegree => "zero-by-degree",
            Provenance::ZeroByClass => "zero-by-class",
            Provenance::ZeroByM => "zero-by-M",
            Provenance::ZeroByIrrationalC => "zero-by-irrational-c",
        }
    }
}

/// One matrix entry `D_{i,j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: Value,
    pub provenance: Provenance,
    /// Bound on the neglected tail of a truncated series; 0 when exact.
    pub tail_bound: f64,
    /// Number of pairing integrals evaluated.
    pub terms: usize,
}

impl Entry {
    fn zero(provenance: Provenance) -> Self {
        Entry {
            value: Value::zero(),
            provenance,
            tail_bound: 0.0,
            terms: 0,
        }
    }
}

impl Serialize for Entry {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(5))?;
        map.serialize_entry("value", &self.value.decimal())?;
        map.serialize_entry("exact", &self.value.exact.as_ref().map(crate::rational::format_rational))?;
        map.serialize_entry("provenance", self.provenance.tag())?;
        map.serialize_entry("tail_bound", &self.tail_bound)?;
        map.serialize_entry("terms", &self.terms)?;
        map.end()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineOptions {
    /// Target bound on the neglected tail of Markov series.
    pub tol: f64,
    /// Largest lag a series may reach before [`CovarianceError::TolNotMet`].
    pub max_lag: u64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            tol: 1e-10,
            max_lag: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassContribution {
    pub members: Vec<usize>,
    pub block: usize,
    pub contribution: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub dmatrix: Vec<Vec<Entry>>,
    pub d2: Value,
    pub delta: Value,
    pub classes: Vec<ClassContribution>,
    /// `C` of the increment window; `None` when no window beyond `t1` exists.
    pub window_c: Option<f64>,
    /// `c_{head,s}` for each reduced index.
    pub head_ratios: Vec<Value>,
    pub block_of: Vec<usize>,
}

/// Computes matrix entries for one reduced setup.
pub struct CovarianceEngine<'a> {
    setup: &'a ReducedSetup,
    parts: DecomposedObservable,
    oracle: MomentOracle<'a>,
    options: EngineOptions,
}

/// Where a variable of one side of a pairing lives: block id and `Z`-time.
#[derive(Clone, Copy)]
struct Placement {
    block: usize,
    time: i64,
}

impl<'a> CovarianceEngine<'a> {
    pub fn new(setup: &'a ReducedSetup, spec: &'a ProcessSpec, options: EngineOptions) -> Self {
        CovarianceEngine {
            setup,
            parts: setup.decompose(),
            oracle: MomentOracle::new(spec),
            options,
        }
    }

    pub fn parts(&self) -> &DecomposedObservable {
        &self.parts
    }

    pub fn setup(&self) -> &ReducedSetup {
        self.setup
    }

    fn spec(&self) -> &ProcessSpec {
        self.oracle.spec()
    }

    fn check_index(&self, i: usize) -> Result<(), CovarianceError> {
        if i >= self.setup.slots() {
            return Err(CovarianceError::IndexOutOfRange(i));
        }
        Ok(())
    }

    /// `∫ F_i(x) F_j(y)` with `x_s`, `y_t` identified (at the resulting lag)
    /// whenever `p_s(c·y + x) − p_t(y)` is constant; every other variable is
    /// integrated independently.
    pub fn pairing_integral(&self, i: usize, j: usize, c: &Rational, x: &Rational) -> Result<Rational, CovarianceError> {
        let polys = self.setup.reduced.polys();
        let mut left = vec![Placement { block: 0, time: 0 }; i + 1];
        let mut right: Vec<Option<Placement>> = vec![None; j + 1];
        let mut blocks = 0;
        for (s, slot) in left.iter_mut().enumerate() {
            let composed = polys[s].poly().compose_affine(c, x);
            let mut paired = None;
            for (t, q) in polys.iter().enumerate().take(j + 1) {
                let diff = &composed - q.poly();
                if diff.is_constant() {
                    let lag = to_i64(&diff.coeff(0)).ok_or(CovarianceError::LagNotInteger { s, t })?;
                    paired = Some((t, lag));
                    break;
                }
            }
            *slot = Placement {
                block: blocks,
                time: paired.map_or(0, |p| p.1),
            };
            if let Some((t, _)) = paired {
                right[t] = Some(Placement { block: blocks, time: 0 });
            }
            blocks += 1;
        }
        let right: Vec<Placement> = right
            .into_iter()
            .map(|p| {
                p.unwrap_or_else(|| {
                    blocks += 1;
                    Placement {
                        block: blocks - 1,
                        time: 0,
                    }
                })
            })
            .collect();
        let lhs = self.placed_terms(&self.parts.parts[i], &left);
        let rhs = self.placed_terms(&self.parts.parts[j], &right);
        let mut total = Rational::zero();
        let mut grouped: Vec<Vec<(i64, usize, u32)>> = vec![Vec::new(); blocks];
        for (ca, ea) in &lhs {
            for (cb, eb) in &rhs {
                grouped.iter_mut().for_each(Vec::clear);
                for &(b, e) in ea.iter().chain(eb) {
                    grouped[b].push(e);
                }
                let mut prod = ca * cb;
                for g in grouped.iter().filter(|g| !g.is_empty()) {
                    if prod.is_zero() {
                        break;
                    }
                    prod *= self.oracle.moment(g)?;
                }
                total += prod;
            }
        }
        Ok(total)
    }

    /// Monomials of `f` with each variable resolved to `(block, (X-time, coord, exp))`.
    #[allow(clippy::type_complexity)]
    fn placed_terms(&self, f: &MultiPolynomial, place: &[Placement]) -> Vec<(Rational, Vec<(usize, (i64, usize, u32))>)> {
        f.to_terms()
            .into_iter()
            .map(|(coef, vars)| {
                let placed = vars
                    .into_iter()
                    .map(|(slot, sc, e)| {
                        let (offset, coord) = self.setup.unstack(sc);
                        let p = place[slot];
                        (p.block, (p.time + offset, coord, e))
                    })
                    .collect();
                (coef, placed)
            })
            .collect()
    }

    fn linear_coeffs(&self, i: usize) -> Option<(i64, i64)> {
        let q = &self.setup.reduced.polys()[i];
        if q.degree() != 1 {
            return None;
        }
        Some((to_i64(&q.leading())?, to_i64(&q.coeffs()[0])?))
    }

    fn sup_part(&self, i: usize) -> Rational {
        let sup = self.spec().sup_abs();
        let dim = self.setup.dim;
        self.parts.parts[i].sup_bound(|v| sup[v.coord % dim].clone())
    }

    /// Series entry for two linear members of the reduced family.
    pub fn d_linear(&self, i: usize, j: usize) -> Result<Entry, CovarianceError> {
        self.check_index(i.max(j))?;
        let (i, j) = (i.min(j), i.max(j));
        let ((ai, bi), (aj, bj)) = match (self.linear_coeffs(i), self.linear_coeffs(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(CovarianceError::NotLinear { i, j }),
        };
        if self.parts.parts[i].is_zero() || self.parts.parts[j].is_zero() {
            return Ok(Entry::zero(Provenance::LinearSeries));
        }
        let head = self.setup.reduced.block_head(i);
        let (ah, _) = self.linear_coeffs(head).expect("linear block head");
        let nu = ai.gcd(&aj);
        let prefactor = Rational::new((ah * nu).into(), (ai * aj).into());
        let c = Rational::new(aj.into(), ai.into());
        let base = bi - bj;
        let span = self.setup.d_hat.last().unwrap() - self.setup.d_hat[0];
        let term = |k: i64| -> Result<Rational, CovarianceError> {
            let x = Rational::new((nu * k).into(), ai.into());
            self.pairing_integral(i, j, &c, &x)
        };
        // k ranges over û = ν·k with lag u = û + b_i − b_j in [-reach, reach].
        let k_range = |reach: i64| (Integer::div_ceil(&(-reach - base), &nu), Integer::div_floor(&(reach - base), &nu));
        let (sum, terms, tail, exact) = match self.spec().dependence_horizon() {
            DependenceHorizon::Window(w) => {
                let reach = w as i64 + span;
                let (lo, hi) = k_range(reach);
                let mut sum = Rational::zero();
                for k in lo..=hi {
                    sum += term(k)?;
                }
                for k in (lo - 3..lo).chain(hi + 1..=hi + 3) {
                    if !term(k)?.is_zero() {
                        return Err(CovarianceError::TruncationInvariant { i, j, u: nu * k + base });
                    }
                }
                (sum, (hi - lo + 1).max(0) as usize, 0.0, true)
            }
            DependenceHorizon::Geometric { block, contraction, .. } => {
                let scale = to_f64(&prefactor).abs() * 4.0 * to_f64(&self.sup_part(i)) * to_f64(&self.sup_part(j)) * block as f64;
                let bound = |reach: u64| -> f64 {
                    if reach < span as u64 {
                        return f64::INFINITY;
                    }
                    let e = (reach + 1 - span as u64) / block;
                    scale * contraction.powi(e.min(i32::MAX as u64) as i32) / (1.0 - contraction)
                };
                let mut reach = span as u64 + block;
                if contraction > 0.0 && scale > 0.0 {
                    let e = ((self.options.tol / scale) * (1.0 - contraction)).ln() / contraction.ln();
                    reach = reach.max((span as f64 + block as f64 * e.ceil().max(0.0)) as u64);
                }
                while bound(reach) >= self.options.tol {
                    if reach > self.options.max_lag {
                        break;
                    }
                    reach += block;
                }
                if reach > self.options.max_lag {
                    return Err(CovarianceError::TolNotMet {
                        i,
                        j,
                        needed: reach,
                        cap: self.options.max_lag,
                    });
                }
                let (lo, hi) = k_range(reach as i64);
                let mut sum = Rational::zero();
                for k in lo..=hi {
                    sum += term(k)?;
                }
                (sum, (hi - lo + 1).max(0) as usize, bound(reach), false)
            }
        };
        let value = Value::exact(prefactor * sum);
        Ok(Entry {
            // A truncated series is not the exact limit.
            value: if exact { value } else { Value::approx(value.approx) },
            provenance: Provenance::LinearSeries,
            tail_bound: tail,
            terms,
        })
    }

    /// Entry for `i < j` with `deg p_j > 1`.
    pub fn d_nonlinear(&self, i: usize, j: usize) -> Result<Entry, CovarianceError> {
        self.check_index(i.max(j))?;
        let (i, j) = (i.min(j), i.max(j));
        let fam = &self.setup.reduced;
        let polys = fam.polys();
        if polys[j].degree() < 2 {
            return Err(CovarianceError::NotNonlinear { i, j });
        }
        if polys[i].degree() != polys[j].degree() {
            return Ok(Entry::zero(Provenance::ZeroByDegree));
        }
        let ratio = fam.ratio(i, j)?;
        let Some(c) = ratio.rational().cloned() else {
            return Ok(Entry::zero(Provenance::ZeroByIrrationalC));
        };
        let Some(w) = equivalence_witness(&polys[j], &polys[i]) else {
            return Ok(Entry::zero(Provenance::ZeroByClass));
        };
        let p = c.denom().to_u64().expect("small ratio denominator");
        let q = c.numer().to_u64().expect("small ratio numerator");
        let (m, _) = m_count(&[(p, q, w.x.clone())]);
        if m == 0 {
            return Ok(Entry::zero(Provenance::ZeroByM));
        }
        if self.parts.parts[i].is_zero() || self.parts.parts[j].is_zero() {
            return Ok(Entry::zero(Provenance::NonlinearPairing));
        }
        let l = self.pairing_integral(i, j, &c, &w.x)?;
        let density = Rational::new(m.into(), p.into());
        let head = fam.block_head(j);
        let value = Value::exact(l * density).mul_root(fam.ratio(j, head)?);
        Ok(Entry {
            value,
            provenance: Provenance::NonlinearPairing,
            tail_bound: 0.0,
            terms: 1,
        })
    }

    /// `D_{i,i}`: the product-measure integral for nonlinear members, the
    /// lag series for linear ones.
    pub fn d_diagonal(&self, i: usize) -> Result<Entry, CovarianceError> {
        self.check_index(i)?;
        let fam = &self.setup.reduced;
        if fam.polys()[i].degree() == 1 {
            return self.d_linear(i, i);
        }
        let f = &self.parts.parts[i];
        let square = f * f;
        let nu = &self.setup.nu;
        let integral = (0..=i).rev().fold(square, |acc, s| acc.integrate_slot(s, nu)).constant_term();
        let paired = self.pairing_integral(i, i, &Rational::one(), &Rational::zero())?;
        if paired != integral {
            return Err(CovarianceError::AssemblyMismatch(format!(
                "diagonal {i}: product integral and pairing integral differ"
            )));
        }
        let head = fam.block_head(i);
        Ok(Entry {
            value: Value::exact(integral).mul_root(fam.ratio(i, head)?),
            provenance: Provenance::Diagonal,
            tail_bound: 0.0,
            terms: 1,
        })
    }

    /// Dispatches to the right formula for `D_{i,j}`.
    pub fn entry(&self, i: usize, j: usize) -> Result<Entry, CovarianceError> {
        let (i, j) = (i.min(j), i.max(j));
        if i == j {
            return self.d_diagonal(i);
        }
        let polys = self.setup.reduced.polys();
        if polys[j].degree() == 1 {
            self.d_linear(i, j)
        } else {
            self.d_nonlinear(i, j)
        }
    }

    pub fn matrix(&self) -> Result<Vec<Vec<Entry>>, CovarianceError> {
        let l = self.setup.slots();
        let mut upper: Vec<Vec<Option<Entry>>> = vec![vec![None; l]; l];
        for i in 0..l {
            for j in i..l {
                upper[i][j] = Some(self.entry(i, j)?);
            }
        }
        Ok((0..l)
            .map(|i| {
                (0..l)
                    .map(|j| upper[i.min(j)][i.max(j)].clone().expect("filled"))
                    .collect()
            })
            .collect())
    }
}

fn value_min<'v>(a: &'v Value, b: &'v Value) -> &'v Value {
    match (&a.exact, &b.exact) {
        (Some(x), Some(y)) => {
            if x <= y {
                a
            } else {
                b
            }
        }
        _ => {
            if a.approx <= b.approx {
                a
            } else {
                b
            }
        }
    }
}

fn agree(a: &Value, b: &Value) -> bool {
    match (&a.exact, &b.exact) {
        (Some(x), Some(y)) => x == y,
        _ => (a.approx - b.approx).abs() <= 1e-9 * (1.0 + a.approx.abs().max(b.approx.abs())),
    }
}

/// Builds the report from a full matrix and checks its invariants.
pub fn assemble(setup: &ReducedSetup, dmatrix: Vec<Vec<Entry>>) -> Result<CovarianceReport, CovarianceError> {
    let fam = &setup.reduced;
    let l = fam.ell();
    if dmatrix.len() != l || dmatrix.iter().any(|r| r.len() != l) {
        return Err(CovarianceError::AssemblyMismatch("matrix shape".into()));
    }
    for i in 0..l {
        let dii = &dmatrix[i][i].value;
        if dii.exact.as_ref().map_or(dii.approx < -1e-12, Signed::is_negative) {
            return Err(CovarianceError::NegativeDiagonal(i));
        }
        for j in 0..l {
            if dmatrix[i][j].value != dmatrix[j][i].value {
                return Err(CovarianceError::AssemblyMismatch(format!("asymmetric entry ({i}, {j})")));
            }
            let (dij, djj) = (&dmatrix[i][j].value, &dmatrix[j][j].value);
            let ok = match (&dij.exact, &dii.exact, &djj.exact) {
                (Some(a), Some(b), Some(c)) => a * a <= b * c,
                _ => dij.approx * dij.approx <= dii.approx * djj.approx * (1.0 + 1e-9) + 1e-15,
            };
            if !ok {
                return Err(CovarianceError::CauchySchwarzViolated { i, j });
            }
        }
    }
    let head_ratios: Vec<Value> = (0..l)
        .map(|s| fam.ratio(fam.block_head(s), s).map(Value::from))
        .collect::<Result<_, _>>()?;
    let block_of: Vec<usize> = (0..l).map(|s| fam.block_of(s)).collect();

    let mut classes = Vec::new();
    let mut d2 = Value::zero();
    let mut diag_sum = Value::zero();
    for members in fam.classes() {
        let mut contribution = Value::zero();
        for (a, &i) in members.iter().enumerate() {
            contribution = contribution.add(&head_ratios[i].mul(&dmatrix[i][i].value));
            for &j in &members[a + 1..] {
                contribution = contribution.add(&head_ratios[i].mul(&dmatrix[i][j].value).scale(&int(2)));
            }
            diag_sum = diag_sum.add(&head_ratios[i].mul(&dmatrix[i][i].value));
        }
        d2 = d2.add(&contribution);
        classes.push(ClassContribution {
            members: members.clone(),
            block: fam.block_of(members[0]),
            contribution,
        });
    }
    let mut form = Value::zero();
    for s in 0..l {
        for t in 0..l {
            if block_of[s] == block_of[t] {
                form = form.add(&value_min(&head_ratios[s], &head_ratios[t]).mul(&dmatrix[s][t].value));
            }
        }
    }
    if !agree(&form, &d2) {
        return Err(CovarianceError::AssemblyMismatch(format!(
            "class assembly {} differs from quadratic form {}",
            d2.approx, form.approx
        )));
    }
    if d2.exact.as_ref().map_or(d2.approx < -1e-9, Signed::is_negative) {
        return Err(CovarianceError::AssemblyMismatch("negative D^2".into()));
    }
    let delta = d2.sub(&diag_sum);

    let mut window: Option<f64> = None;
    let mut degenerate = false;
    for members in fam.classes() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let c = fam.ratio(i, j)?;
                if c.rational().is_some_and(One::is_one) {
                    degenerate = true;
                }
                let v = c.to_f64();
                window = Some(window.map_or(v, |w| w.min(v)));
            }
        }
    }
    Ok(CovarianceReport {
        dmatrix,
        d2,
        delta,
        classes,
        window_c: if degenerate { None } else { window },
        head_ratios,
        block_of,
    })
}

/// Computes and assembles the full report.
pub fn analyze(setup: &ReducedSetup, spec: &ProcessSpec, options: EngineOptions) -> Result<CovarianceReport, CovarianceError> {
    let engine = CovarianceEngine::new(setup, spec, options);
    assemble(setup, engine.matrix()?)
}

/// `E[(η(t3) − η(t2)) η(t1)]`.
pub fn increment_cov(report: &CovarianceReport, t1: f64, t2: f64, t3: f64) -> Result<f64, CovarianceError> {
    if !(0.0 <= t1 && t1 <= t2 && t2 <= t3 && t3.is_finite()) {
        return Err(CovarianceError::BadTimes);
    }
    if let Some(c) = report.window_c {
        if t1 > 0.0 && t3 <= c * t1 {
            return Ok(0.5 * (t3 - t2) * report.delta.approx);
        }
    }
    Ok(increment_general(report, t1, t2, t3))
}

/// The expansion valid for all times: `Σ T_{s2,s1}(t3, t2, t1) D_{s1,s2}`.
pub fn increment_general(report: &CovarianceReport, t1: f64, t2: f64, t3: f64) -> f64 {
    let l = report.dmatrix.len();
    let mut total = 0.0;
    for s1 in 0..l {
        for s2 in 0..l {
            if report.block_of[s1] != report.block_of[s2] {
                continue;
            }
            let (c1, c2) = (report.head_ratios[s1].approx, report.head_ratios[s2].approx);
            let weight = (c2 * t3).min(c1 * t1) - (c2 * t2).min(c1 * t1);
            total += weight * report.dmatrix[s1][s2].value.approx;
        }
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Positive,
    Zero,
    BoundedBelow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositivityMethod {
    ClassGap,
    LinearCriterion,
    NumericalSigma,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityVerdict {
    pub verdict: Verdict,
    pub bound: Option<Value>,
    /// Certificate used; `None` when only the computed `D²` decides.
    pub method: Option<PositivityMethod>,
}

/// Lower bound from the class-gap rule for each nonlinear class, returning
/// the largest.
fn class_gap_bound(setup: &ReducedSetup, parts: &DecomposedObservable) -> Result<Option<Value>, CovarianceError> {
    let fam = &setup.reduced;
    let nu = &setup.nu;
    let square_integral = |s: usize| {
        let f = &parts.parts[s];
        (0..=s).rev().fold(f * f, |acc, k| acc.integrate_slot(k, nu)).constant_term()
    };
    let mut best: Option<Value> = None;
    for members in fam.classes() {
        let last = *members.last().expect("nonempty class");
        if fam.polys()[last].degree() < 2 {
            continue;
        }
        let bound = if members.len() == 1 {
            Value::exact(square_integral(last))
        } else {
            let prev = members[members.len() - 2];
            let c: &ExactRoot = fam.ratio(last, prev)?;
            let gap = Value::exact(Rational::one()).sub(&Value::from(c));
            if gap.approx <= 0.0 {
                continue;
            }
            gap.mul(&Value::exact(square_integral(last)))
        };
        if best.as_ref().is_none_or(|b| bound.approx > b.approx) {
            best = Some(bound);
        }
    }
    Ok(best)
}

pub fn positivity(
    setup: &ReducedSetup,
    parts: &DecomposedObservable,
    report: &CovarianceReport,
) -> Result<PositivityVerdict, CovarianceError> {
    let is_zero = report.d2.is_zero_within(1e-12);
    if let Some(bound) = class_gap_bound(setup, parts)? {
        let verdict = if bound.approx > 0.0 {
            Verdict::BoundedBelow
        } else if is_zero {
            Verdict::Zero
        } else {
            Verdict::Positive
        };
        return Ok(PositivityVerdict {
            verdict,
            bound: Some(bound),
            method: Some(PositivityMethod::ClassGap),
        });
    }
    let all_linear = setup.original.polys().iter().all(|q| q.degree() == 1);
    let verdict = if is_zero { Verdict::Zero } else { Verdict::Positive };
    if all_linear {
        let all_zero = report
            .dmatrix
            .iter()
            .flatten()
            .all(|e| e.value.is_zero_within(1e-12));
        if all_zero != is_zero {
            return Err(CovarianceError::AssemblyMismatch(
                "linear criterion disagrees with D^2".into(),
            ));
        }
        return Ok(PositivityVerdict {
            verdict,
            bound: None,
            method: Some(PositivityMethod::LinearCriterion),
        });
    }
    Ok(PositivityVerdict {
        verdict,
        bound: None,
        method: None,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::observable::reduce_setup;
    use crate::poly::{analyze_family, validate_polynomial};
    use crate::rational::rat;

    pub(crate) fn pm_spec() -> ProcessSpec {
        ProcessSpec::iid(vec![(vec![int(-1)], rat(1, 2)), (vec![int(1)], rat(1, 2))]).unwrap()
    }

    pub(crate) fn setup(polys: &[&[i64]], f: &[(i64, &[(usize, usize, u32)])], spec: &ProcessSpec) -> ReducedSetup {
        let ps: Vec<_> = polys
            .iter()
            .map(|c| validate_polynomial(&c.iter().map(|&v| int(v)).collect::<Vec<_>>()).unwrap())
            .collect();
        let family = analyze_family(&ps).unwrap();
        let f = MultiPolynomial::from_terms(f.iter().map(|(c, m)| (int(*c), m.to_vec()))).unwrap();
        reduce_setup(&family, &f, spec).unwrap()
    }

    fn exact(e: &Entry) -> Rational {
        e.value.exact.clone().expect("exact entry")
    }

    #[test]
    fn equivalent_nonlinear_pair() {
        let spec = pm_spec();
        let s = setup(&[&[0, 0, 1], &[1, -4, 4]], &[(1, &[(0, 0, 2), (1, 0, 1)]), (1, &[(0, 0, 1)])], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        assert_eq!(exact(&r.dmatrix[0][0]), int(1));
        assert_eq!(exact(&r.dmatrix[1][1]), rat(1, 2));
        assert_eq!(exact(&r.dmatrix[0][1]), rat(1, 2));
        assert_eq!(r.dmatrix[0][1].provenance, Provenance::NonlinearPairing);
        assert_eq!(r.d2.exact, Some(int(3)));
        assert_eq!(r.delta.exact, Some(int(1)));
        assert_eq!(r.window_c, Some(2.0));
        assert!((increment_cov(&r, 1.0, 1.5, 2.0).unwrap() - 0.25).abs() < 1e-12);
        assert!((increment_cov(&r, 1.0, 1.2, 2.5).unwrap() - 0.4).abs() < 1e-12);
        assert!((increment_general(&r, 1.0, 1.5, 2.0) - 0.25).abs() < 1e-12);
        assert_eq!(increment_cov(&r, 2.0, 1.0, 3.0), Err(CovarianceError::BadTimes));
    }

    #[test]
    fn linear_pair() {
        let spec = pm_spec();
        let s = setup(&[&[0, 1], &[0, 2]], &[(1, &[(0, 0, 1), (1, 0, 1)])], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        assert_eq!(exact(&r.dmatrix[1][1]), rat(1, 2));
        assert_eq!(exact(&r.dmatrix[0][0]), int(0));
        assert_eq!(exact(&r.dmatrix[0][1]), int(0));
        assert_eq!(r.d2.exact, Some(int(1)));
        let v = positivity(&s, &s.decompose(), &r).unwrap();
        assert_eq!((v.verdict, v.method), (Verdict::Positive, Some(PositivityMethod::LinearCriterion)));
    }

    #[test]
    fn zero_cases() {
        let spec = pm_spec();
        let s = setup(&[&[0, 0, 1], &[0, 1, 1]], &[(1, &[(0, 0, 1), (1, 0, 1)]), (1, &[(0, 0, 1)])], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        assert_eq!(r.dmatrix[0][1].provenance, Provenance::ZeroByM);
        let s = setup(&[&[0, 1], &[0, 0, 1]], &[(1, &[(0, 0, 1), (1, 0, 1)]), (1, &[(0, 0, 1)])], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        assert_eq!(r.dmatrix[0][1].provenance, Provenance::ZeroByDegree);
        let s = setup(&[&[0, 0, 1], &[0, 0, 2]], &[(1, &[(0, 0, 1), (1, 0, 1)])], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        assert_eq!(r.dmatrix[0][1].provenance, Provenance::ZeroByIrrationalC);
        assert!(!r.head_ratios[1].exact.is_some());
        let s = setup(&[&[0, 0, 1], &[0, 0, 1, 1]], &[], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        assert!(r.d2.is_exact_zero() && r.delta.is_exact_zero());
        let v = positivity(&s, &s.decompose(), &r).unwrap();
        assert_eq!(v.verdict, Verdict::Zero);
    }

    #[test]
    fn single_square_is_bounded_below() {
        let spec = pm_spec();
        let s = setup(&[&[0, 0, 1]], &[(1, &[(0, 0, 1)])], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        assert_eq!(r.d2.exact, Some(int(1)));
        let v = positivity(&s, &s.decompose(), &r).unwrap();
        assert_eq!(v.verdict, Verdict::BoundedBelow);
        assert_eq!(v.bound.unwrap().exact, Some(int(1)));
        assert_eq!(increment_cov(&r, 1.0, 2.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn telescoping_linear_is_zero() {
        let spec = pm_spec();
        let s = setup(&[&[0, 1], &[1, 1]], &[(1, &[(1, 0, 1)]), (-1, &[(0, 0, 1)])], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        assert!(r.d2.is_exact_zero());
        assert_eq!(r.dmatrix[0][0].provenance, Provenance::LinearSeries);
    }

    #[test]
    fn classical_markov() {
        let states = vec![vec![int(-1)], vec![int(1)]];
        let p = vec![vec![rat(3, 4), rat(1, 4)], vec![rat(1, 4), rat(3, 4)]];
        let spec = ProcessSpec::markov(states, p).unwrap();
        let s = setup(&[&[0, 1]], &[(1, &[(0, 0, 1)])], &spec);
        let r = analyze(&s, &spec, EngineOptions::default()).unwrap();
        // Corr at lag k is (1/2)^k: σ² = 1 + 2 Σ 2^-k = 3.
        assert!((r.d2.approx - 3.0).abs() < 1e-9);
        assert!(r.dmatrix[0][0].tail_bound < 1e-10);
    }
}

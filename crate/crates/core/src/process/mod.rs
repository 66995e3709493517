//! Finite-state stationary processes: exact joint laws and moments, and
//! counter-based samplers with random access at arbitrary time indices.

mod markov;
pub mod rng;

pub use markov::{dobrushin, mat_pow, positive_power, second_eigen_modulus, stationary, Matrix};

use crate::rational::{format_rational, pow, to_f64, Rational};
use markov::FloatPowers;
use num_traits::{One, Signed, Zero};
use rng::{draw_row, Discrete, StreamKey};
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

pub const DEFAULT_ATOM_CAP: usize = 1_000_000;
const MAX_MA_ALPHABET: usize = 1 << 16;

const STREAM_INNOVATION: u64 = 1;
const STREAM_MARKOV_INIT: u64 = 2;
const STREAM_MARKOV_STEP: u64 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error("empty support")]
    EmptySupport,
    #[error("probabilities must be nonnegative and sum to 1 (sum is {0})")]
    BadProbabilities(String),
    #[error("value vectors have inconsistent dimensions")]
    DimensionMismatch,
    #[error("transition matrix row {0} is not a probability vector")]
    NotStochastic(usize),
    #[error("transition matrix must be square with one row per state")]
    BadShape,
    #[error("no power of the transition matrix up to {0} is strictly positive")]
    NotDoeblin(usize),
    #[error("support would have {atoms} atoms, above the cap {cap}")]
    ArityTooLarge { atoms: u128, cap: usize },
    #[error("time index {0} overflows the 64-bit range")]
    TimeOverflow(i128),
    #[error("times must be sorted and distinct")]
    UnsortedTimes,
    #[error("coordinate {coord} out of range for dimension {dim}")]
    BadCoordinate { coord: usize, dim: usize },
}

/// Which family a [`ProcessSpec`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcessKind {
    Iid,
    Markov,
    MovingAverage,
}

#[derive(Clone, Debug)]
enum Model {
    Iid {
        probs: Vec<Rational>,
        draw: Discrete,
    },
    Markov {
        transition: Matrix,
        stationary: Vec<Rational>,
        init: Discrete,
        powers: FloatPowers,
        positive_power: usize,
    },
    MovingAverage {
        innovations: Vec<Rational>,
        probs: Vec<Rational>,
        coefficients: Vec<Rational>,
        draw: Discrete,
    },
}

/// A strictly stationary process with finitely many values.
///
/// Values are addressed through an alphabet: IID support points, Markov
/// states, or innovation windows of a moving average (encoded in mixed
/// radix, first innovation least significant). Samplers return alphabet
/// indices.
#[derive(Clone, Debug)]
pub struct ProcessSpec {
    model: Model,
    dimension: usize,
    alphabet: Vec<Vec<Rational>>,
    alphabet_f64: Vec<Vec<f64>>,
}

/// Decay of dependence between well-separated times.
#[derive(Clone, Debug, PartialEq)]
pub enum DependenceHorizon {
    /// Values more than `w` steps apart are independent.
    Window(u64),
    /// `rho` is the second-largest eigenvalue modulus; the total-variation
    /// distance between rows of `P^d` is at most `contraction^(d / block)`.
    Geometric { rho: f64, block: u64, contraction: f64 },
}

/// A finite law on value tuples `(x_1, …, x_k)`, each in `ℚ^℘`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointLaw {
    pub arity: usize,
    pub atoms: Vec<(Vec<Vec<Rational>>, Rational)>,
}

/// A finite law on vectors, used for integration of observables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteLaw {
    pub atoms: Vec<(Vec<Rational>, Rational)>,
}

fn check_probs(probs: &[Rational]) -> Result<(), ProcessError> {
    let total: Rational = probs.iter().sum();
    if probs.iter().any(Signed::is_negative) || !total.is_one() {
        return Err(ProcessError::BadProbabilities(format_rational(&total)));
    }
    Ok(())
}

fn to_f64_vecs(v: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.iter().map(to_f64).collect()).collect()
}

impl ProcessSpec {
    pub fn iid(support: Vec<(Vec<Rational>, Rational)>) -> Result<Self, ProcessError> {
        if support.is_empty() {
            return Err(ProcessError::EmptySupport);
        }
        let dimension = support[0].0.len();
        if dimension == 0 || support.iter().any(|(v, _)| v.len() != dimension) {
            return Err(ProcessError::DimensionMismatch);
        }
        let (alphabet, probs): (Vec<_>, Vec<_>) = support.into_iter().unzip();
        check_probs(&probs)?;
        let draw = Discrete::new(&probs.iter().map(to_f64).collect::<Vec<_>>());
        Ok(ProcessSpec {
            alphabet_f64: to_f64_vecs(&alphabet),
            alphabet,
            dimension,
            model: Model::Iid { probs, draw },
        })
    }

    pub fn markov(states: Vec<Vec<Rational>>, transition: Matrix) -> Result<Self, ProcessError> {
        if states.is_empty() {
            return Err(ProcessError::EmptySupport);
        }
        let dimension = states[0].len();
        if dimension == 0 || states.iter().any(|v| v.len() != dimension) {
            return Err(ProcessError::DimensionMismatch);
        }
        let n = states.len();
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(ProcessError::BadShape);
        }
        for (i, row) in transition.iter().enumerate() {
            if check_probs(row).is_err() {
                return Err(ProcessError::NotStochastic(i));
            }
        }
        let positive_power = positive_power(&transition).ok_or(ProcessError::NotDoeblin(n * n))?;
        let stationary = stationary(&transition).ok_or(ProcessError::NotDoeblin(n * n))?;
        let init = Discrete::new(&stationary.iter().map(to_f64).collect::<Vec<_>>());
        Ok(ProcessSpec {
            alphabet_f64: to_f64_vecs(&states),
            alphabet: states,
            dimension,
            model: Model::Markov {
                powers: FloatPowers::new(&transition),
                transition,
                stationary,
                init,
                positive_power,
            },
        })
    }

    /// `X(n) = Σ_{j=0}^{w} a_j ξ_{n+j}` with i.i.d. scalar innovations.
    pub fn moving_average(
        innovations: Vec<(Rational, Rational)>,
        coefficients: Vec<Rational>,
    ) -> Result<Self, ProcessError> {
        if innovations.is_empty() || coefficients.is_empty() {
            return Err(ProcessError::EmptySupport);
        }
        let (values, probs): (Vec<_>, Vec<_>) = innovations.into_iter().unzip();
        check_probs(&probs)?;
        let s = values.len();
        let paths = (s as u128).checked_pow(coefficients.len() as u32).unwrap_or(u128::MAX);
        if paths > MAX_MA_ALPHABET as u128 {
            return Err(ProcessError::ArityTooLarge {
                atoms: paths,
                cap: MAX_MA_ALPHABET,
            });
        }
        let alphabet: Vec<Vec<Rational>> = (0..paths as usize)
            .map(|code| {
                let mut rem = code;
                let mut x = Rational::zero();
                for a in &coefficients {
                    x += a * &values[rem % s];
                    rem /= s;
                }
                vec![x]
            })
            .collect();
        let draw = Discrete::new(&probs.iter().map(to_f64).collect::<Vec<_>>());
        Ok(ProcessSpec {
            alphabet_f64: to_f64_vecs(&alphabet),
            alphabet,
            dimension: 1,
            model: Model::MovingAverage {
                innovations: values,
                probs,
                coefficients,
                draw,
            },
        })
    }

    pub fn kind(&self) -> ProcessKind {
        match self.model {
            Model::Iid { .. } => ProcessKind::Iid,
            Model::Markov { .. } => ProcessKind::Markov,
            Model::MovingAverage { .. } => ProcessKind::MovingAverage,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn alphabet(&self) -> &[Vec<Rational>] {
        &self.alphabet
    }

    pub fn alphabet_f64(&self) -> &[Vec<f64>] {
        &self.alphabet_f64
    }

    /// IID support as `(value, probability)` pairs.
    pub fn iid_support(&self) -> Option<Vec<(Vec<Rational>, Rational)>> {
        match &self.model {
            Model::Iid { probs, .. } => Some(self.alphabet.iter().cloned().zip(probs.iter().cloned()).collect()),
            _ => None,
        }
    }

    pub fn transition(&self) -> Option<&Matrix> {
        match &self.model {
            Model::Markov { transition, .. } => Some(transition),
            _ => None,
        }
    }

    /// Innovation support and window coefficients of a moving average.
    pub fn moving_average_parts(&self) -> Option<(Vec<(Rational, Rational)>, &[Rational])> {
        match &self.model {
            Model::MovingAverage {
                innovations,
                probs,
                coefficients,
                ..
            } => Some((
                innovations.iter().cloned().zip(probs.iter().cloned()).collect(),
                coefficients,
            )),
            _ => None,
        }
    }

    /// Exact stationary law of a Markov model, state by state.
    pub fn stationary_law(&self) -> Option<&[Rational]> {
        match &self.model {
            Model::Markov { stationary, .. } => Some(stationary),
            _ => None,
        }
    }

    /// Law of `X(0)` on the alphabet.
    pub fn marginal_probs(&self) -> Vec<Rational> {
        match &self.model {
            Model::Iid { probs, .. } => probs.clone(),
            Model::Markov { stationary, .. } => stationary.clone(),
            Model::MovingAverage { probs, coefficients, .. } => {
                let s = probs.len();
                (0..self.alphabet.len())
                    .map(|code| {
                        let mut rem = code;
                        let mut p = Rational::one();
                        for _ in coefficients {
                            p *= &probs[rem % s];
                            rem /= s;
                        }
                        p
                    })
                    .collect()
            }
        }
    }

    pub fn dependence_horizon(&self) -> DependenceHorizon {
        match &self.model {
            Model::Iid { .. } => DependenceHorizon::Window(0),
            Model::MovingAverage { coefficients, .. } => DependenceHorizon::Window(coefficients.len() as u64 - 1),
            Model::Markov {
                transition,
                positive_power,
                ..
            } => {
                let block = *positive_power as u64;
                let tau = dobrushin(&mat_pow(transition, block));
                DependenceHorizon::Geometric {
                    rho: second_eigen_modulus(transition),
                    block,
                    // Round up so the bound stays an upper bound.
                    contraction: (to_f64(&tau) * (1.0 + 1e-12)).min(1.0),
                }
            }
        }
    }

    /// Largest `|x_c|` over the alphabet, per coordinate.
    pub fn sup_abs(&self) -> Vec<Rational> {
        (0..self.dimension)
            .map(|c| {
                self.alphabet
                    .iter()
                    .map(|v| v[c].abs())
                    .max()
                    .unwrap_or_else(Rational::zero)
            })
            .collect()
    }

    /// Exact law of `(X(o_1), …, X(o_k))`.
    pub fn joint_law(&self, offsets: &[i64]) -> Result<JointLaw, ProcessError> {
        self.joint_law_capped(offsets, DEFAULT_ATOM_CAP)
    }

    pub fn joint_law_capped(&self, offsets: &[i64], cap: usize) -> Result<JointLaw, ProcessError> {
        if offsets.is_empty() || offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProcessError::UnsortedTimes);
        }
        let k = offsets.len();
        let mut merged: BTreeMap<Vec<Vec<Rational>>, Rational> = BTreeMap::new();
        match &self.model {
            Model::Iid { probs, .. } => {
                let s = self.alphabet.len();
                let total = check_cap((s as u128).checked_pow(k as u32), cap)?;
                for code in 0..total {
                    let mut rem = code;
                    let mut tuple = Vec::with_capacity(k);
                    let mut p = Rational::one();
                    for _ in 0..k {
                        tuple.push(self.alphabet[rem % s].clone());
                        p *= &probs[rem % s];
                        rem /= s;
                    }
                    *merged.entry(tuple).or_insert_with(Rational::zero) += p;
                }
            }
            Model::Markov {
                transition,
                stationary,
                ..
            } => {
                let s = self.alphabet.len();
                check_cap((s as u128).checked_pow(k as u32), cap)?;
                let steps: Vec<Matrix> = offsets
                    .windows(2)
                    .map(|w| mat_pow(transition, (w[1] - w[0]) as u64))
                    .collect();
                let mut stack: Vec<(Vec<usize>, Rational)> =
                    (0..s).map(|i| (vec![i], stationary[i].clone())).collect();
                while let Some((path, p)) = stack.pop() {
                    if p.is_zero() {
                        continue;
                    }
                    if path.len() == k {
                        let tuple = path.iter().map(|&i| self.alphabet[i].clone()).collect();
                        *merged.entry(tuple).or_insert_with(Rational::zero) += p;
                        continue;
                    }
                    let last = *path.last().unwrap();
                    let step = &steps[path.len() - 1];
                    for j in 0..s {
                        let mut next = path.clone();
                        next.push(j);
                        stack.push((next, &p * &step[last][j]));
                    }
                }
            }
            Model::MovingAverage {
                innovations,
                probs,
                coefficients,
                ..
            } => {
                let w = coefficients.len() - 1;
                let base = offsets[0];
                let span = (offsets[k - 1] - base) as usize + w + 1;
                let s = innovations.len();
                let total = check_cap((s as u128).checked_pow(span as u32), cap)?;
                let mut digits = vec![0usize; span];
                for _ in 0..total {
                    let p: Rational = digits.iter().map(|&d| probs[d].clone()).product();
                    let tuple = offsets
                        .iter()
                        .map(|&o| {
                            let start = (o - base) as usize;
                            let x: Rational = coefficients
                                .iter()
                                .enumerate()
                                .map(|(j, a)| a * &innovations[digits[start + j]])
                                .sum();
                            vec![x]
                        })
                        .collect();
                    *merged.entry(tuple).or_insert_with(Rational::zero) += p;
                    increment(&mut digits, s);
                }
            }
        }
        Ok(JointLaw {
            arity: k,
            atoms: merged.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        })
    }

    /// `E[Π_i Π_c X_c(t_i)^{e_{i,c}}]` for sorted times.
    pub fn moment(&self, times: &[i64], exponents: &[Vec<u32>]) -> Result<Rational, ProcessError> {
        if times.windows(2).any(|w| w[0] > w[1]) || times.len() != exponents.len() {
            return Err(ProcessError::UnsortedTimes);
        }
        let entries: Vec<(i64, usize, u32)> = times
            .iter()
            .zip(exponents)
            .flat_map(|(&t, e)| e.iter().enumerate().map(move |(c, &x)| (t, c, x)))
            .filter(|e| e.2 > 0)
            .collect();
        MomentOracle::new(self).moment(&entries)
    }

    /// Alphabet indices of `X(t)` for sorted distinct `times`.
    pub fn sample_indices(&self, seed: u64, replicate: u64, times: &[i64]) -> Result<Vec<u32>, ProcessError> {
        let mut out = Vec::with_capacity(times.len());
        self.sample_into(seed, replicate, times, &mut out)?;
        Ok(out)
    }

    /// As [`sample_indices`](Self::sample_indices), reusing `out`.
    pub fn sample_into(
        &self,
        seed: u64,
        replicate: u64,
        times: &[i64],
        out: &mut Vec<u32>,
    ) -> Result<(), ProcessError> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProcessError::UnsortedTimes);
        }
        out.clear();
        match &self.model {
            Model::Iid { draw, .. } => {
                let key = StreamKey::new(seed, replicate, STREAM_INNOVATION);
                out.extend(times.iter().map(|&t| draw.draw(key.uniform(t as u64)) as u32));
            }
            Model::MovingAverage {
                innovations,
                coefficients,
                draw,
                ..
            } => {
                let key = StreamKey::new(seed, replicate, STREAM_INNOVATION);
                let s = innovations.len() as u32;
                let w = coefficients.len() as i64 - 1;
                if let Some(&last) = times.last() {
                    last.checked_add(w)
                        .ok_or(ProcessError::TimeOverflow(last as i128 + w as i128))?;
                }
                for &t in times {
                    let mut code = 0u32;
                    let mut radix = 1u32;
                    for j in 0..=w {
                        code += radix * draw.draw(key.uniform((t + j) as u64)) as u32;
                        radix *= s;
                    }
                    out.push(code);
                }
            }
            Model::Markov { init, powers, .. } => {
                let init_key = StreamKey::new(seed, replicate, STREAM_MARKOV_INIT);
                let step_key = StreamKey::new(seed, replicate, STREAM_MARKOV_STEP);
                let Some(&first) = times.first() else {
                    return Ok(());
                };
                let mut state = init.draw(init_key.uniform(first as u64));
                out.push(state as u32);
                let (mut scratch, mut row) = (Vec::new(), Vec::new());
                for w in times.windows(2) {
                    let gap = w[1].checked_sub(w[0]).ok_or(ProcessError::TimeOverflow(w[1] as i128 - w[0] as i128))?;
                    let u = step_key.uniform(w[1] as u64);
                    state = if gap == 1 {
                        draw_row(&powers.power(0)[state], u)
                    } else {
                        powers.advance(state, gap as u64, &mut scratch, &mut row);
                        draw_row(&row, u)
                    };
                    out.push(state as u32);
                }
            }
        }
        Ok(())
    }

    /// Value vectors of `X(t)` for sorted distinct `times`.
    pub fn sample_at(&self, seed: u64, replicate: u64, times: &[i64]) -> Result<Vec<Vec<Rational>>, ProcessError> {
        Ok(self
            .sample_indices(seed, replicate, times)?
            .into_iter()
            .map(|i| self.alphabet[i as usize].clone())
            .collect())
    }

    /// Markov chain advanced one step at a time; reference sampler for the
    /// skip-ahead path.
    pub fn sample_stepwise(&self, seed: u64, replicate: u64, times: &[i64]) -> Result<Vec<u32>, ProcessError> {
        let Model::Markov { init, powers, .. } = &self.model else {
            return self.sample_indices(seed, replicate, times);
        };
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProcessError::UnsortedTimes);
        }
        let key = StreamKey::new(seed ^ 0x5DEE_CE66_D1CE_4E5B, replicate, STREAM_MARKOV_STEP);
        let Some(&first) = times.first() else {
            return Ok(Vec::new());
        };
        let mut state = init.draw(key.uniform(u64::MAX));
        let mut out = vec![state as u32];
        let mut t = first;
        let mut counter = 0u64;
        for &next in &times[1..] {
            while t < next {
                state = draw_row(&powers.power(0)[state], key.uniform(counter));
                counter += 1;
                t += 1;
            }
            out.push(state as u32);
        }
        Ok(out)
    }
}

fn check_cap(total: Option<u128>, cap: usize) -> Result<usize, ProcessError> {
    match total {
        Some(t) if t <= cap as u128 => Ok(t as usize),
        other => Err(ProcessError::ArityTooLarge {
            atoms: other.unwrap_or(u128::MAX),
            cap,
        }),
    }
}

fn increment(digits: &mut [usize], radix: usize) {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return;
        }
        *d = 0;
    }
}

impl JointLaw {
    pub fn total(&self) -> Rational {
        self.atoms.iter().map(|(_, p)| p).sum()
    }

    /// Concatenates each tuple into one vector: coordinate `j * ℘ + c` holds
    /// coordinate `c` of the `j`-th value.
    pub fn flatten(&self) -> FiniteLaw {
        FiniteLaw {
            atoms: self
                .atoms
                .iter()
                .map(|(t, p)| (t.concat(), p.clone()))
                .collect(),
        }
    }

    /// Law of the `i`-th component.
    pub fn marginal(&self, i: usize) -> FiniteLaw {
        let mut merged: BTreeMap<Vec<Rational>, Rational> = BTreeMap::new();
        for (t, p) in &self.atoms {
            *merged.entry(t[i].clone()).or_insert_with(Rational::zero) += p;
        }
        FiniteLaw {
            atoms: merged.into_iter().collect(),
        }
    }
}

impl FiniteLaw {
    /// `E[Π x_c^{e}]` over the listed `(coordinate, exponent)` pairs.
    pub fn moment(&self, powers: &[(usize, u32)]) -> Rational {
        self.atoms
            .iter()
            .map(|(v, p)| {
                powers
                    .iter()
                    .fold(p.clone(), |acc, &(c, e)| acc * pow(&v[c], e))
            })
            .sum()
    }
}

/// Cached exact moment evaluation for one process.
pub struct MomentOracle<'a> {
    spec: &'a ProcessSpec,
    cap: usize,
    powers: RefCell<HashMap<u64, Matrix>>,
    cache: RefCell<HashMap<Vec<(i64, usize, u32)>, Rational>>,
}

impl<'a> MomentOracle<'a> {
    pub fn new(spec: &'a ProcessSpec) -> Self {
        Self::with_cap(spec, DEFAULT_ATOM_CAP)
    }

    pub fn with_cap(spec: &'a ProcessSpec, cap: usize) -> Self {
        MomentOracle {
            spec,
            cap,
            powers: RefCell::new(HashMap::new()),
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &ProcessSpec {
        self.spec
    }

    /// `E[Π X_c(t)^e]` over entries `(t, c, e)`, in any order, repeats allowed.
    pub fn moment(&self, entries: &[(i64, usize, u32)]) -> Result<Rational, ProcessError> {
        let mut key: Vec<(i64, usize, u32)> = Vec::with_capacity(entries.len());
        let mut sorted: Vec<(i64, usize, u32)> = entries.iter().copied().filter(|e| e.2 > 0).collect();
        sorted.sort_unstable();
        for (t, c, e) in sorted {
            if c >= self.spec.dimension {
                return Err(ProcessError::BadCoordinate {
                    coord: c,
                    dim: self.spec.dimension,
                });
            }
            match key.last_mut() {
                Some(last) if last.0 == t && last.1 == c => last.2 += e,
                _ => key.push((t, c, e)),
            }
        }
        if key.is_empty() {
            return Ok(Rational::one());
        }
        let t0 = key[0].0;
        for k in key.iter_mut() {
            k.0 -= t0;
        }
        if let Some(v) = self.cache.borrow().get(&key) {
            return Ok(v.clone());
        }
        let value = self.compute(&key)?;
        self.cache.borrow_mut().insert(key, value.clone());
        Ok(value)
    }

    /// Per-alphabet-letter product of the powers at one time.
    fn letter_weights(&self, group: &[(i64, usize, u32)]) -> Vec<Rational> {
        self.spec
            .alphabet
            .iter()
            .map(|v| {
                group
                    .iter()
                    .fold(Rational::one(), |acc, &(_, c, e)| acc * pow(&v[c], e))
            })
            .collect()
    }

    fn compute(&self, key: &[(i64, usize, u32)]) -> Result<Rational, ProcessError> {
        let groups: Vec<&[(i64, usize, u32)]> = key.chunk_by(|a, b| a.0 == b.0).collect();
        match &self.spec.model {
            Model::Iid { probs, .. } => Ok(groups
                .iter()
                .map(|g| {
                    self.letter_weights(g)
                        .iter()
                        .zip(probs)
                        .map(|(w, p)| w * p)
                        .sum::<Rational>()
                })
                .product()),
            Model::Markov {
                transition,
                stationary,
                ..
            } => {
                let mut v: Vec<Rational> = self
                    .letter_weights(groups[0])
                    .iter()
                    .zip(stationary)
                    .map(|(w, p)| w * p)
                    .collect();
                for pair in groups.windows(2) {
                    let gap = (pair[1][0].0 - pair[0][0].0) as u64;
                    let mut powers = self.powers.borrow_mut();
                    let pg = powers.entry(gap).or_insert_with(|| mat_pow(transition, gap));
                    v = markov::vec_mul(&v, pg);
                    drop(powers);
                    for (vi, w) in v.iter_mut().zip(self.letter_weights(pair[1])) {
                        *vi *= w;
                    }
                }
                Ok(v.into_iter().sum())
            }
            Model::MovingAverage {
                innovations,
                probs,
                coefficients,
                ..
            } => {
                let w = coefficients.len() as i64 - 1;
                // Windows [t, t+w] that do not overlap are independent.
                let mut clusters: Vec<Vec<&[(i64, usize, u32)]>> = Vec::new();
                for g in groups {
                    match clusters.last_mut() {
                        Some(cl) if g[0].0 - cl.last().unwrap()[0].0 <= w => cl.push(g),
                        _ => clusters.push(vec![g]),
                    }
                }
                let s = innovations.len();
                let mut total = Rational::one();
                for cl in clusters {
                    let base = cl[0][0].0;
                    let span = (cl.last().unwrap()[0].0 - base + w + 1) as usize;
                    let count = check_cap((s as u128).checked_pow(span as u32), self.cap)?;
                    let exps: Vec<(usize, u32)> = cl
                        .iter()
                        .map(|g| ((g[0].0 - base) as usize, g.iter().map(|e| e.2).sum()))
                        .collect();
                    let mut digits = vec![0usize; span];
                    let mut sum = Rational::zero();
                    for _ in 0..count {
                        let p: Rational = digits.iter().map(|&d| probs[d].clone()).product();
                        if !p.is_zero() {
                            let mut term = p;
                            for &(start, e) in &exps {
                                let x: Rational = coefficients
                                    .iter()
                                    .enumerate()
                                    .map(|(j, a)| a * &innovations[digits[start + j]])
                                    .sum();
                                term *= pow(&x, e);
                            }
                            sum += term;
                        }
                        increment(&mut digits, s);
                    }
                    total *= sum;
                }
                Ok(total)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    pub(crate) fn pm_one() -> ProcessSpec {
        ProcessSpec::iid(vec![(vec![int(-1)], rat(1, 2)), (vec![int(1)], rat(1, 2))]).unwrap()
    }

    fn chain() -> ProcessSpec {
        ProcessSpec::markov(
            vec![vec![int(0)], vec![int(1)]],
            vec![vec![rat(1, 3), rat(2, 3)], vec![rat(1, 2), rat(1, 2)]],
        )
        .unwrap()
    }

    fn ma11() -> ProcessSpec {
        ProcessSpec::moving_average(vec![(int(-1), rat(1, 2)), (int(1), rat(1, 2))], vec![int(1), int(1)]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(matches!(
            ProcessSpec::iid(vec![(vec![int(0)], rat(1, 3))]),
            Err(ProcessError::BadProbabilities(_))
        ));
        assert!(matches!(
            ProcessSpec::markov(
                vec![vec![int(0)], vec![int(1)]],
                vec![vec![int(1), int(0)], vec![int(0), int(1)]]
            ),
            Err(ProcessError::NotDoeblin(4))
        ));
        assert!(matches!(
            ProcessSpec::markov(vec![vec![int(0)]], vec![vec![rat(1, 2)]]),
            Err(ProcessError::NotStochastic(0))
        ));
    }

    #[test]
    fn joint_law_examples() {
        let u01 = ProcessSpec::iid(vec![(vec![int(0)], rat(1, 2)), (vec![int(1)], rat(1, 2))]).unwrap();
        let law = u01.joint_law(&[0, 5]).unwrap();
        assert_eq!(law.atoms.len(), 4);
        assert!(law.atoms.iter().all(|(_, p)| *p == rat(1, 4)));

        let law = chain().joint_law(&[0, 1]).unwrap();
        let expect = [
            ((0, 0), rat(3, 7) * rat(1, 3)),
            ((0, 1), rat(3, 7) * rat(2, 3)),
            ((1, 0), rat(4, 7) * rat(1, 2)),
            ((1, 1), rat(4, 7) * rat(1, 2)),
        ];
        for ((a, b), p) in expect {
            let key = vec![vec![int(a)], vec![int(b)]];
            assert_eq!(law.atoms.iter().find(|(t, _)| *t == key).unwrap().1, p);
        }

        let law = ma11().joint_law(&[0, 1]).unwrap();
        assert_eq!(law.total(), int(1));
        let p = |a: i64, b: i64| {
            law.atoms
                .iter()
                .find(|(t, _)| *t == vec![vec![int(a)], vec![int(b)]])
                .map(|x| x.1.clone())
                .unwrap_or_else(Rational::zero)
        };
        assert_eq!(p(2, 2), rat(1, 8));
        assert_eq!(p(0, 0), rat(2, 8));
        assert_eq!(p(2, -2), int(0));
    }

    #[test]
    fn moments() {
        assert_eq!(pm_one().moment(&[0], &[vec![2]]).unwrap(), int(1));
        assert_eq!(pm_one().moment(&[0, 7], &[vec![1], vec![1]]).unwrap(), int(0));
        assert_eq!(ma11().moment(&[0, 1], &[vec![1], vec![1]]).unwrap(), int(1));
        // E X(0) X(1) for the chain: P(1,1) = 4/7 * 1/2.
        assert_eq!(chain().moment(&[0, 1], &[vec![1], vec![1]]).unwrap(), rat(2, 7));
    }

    #[test]
    fn horizons() {
        assert_eq!(pm_one().dependence_horizon(), DependenceHorizon::Window(0));
        let ma = ProcessSpec::moving_average(vec![(int(1), int(1))], vec![int(1), int(1), int(1)]).unwrap();
        assert_eq!(ma.dependence_horizon(), DependenceHorizon::Window(2));
        let flat = ProcessSpec::markov(
            vec![vec![int(0)], vec![int(1)]],
            vec![vec![rat(1, 2), rat(1, 2)], vec![rat(1, 2), rat(1, 2)]],
        )
        .unwrap();
        match flat.dependence_horizon() {
            DependenceHorizon::Geometric { rho, .. } => assert_eq!(rho, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_access_is_pure() {
        let ma = ma11();
        let a = ma.sample_indices(9, 4, &[5]).unwrap();
        let b = ma.sample_indices(9, 4, &[5, 6]).unwrap();
        assert_eq!(a[0], b[0]);
        let iid = pm_one();
        assert_eq!(iid.sample_at(1, 0, &[1, 1_000_000_000]).unwrap().len(), 2);
        assert_eq!(iid.sample_indices(1, 0, &[3, 2]), Err(ProcessError::UnsortedTimes));
        assert!(matches!(
            ma.sample_indices(1, 0, &[i64::MAX]),
            Err(ProcessError::TimeOverflow(_))
        ));
    }
}

//! Simulation of `ξ_N(t)` and its components, replicate statistics and the
//! statistical checks of the limit theorems.

mod compiled;
pub mod stats;

pub use compiled::{CompiledFn, MAX_TABLE};
pub use stats::Estimate;

use crate::covariance::{increment_cov, CovarianceError, CovarianceReport};
use crate::observable::ReducedSetup;
use crate::process::{ProcessError, ProcessSpec};
use crate::rational::{to_f64, Rational};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use stats::Neumaier;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error("invalid simulation plan: {0}")]
    BadPlan(String),
    #[error("time q({n}) = {value} does not fit in 63 bits")]
    TimeOverflow { n: u64, value: i128 },
    #[error("engine D^2 is zero; normality is not claimed")]
    DegenerateVariance,
    #[error("normality check needs at least {needed} replicates, got {got}")]
    TooFewReplicates { needed: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationPlan {
    pub n_ladder: Vec<u64>,
    pub replicates: u64,
    pub t_grid: Vec<f64>,
    pub increments: Vec<(f64, f64, f64)>,
    pub seed: u64,
    /// Estimate the component covariance matrices at grid points.
    pub components: bool,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        let bad = |m: &str| Err(MonteCarloError::BadPlan(m.into()));
        if self.n_ladder.is_empty() || self.n_ladder.contains(&0) {
            return bad("N ladder must be nonempty with N >= 1");
        }
        if self.replicates < 2 {
            return bad("at least two replicates are required");
        }
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        if !sorted(&self.t_grid) || self.t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("t grid must be sorted, finite and nonnegative");
        }
        if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return bad("N ladder must be strictly increasing");
        }
        for &(a, b, c) in &self.increments {
            if !(0.0 <= a && a <= b && b <= c && c.is_finite()) {
                return bad("increment triples need 0 <= t1 <= t2 <= t3");
            }
        }
        if self.threads == Some(0) {
            return bad("thread count must be positive");
        }
        Ok(())
    }

    /// All times at which paths are recorded, with `t = 1` always present.
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.t_grid.clone();
        ts.push(1.0);
        for &(a, b, c) in &self.increments {
            ts.extend([a, b, c]);
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Shortest decimal rendering of `t` read back as an exact rational.
pub fn decimal_rational(t: f64) -> Rational {
    let text = format!("{t:e}");
    let (mantissa, exp) = text.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (neg, digits) = mantissa.strip_prefix('-').map_or((false, mantissa), |m| (true, m));
    let (int_part, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let numer: BigInt = format!("{int_part}{frac}").parse().expect("digits");
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if shift >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, shift as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-shift) as usize))
    };
    if neg {
        r = -r;
    }
    r
}

/// `⌊N t c⌋`, exact when `c` is rational.
fn floor_count(n: u64, t: f64, c: &crate::poly::ExactRoot) -> u64 {
    match c.rational() {
        Some(c) => (Rational::from_integer(n.into()) * decimal_rational(t) * c)
            .floor()
            .to_integer()
            .to_u64()
            .expect("nonnegative count"),
        None => (n as f64 * t * c.to_f64()).floor() as u64,
    }
}

/// One replicate's paths at the requested times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiPaths {
    pub t: Vec<f64>,
    /// `components[s][k] = ξ_{s,N}(t_k)`.
    pub components: Vec<Vec<f64>>,
    /// `ξ_N(t_k)` evaluated from the original observable.
    pub total: Vec<f64>,
    /// `Σ_s` of the component sums up to `[N t_k]`.
    pub reconstructed: Vec<f64>,
}

impl XiPaths {
    /// Largest per-time mismatch between the direct and reconstructed totals.
    pub fn identity_residual(&self) -> f64 {
        self.total
            .iter()
            .zip(&self.reconstructed)
            .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
            .fold(0.0, f64::max)
    }
}

/// Precomputed sampling layout for one `(setup, N, times)`.
pub struct PathSampler<'a> {
    spec: &'a ProcessSpec,
    n: u64,
    times: Vec<f64>,
    dh: usize,
    sample_times: Vec<i64>,
    /// `pos[r][(n − 1)·|D̂| + j]` indexes `sample_times` for `p_r(n) + d̂_j`.
    pos: Vec<Vec<u32>>,
    parts: Vec<CompiledFn>,
    direct: CompiledFn,
    /// `(reduced slot, offset index)` for each original slot.
    original: Vec<(usize, usize)>,
    fbar: f64,
    need: Vec<u64>,
    total_need: u64,
    comp_counts: Vec<Vec<(u64, usize)>>,
    total_counts: Vec<(u64, usize)>,
}

impl<'a> PathSampler<'a> {
    pub fn new(setup: &'a ReducedSetup, spec: &'a ProcessSpec, n: u64, times: &[f64]) -> Result<Self, MonteCarloError> {
        if n == 0 || times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(MonteCarloError::BadPlan("N >= 1 and finite nonnegative times required".into()));
        }
        let fam = &setup.reduced;
        let l = setup.slots();
        let dh = setup.d_hat.len();
        let dim = setup.dim;
        let decomposed = setup.decompose();
        let mut comp_counts = Vec::with_capacity(l);
        for s in 0..l {
            let c = fam.ratio(s, fam.block_head(s)).map_err(CovarianceError::from)?;
            let mut v: Vec<(u64, usize)> = times.iter().enumerate().map(|(k, &t)| (floor_count(n, t, c), k)).collect();
            v.sort_unstable();
            comp_counts.push(v);
        }
        let one = crate::poly::ExactRoot::new(Rational::from_integer(1.into()), 1);
        let mut total_counts: Vec<(u64, usize)> = times.iter().enumerate().map(|(k, &t)| (floor_count(n, t, &one), k)).collect();
        total_counts.sort_unstable();
        let total_need = total_counts.last().map_or(0, |c| c.0);
        let need: Vec<u64> = comp_counts
            .iter()
            .map(|c| c.last().map_or(0, |x| x.0).max(total_need))
            .collect();
        // Slot r is read by every part s >= r.
        let mut slot_need = vec![0u64; l];
        for r in 0..l {
            slot_need[r] = need[r..].iter().copied().max().unwrap_or(0);
        }

        let mut all: Vec<(i64, u32, u64)> = Vec::new();
        let mut pos: Vec<Vec<u32>> = Vec::with_capacity(l);
        for (r, &upto) in slot_need.iter().enumerate() {
            let q = &fam.polys()[r];
            pos.push(vec![0; upto as usize * dh]);
            for m in 1..=upto {
                let value = q.value_at(m).unwrap_or(i128::MAX);
                for (j, d) in setup.d_hat.iter().enumerate() {
                    let t = value + *d as i128;
                    if t > (i64::MAX >> 1) as i128 || t < 0 {
                        return Err(MonteCarloError::TimeOverflow { n: m, value: t });
                    }
                    all.push((t as i64, r as u32, (m - 1) * dh as u64 + j as u64));
                }
            }
        }
        all.sort_unstable_by_key(|e| e.0);
        let mut sample_times: Vec<i64> = Vec::with_capacity(all.len());
        for (t, r, idx) in all {
            if sample_times.last() != Some(&t) {
                sample_times.push(t);
            }
            pos[r as usize][idx as usize] = (sample_times.len() - 1) as u32;
        }

        let parts = decomposed
            .parts
            .iter()
            .enumerate()
            .map(|(s, f)| CompiledFn::new(f, (s + 1) * dh, spec, |slot, sc| (slot * dh + sc / dim, sc % dim)))
            .collect();
        let orig = &setup.original;
        let original: Vec<(usize, usize)> = (0..orig.ell())
            .map(|i| {
                let j = setup.d_hat.binary_search(&orig.offset_of(i)).expect("offset in D-hat");
                (orig.group_of(i), j)
            })
            .collect();
        let direct = CompiledFn::new(&setup.f, orig.ell(), spec, |slot, c| (slot, c));
        Ok(PathSampler {
            spec,
            n,
            times: times.to_vec(),
            dh,
            sample_times,
            pos,
            parts,
            direct,
            original,
            fbar: to_f64(&decomposed.fbar),
            need,
            total_need,
            comp_counts,
            total_counts,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.sample_times.len()
    }

    pub fn run(&self, seed: u64, replicate: u64) -> Result<XiPaths, MonteCarloError> {
        let mut letters = Vec::with_capacity(self.sample_times.len());
        self.spec.sample_into(seed, replicate, &self.sample_times, &mut letters)?;
        let l = self.parts.len();
        let k = self.times.len();
        let scale = 1.0 / (self.n as f64).sqrt();
        let mut components = vec![vec![0.0; k]; l];
        let mut total = vec![0.0; k];
        let mut reconstructed = vec![0.0; k];
        let mut acc = vec![Neumaier::default(); l];
        let mut recon = Neumaier::default();
        let mut direct = Neumaier::default();
        let mut next: Vec<usize> = vec![0; l];
        let mut next_total = 0usize;
        let horizon = self.need.iter().copied().max().unwrap_or(0);
        let dh = self.dh;

        let record = |list: &[(u64, usize)], cursor: &mut usize, count: u64, value: f64, out: &mut [f64]| {
            while *cursor < list.len() && list[*cursor].0 == count {
                out[list[*cursor].1] = value * scale;
                *cursor += 1;
            }
        };
        for s in 0..l {
            record(&self.comp_counts[s], &mut next[s], 0, 0.0, &mut components[s]);
        }
        record(&self.total_counts, &mut next_total, 0, 0.0, &mut total);
        let mut next_recon = next_total;

        for m in 1..=horizon {
            let row = (m - 1) as usize * dh;
            for s in 0..l {
                if m > self.need[s] {
                    continue;
                }
                let v = self.parts[s].eval(|p| letters[self.pos[p / dh][row + p % dh] as usize]);
                acc[s].add(v);
                if m <= self.total_need {
                    recon.add(v);
                }
                record(&self.comp_counts[s], &mut next[s], m, acc[s].value(), &mut components[s]);
            }
            if m <= self.total_need {
                let v = self.direct.eval(|p| {
                    let (r, j) = self.original[p];
                    letters[self.pos[r][row + j] as usize]
                });
                direct.add(v - self.fbar);
                record(&self.total_counts, &mut next_recon, m, recon.value(), &mut reconstructed);
                record(&self.total_counts, &mut next_total, m, direct.value(), &mut total);
            }
        }
        Ok(XiPaths {
            t: self.times.clone(),
            components,
            total,
            reconstructed,
        })
    }
}

pub fn simulate_xi(
    setup: &ReducedSetup,
    spec: &ProcessSpec,
    n: u64,
    t_grid: &[f64],
    seed: u64,
    replicate: u64,
) -> Result<XiPaths, MonteCarloError> {
    PathSampler::new(setup, spec, n, t_grid)?.run(seed, replicate)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCovariance {
    pub t: f64,
    pub total_variance: Estimate,
    /// Empty unless the plan asks for components.
    pub components: Vec<Vec<Estimate>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementEstimate {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderReport {
    pub n: u64,
    pub replicates: u64,
    /// Time points sampled, as sampled positions.
    pub samples_per_replicate: usize,
    pub var_total: Estimate,
    /// `Var(ξ_{s,N}(1))` per component.
    pub var_components: Vec<Estimate>,
    pub grid: Vec<GridCovariance>,
    pub increments: Vec<IncrementEstimate>,
    pub max_identity_residual: f64,
    pub lag1_correlation: f64,
    /// Replicate values of `ξ_N(1)`.
    #[serde(skip)]
    pub total_at_one: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub ladder: Vec<LadderReport>,
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, MonteCarloError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    builder.build().map_err(|e| MonteCarloError::BadPlan(e.to_string()))
}

/// Runs `R` replicates per ladder entry; replicate ids never repeat across
/// the ladder.
pub fn replicate_stats(setup: &ReducedSetup, spec: &ProcessSpec, plan: &SimulationPlan) -> Result<SimulationReport, MonteCarloError> {
    plan.validate()?;
    let times = plan.times();
    let at = |t: f64| times.iter().position(|&x| x == t).expect("time recorded");
    let one = at(1.0);
    let workers = pool(plan.threads)?;
    let l = setup.slots();
    let mut ladder = Vec::with_capacity(plan.n_ladder.len());
    for (rung, &n) in plan.n_ladder.iter().enumerate() {
        let sampler = PathSampler::new(setup, spec, n, &times)?;
        let base = rung as u64 * plan.replicates;
        let paths: Vec<XiPaths> = workers.install(|| {
            (0..plan.replicates)
                .into_par_iter()
                .map(|r| sampler.run(plan.seed, base + r))
                .collect::<Result<_, _>>()
        })?;
        let series = |f: &dyn Fn(&XiPaths) -> f64| -> Vec<f64> { paths.iter().map(f).collect() };
        let total_at_one = series(&|p| p.total[one]);
        let var_components = (0..l).map(|s| stats::variance(&series(&|p| p.components[s][one]))).collect();
        let grid = plan
            .t_grid
            .iter()
            .map(|&t| {
                let k = at(t);
                let comps: Vec<Vec<f64>> = (0..l).map(|s| series(&|p| p.components[s][k])).collect();
                GridCovariance {
                    t,
                    total_variance: stats::variance(&series(&|p| p.total[k])),
                    components: if plan.components {
                        (0..l)
                            .map(|a| (0..l).map(|b| stats::covariance(&comps[a], &comps[b])).collect())
                            .collect()
                    } else {
                        Vec::new()
                    },
                }
            })
            .collect();
        let increments = plan
            .increments
            .iter()
            .map(|&(t1, t2, t3)| {
                let (k1, k2, k3) = (at(t1), at(t2), at(t3));
                let inc = series(&|p| p.total[k3] - p.total[k2]);
                let base = series(&|p| p.total[k1]);
                IncrementEstimate {
                    t1,
                    t2,
                    t3,
                    estimate: stats::covariance(&inc, &base),
                }
            })
            .collect();
        ladder.push(LadderReport {
            n,
            replicates: plan.replicates,
            samples_per_replicate: sampler.sample_count(),
            var_total: stats::variance(&total_at_one),
            var_components,
            grid,
            increments,
            max_identity_residual: paths.iter().map(XiPaths::identity_residual).fold(0.0, f64::max),
            lag1_correlation: stats::lag1_correlation(&total_at_one),
            total_at_one,
        });
    }
    Ok(SimulationReport { seed: plan.seed, ladder })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementCheck {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub empirical: Estimate,
    pub predicted: f64,
    pub z: f64,
}

pub fn increment_check(ladder: &LadderReport, report: &CovarianceReport) -> Result<Vec<IncrementCheck>, MonteCarloError> {
    ladder
        .increments
        .iter()
        .map(|inc| {
            let predicted = increment_cov(report, inc.t1, inc.t2, inc.t3)?;
            Ok(IncrementCheck {
                t1: inc.t1,
                t2: inc.t2,
                t3: inc.t3,
                empirical: inc.estimate,
                predicted,
                z: inc.estimate.z(predicted),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalityStats {
    pub ks: f64,
    pub ks_threshold: f64,
    pub skew: f64,
    pub skew_threshold: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_threshold: f64,
    pub pass: bool,
}

pub const MIN_NORMALITY_REPLICATES: usize = 500;

/// Standardizes by the engine variance and compares with the normal law.
pub fn normality_check(samples: &[f64], d2: f64) -> Result<NormalityStats, MonteCarloError> {
    if d2.abs() <= 1e-12 {
        return Err(MonteCarloError::DegenerateVariance);
    }
    if samples.len() < MIN_NORMALITY_REPLICATES {
        return Err(MonteCarloError::TooFewReplicates {
            needed: MIN_NORMALITY_REPLICATES,
            got: samples.len(),
        });
    }
    let sd = d2.sqrt();
    let z: Vec<f64> = samples.iter().map(|x| x / sd).collect();
    let ks = stats::ks_normal(&z);
    let (skew, excess_kurtosis) = stats::skew_kurtosis(&z);
    let r = samples.len() as f64;
    let ks_threshold = 1.5 * 1.63 / r.sqrt();
    // Moment bounds never tighter than four sampling standard errors.
    let skew_threshold = 0.15f64.max(4.0 * (6.0 / r).sqrt());
    let kurtosis_threshold = 0.3f64.max(4.0 * (24.0 / r).sqrt());
    Ok(NormalityStats {
        ks,
        ks_threshold,
        skew,
        skew_threshold,
        excess_kurtosis,
        kurtosis_threshold,
        pass: ks < ks_threshold && skew.abs() < skew_threshold && excess_kurtosis.abs() < kurtosis_threshold,
    })
}

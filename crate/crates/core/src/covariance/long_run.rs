use super::CovarianceError;
use crate::montecarlo::stats::{self, Estimate, Neumaier};
use crate::montecarlo::{CompiledFn, MonteCarloError};
use crate::observable::ReducedSetup;
use crate::process::ProcessSpec;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LongRunTarget {
    /// Sum of all parts of the linear block.
    Full,
    /// A single part `F_s` of the linear block.
    Part(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongRunEstimate {
    pub target: LongRunTarget,
    pub n: Vec<u64>,
    /// `Var(Σ_{n≤N} Z_n) / N` per ladder entry.
    pub ladder: Vec<Estimate>,
    /// Intercept of the fit `a + b/N`.
    pub sigma2: Estimate,
    pub slope: f64,
}

/// Estimates the long-run variance of `Z_n = Σ_s F_s(Y^{(0)}(p_0(n)), …, Y^{(s)}(p_s(n)))`
/// over the linear block, with one independent copy `Y^{(r)}` of the stacked
/// process per slot.
pub fn long_run_sigma(
    setup: &ReducedSetup,
    spec: &ProcessSpec,
    target: LongRunTarget,
    n_ladder: &[u64],
    replicates: u64,
    seed: u64,
) -> Result<LongRunEstimate, MonteCarloError> {
    let fam = &setup.reduced;
    if fam.block_degrees()[0] != 1 {
        return Err(CovarianceError::NoLinearPart.into());
    }
    let linear = fam.block_range(0);
    let selected: Vec<usize> = match target {
        LongRunTarget::Full => linear.clone().collect(),
        LongRunTarget::Part(s) if linear.contains(&s) => vec![s],
        LongRunTarget::Part(s) => return Err(CovarianceError::IndexOutOfRange(s).into()),
    };
    if n_ladder.is_empty() || n_ladder.contains(&0) || replicates < 3 {
        return Err(MonteCarloError::BadPlan("long-run ladder needs N >= 1 and at least 3 replicates".into()));
    }
    let top = *selected.last().unwrap();
    let slots = top + 1;
    let dh = setup.d_hat.len();
    let dim = setup.dim;
    let parts = setup.decompose();
    let compiled: Vec<CompiledFn> = selected
        .iter()
        .map(|&s| CompiledFn::new(&parts.parts[s], (s + 1) * dh, spec, |slot, sc| (slot * dh + sc / dim, sc % dim)))
        .collect();

    let mut ladder = Vec::with_capacity(n_ladder.len());
    for (rung, &n) in n_ladder.iter().enumerate() {
        let times: Vec<(Vec<i64>, Vec<u32>)> = (0..slots)
            .map(|r| {
                let q = &fam.polys()[r];
                let mut ts = Vec::with_capacity(n as usize * dh);
                for m in 1..=n {
                    let v = q.value_at(m).unwrap_or(i128::MAX);
                    for d in &setup.d_hat {
                        let t = v + *d as i128;
                        if t > (i64::MAX >> 1) as i128 || t < 0 {
                            return Err(MonteCarloError::TimeOverflow { n: m, value: t });
                        }
                        ts.push(t as i64);
                    }
                }
                let mut unique = ts.clone();
                unique.sort_unstable();
                unique.dedup();
                let index = ts.iter().map(|t| unique.binary_search(t).unwrap() as u32).collect();
                Ok((unique, index))
            })
            .collect::<Result<_, _>>()?;
        let base = rung as u64 * replicates;
        let sums: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|rep| {
                let letters: Vec<Vec<u32>> = times
                    .iter()
                    .enumerate()
                    .map(|(r, (ts, _))| spec.sample_indices(seed, (base + rep) * slots as u64 + r as u64, ts))
                    .collect::<Result<_, _>>()?;
                let mut acc = Neumaier::default();
                for m in 0..n as usize {
                    for f in &compiled {
                        acc.add(f.eval(|p| {
                            let r = p / dh;
                            letters[r][times[r].1[m * dh + p % dh] as usize]
                        }));
                    }
                }
                Ok(acc.value())
            })
            .collect::<Result<_, MonteCarloError>>()?;
        let v = stats::variance(&sums);
        ladder.push(Estimate {
            value: v.value / n as f64,
            std_error: v.std_error / n as f64,
        });
    }
    let x: Vec<f64> = n_ladder.iter().map(|&n| 1.0 / n as f64).collect();
    let y: Vec<f64> = ladder.iter().map(|e| e.value).collect();
    let se: Vec<f64> = ladder.iter().map(|e| e.std_error).collect();
    let (a, sa, b) = stats::weighted_line(&x, &y, &se);
    Ok(LongRunEstimate {
        target,
        n: n_ladder.to_vec(),
        ladder,
        sigma2: Estimate { value: a, std_error: sa },
        slope: b,
    })
}

use super::{Scenario, ScenarioError};
use crate::covariance::{
    analyze, increment_cov, long_run_sigma, positivity, CovarianceReport, LongRunTarget, PositivityVerdict, Value,
};
use crate::montecarlo::{
    increment_check, normality_check, replicate_stats, Estimate, MonteCarloError, NormalityStats,
    SimulationReport, MIN_NORMALITY_REPLICATES,
};
use crate::poly::{empirical_subset_density, family_density, subset_density, PolyError};
use crate::rational::{format_rational, to_f64, Rational};
use serde::Serialize;

/// A ratio `c_{i,j}` of the original family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioSummary {
    pub i: usize,
    pub j: usize,
    pub value: String,
    pub exact: Option<String>,
    pub provenance: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureSummary {
    pub polynomials: Vec<String>,
    pub ell: usize,
    pub ell_hat: usize,
    pub r_indices: Vec<usize>,
    pub d_hat: Vec<i64>,
    pub degree_blocks: Vec<usize>,
    pub block_degrees: Vec<usize>,
    pub classes: Vec<Vec<usize>>,
    pub ratios: Vec<RatioSummary>,
    pub reduced_family: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementPrediction {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub name: String,
    pub structure: StructureSummary,
    pub fbar: String,
    /// Whether each part `F_s` is a nonzero polynomial.
    pub nonzero_parts: Vec<bool>,
    pub covariance: CovarianceReport,
    pub positivity: PositivityVerdict,
    pub increments: Vec<IncrementPrediction>,
}

/// One comparison line; `pass` is `None` for informational rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub predicted: Option<f64>,
    pub z: Option<f64>,
    pub pass: Option<bool>,
}

impl Row {
    fn info(name: String, estimate: Estimate) -> Self {
        Row {
            name,
            estimate: estimate.value,
            std_error: Some(estimate.std_error),
            predicted: None,
            z: None,
            pass: None,
        }
    }

    fn compare(name: String, estimate: Estimate, predicted: f64, z_max: f64, checked: bool) -> Self {
        let z = estimate.z(predicted);
        Row {
            name,
            estimate: estimate.value,
            std_error: Some(estimate.std_error),
            predicted: Some(predicted),
            z: Some(z),
            pass: checked.then_some(z.abs() <= z_max),
        }
    }
}

fn structure(sc: &Scenario) -> StructureSummary {
    let fam = &sc.family;
    let mut ratios = Vec::new();
    for k in 0..fam.block_count() {
        for i in fam.block_range(k) {
            for j in fam.block_range(k) {
                let c = fam.ratio(i, j).expect("same block");
                ratios.push(RatioSummary {
                    i,
                    j,
                    value: c.decimal(),
                    exact: c.rational().map(format_rational),
                    provenance: "leading-ratio",
                });
            }
        }
    }
    StructureSummary {
        polynomials: fam.polys().iter().map(|p| p.to_string()).collect(),
        ell: fam.ell(),
        ell_hat: fam.ell_hat(),
        r_indices: fam.r_indices().to_vec(),
        d_hat: fam.d_hat().to_vec(),
        degree_blocks: fam.degree_blocks().to_vec(),
        block_degrees: fam.block_degrees().to_vec(),
        classes: fam.classes().to_vec(),
        ratios,
        reduced_family: fam.reduced_family().iter().map(|p| p.to_string()).collect(),
    }
}

pub fn run_analyze(sc: &Scenario) -> Result<AnalyzeReport, ScenarioError> {
    let report = analyze(&sc.setup, &sc.spec, sc.config.engine_options())?;
    let parts = sc.setup.decompose();
    let verdict = positivity(&sc.setup, &parts, &report)?;
    let increments = match &sc.config.simulation {
        Some(sim) => sim
            .increments
            .iter()
            .map(|&[t1, t2, t3]| {
                Ok(IncrementPrediction {
                    t1,
                    t2,
                    t3,
                    predicted: increment_cov(&report, t1, t2, t3)?,
                })
            })
            .collect::<Result<_, ScenarioError>>()?,
        None => Vec::new(),
    };
    Ok(AnalyzeReport {
        name: sc.name().to_string(),
        structure: structure(sc),
        fbar: format_rational(&parts.fbar),
        nonzero_parts: parts.parts.iter().map(|p| !p.is_zero()).collect(),
        covariance: report,
        positivity: verdict,
        increments,
    })
}

impl AnalyzeReport {
    pub fn rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        let exact = |name: String, v: &Value| Row {
            name,
            estimate: v.approx,
            std_error: None,
            predicted: None,
            z: None,
            pass: None,
        };
        for (i, row) in self.covariance.dmatrix.iter().enumerate() {
            for (j, e) in row.iter().enumerate().skip(i) {
                rows.push(exact(format!("D[{i}][{j}]"), &e.value));
            }
        }
        rows.push(exact("D2".into(), &self.covariance.d2));
        rows.push(exact("Delta".into(), &self.covariance.delta));
        for inc in &self.increments {
            rows.push(Row {
                name: format!("increment({},{},{})", inc.t1, inc.t2, inc.t3),
                estimate: inc.predicted,
                std_error: None,
                predicted: None,
                z: None,
                pass: None,
            });
        }
        rows
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateReport {
    pub name: String,
    pub simulation: SimulationReport,
}

pub fn run_simulate(sc: &Scenario) -> Result<SimulateReport, ScenarioError> {
    let mut plan = sc.config.simulation_plan()?;
    plan.threads = sc.threads;
    Ok(SimulateReport {
        name: sc.name().to_string(),
        simulation: replicate_stats(&sc.setup, &sc.spec, &plan)?,
    })
}

impl SimulateReport {
    pub fn rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        for rung in &self.simulation.ladder {
            let n = rung.n;
            rows.push(Row::info(format!("var_total@N={n}"), rung.var_total));
            for (s, v) in rung.var_components.iter().enumerate() {
                rows.push(Row::info(format!("var_component[{s}]@N={n}"), *v));
            }
            for g in &rung.grid {
                for (a, row) in g.components.iter().enumerate() {
                    for (b, e) in row.iter().enumerate().skip(a) {
                        rows.push(Row::info(format!("cov[{a}][{b}]@t={},N={n}", g.t), *e));
                    }
                }
            }
            for inc in &rung.increments {
                rows.push(Row::info(
                    format!("increment({},{},{})@N={n}", inc.t1, inc.t2, inc.t3),
                    inc.estimate,
                ));
            }
        }
        rows
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongRunRow {
    pub n: Vec<u64>,
    pub ladder: Vec<Estimate>,
    pub row: Row,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub name: String,
    pub d2: Value,
    pub degenerate: bool,
    pub rows: Vec<Row>,
    pub normality: Option<NormalityStats>,
    pub long_run: Option<LongRunRow>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.pass == Some(false))
    }
}

/// Simulates the scenario and compares every estimate with its prediction.
/// Only the largest `N` of the ladder is held to the `z` threshold.
pub fn run_verify(sc: &Scenario) -> Result<VerifyReport, ScenarioError> {
    let analysis = run_analyze(sc)?;
    let report = &analysis.covariance;
    let sim = run_simulate(sc)?.simulation;
    let cfg = &sc.config.analysis;
    let z_max = cfg.z_threshold;
    let d2 = report.d2.approx;
    let degenerate = report.d2.is_zero_within(1e-10);
    let d = |a: usize, b: usize| report.dmatrix[a][b].value.approx;
    let last = sim.ladder.len() - 1;
    let mut rows = Vec::new();

    for (k, rung) in sim.ladder.iter().enumerate() {
        let checked = k == last;
        let n = rung.n;
        let mut total = Row::compare(format!("var_total@N={n}"), rung.var_total, d2, z_max, checked && !degenerate);
        if degenerate {
            total.pass = None;
        }
        rows.push(total);
        for (s, v) in rung.var_components.iter().enumerate() {
            let zero = d(s, s).abs() <= 1e-10;
            rows.push(Row::compare(format!("var_component[{s}]@N={n}"), *v, d(s, s), z_max, checked && !zero));
        }
        for g in &rung.grid {
            for (a, row) in g.components.iter().enumerate() {
                for (b, e) in row.iter().enumerate().skip(a + 1) {
                    rows.push(Row::compare(format!("cov[{a}][{b}]@t={},N={n}", g.t), *e, g.t * d(a, b), z_max, checked));
                }
            }
        }
        for inc in increment_check(rung, report)? {
            rows.push(Row::compare(
                format!("increment({},{},{})@N={n}", inc.t1, inc.t2, inc.t3),
                inc.empirical,
                inc.predicted,
                z_max,
                checked,
            ));
        }
        rows.push(Row {
            name: format!("identity_residual@N={n}"),
            estimate: rung.max_identity_residual,
            std_error: None,
            predicted: Some(0.0),
            z: None,
            pass: Some(rung.max_identity_residual <= cfg.identity_tolerance),
        });
        let se = 1.0 / (rung.replicates as f64).sqrt();
        rows.push(Row::compare(
            format!("lag1_correlation@N={n}"),
            Estimate {
                value: rung.lag1_correlation,
                std_error: se,
            },
            0.0,
            z_max,
            checked,
        ));
    }

    // A vanishing limit carries an O(1/N) bias, so only the trend is tested.
    let decreasing = |v: &[Estimate]| v.windows(2).all(|w| w[1].value < w[0].value);
    if sim.ladder.len() > 1 {
        for s in 0..sc.setup.slots() {
            if d(s, s).abs() <= 1e-10 {
                let v: Vec<Estimate> = sim.ladder.iter().map(|r| r.var_components[s]).collect();
                rows.push(Row {
                    name: format!("var_component[{s}]_decreasing"),
                    estimate: v[last].value,
                    std_error: Some(v[last].std_error),
                    predicted: Some(0.0),
                    z: None,
                    pass: Some(v[last].value == 0.0 || decreasing(&v)),
                });
            }
        }
    }
    let vars: Vec<Estimate> = sim.ladder.iter().map(|r| r.var_total).collect();
    if vars.len() > 1 {
        let joint = |a: &Estimate, b: &Estimate| a.std_error.hypot(b.std_error);
        if degenerate {
            let ok = vars[last].value == 0.0 || decreasing(&vars);
            rows.push(Row {
                name: "var_total_decreasing".into(),
                estimate: vars[last].value,
                std_error: Some(vars[last].std_error),
                predicted: Some(0.0),
                z: None,
                pass: Some(ok),
            });
        } else {
            let ok = vars
                .windows(2)
                .all(|w| (w[1].value - d2).abs() <= (w[0].value - d2).abs() + 2.0 * joint(&w[0], &w[1]));
            rows.push(Row {
                name: "var_convergence".into(),
                estimate: (vars[last].value - d2).abs(),
                std_error: Some(vars[last].std_error),
                predicted: Some(0.0),
                z: None,
                pass: Some(ok),
            });
        }
    }

    let top = &sim.ladder[last];
    let normality = if !degenerate && top.total_at_one.len() >= MIN_NORMALITY_REPLICATES {
        match normality_check(&top.total_at_one, d2) {
            Ok(stats) => {
                rows.push(Row {
                    name: format!("ks_distance@N={}", top.n),
                    estimate: stats.ks,
                    std_error: None,
                    predicted: Some(stats.ks_threshold),
                    z: None,
                    pass: Some(stats.pass),
                });
                Some(stats)
            }
            Err(MonteCarloError::DegenerateVariance | MonteCarloError::TooFewReplicates { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };

    let long_run = match &sc.config.long_run {
        Some(lr) => {
            let target = match lr.part {
                None => LongRunTarget::Full,
                Some(0) => return Err(ScenarioError::Config("long_run.part is one-based".into())),
                Some(p) => LongRunTarget::Part(p - 1),
            };
            let est = long_run_sigma(&sc.setup, &sc.spec, target, &lr.n_ladder, lr.replicates, lr.seed)?;
            let expect = lr
                .expect
                .as_deref()
                .map(|e| super::rational("long_run.expect", e).map(|r| to_f64(&r)))
                .transpose()?;
            let row = match expect {
                Some(p) => Row::compare("long_run_sigma2".into(), est.sigma2, p, z_max, true),
                None => Row::info("long_run_sigma2".into(), est.sigma2),
            };
            rows.push(row.clone());
            Some(LongRunRow {
                n: est.n,
                ladder: est.ladder,
                row,
            })
        }
        None => None,
    };

    let pass = rows.iter().all(|r| r.pass != Some(false));
    Ok(VerifyReport {
        name: sc.name().to_string(),
        d2: report.d2.clone(),
        degenerate,
        rows,
        normality,
        long_run,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityRow {
    /// Zero-based indices into the original family.
    pub subset: Vec<usize>,
    pub m: u64,
    pub a: u64,
    /// `M/a`: density along `q_{t_1}` itself.
    pub own_density: String,
    pub prefactor: Value,
    /// Density relative to the head of the degree block.
    pub density: Value,
    pub empirical: String,
    pub empirical_value: f64,
    pub difference: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockDensity {
    pub block: usize,
    /// `None` when an irrational prefactor enters the inclusion-exclusion.
    pub density: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub name: String,
    pub n_max: u64,
    pub tolerance: f64,
    pub rows: Vec<DensityRow>,
    pub blocks: Vec<BlockDensity>,
    pub pass: bool,
}

impl DensityReport {
    pub fn rows(&self) -> Vec<Row> {
        self.rows
            .iter()
            .map(|r| Row {
                name: format!("density{:?}", r.subset),
                estimate: r.empirical_value,
                std_error: None,
                predicted: Some(decimal_f64(&r.own_density)),
                z: None,
                pass: Some(r.pass),
            })
            .collect()
    }
}

fn decimal_f64(text: &str) -> f64 {
    crate::rational::parse_rational(text).map(|r| to_f64(&r)).unwrap_or(f64::NAN)
}

/// Compares analytic subset densities with exact counts up to `n_max`.
pub fn run_density(sc: &Scenario) -> Result<DensityReport, ScenarioError> {
    let fam = &sc.family;
    let (n_max, tolerance, subsets) = match &sc.config.density {
        Some(d) => (d.n_max, d.tolerance, d.subsets.clone()),
        None => (100_000, 1e-3, Vec::new()),
    };
    if n_max == 0 {
        return Err(ScenarioError::Config("density.n_max must be positive".into()));
    }
    let subsets: Vec<Vec<usize>> = if subsets.is_empty() {
        let mut all = Vec::new();
        for k in 0..fam.block_count() {
            let r: Vec<usize> = fam.block_range(k).collect();
            for (x, &i) in r.iter().enumerate() {
                for &j in &r[x + 1..] {
                    all.push(vec![i, j]);
                }
            }
        }
        all
    } else {
        subsets
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&i| {
                        if i == 0 || i > fam.ell() {
                            Err(ScenarioError::Config(format!("density subset index {i} out of range")))
                        } else {
                            Ok(i - 1)
                        }
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?
    };
    let mut rows = Vec::with_capacity(subsets.len());
    for t in subsets {
        let analytic = subset_density(fam, &t)?;
        let empirical = empirical_subset_density(fam, &t, n_max)?;
        let own = Rational::new(analytic.m.into(), analytic.a.into());
        let difference = to_f64(&(&empirical - &own)).abs();
        rows.push(DensityRow {
            m: analytic.m,
            a: analytic.a,
            own_density: format_rational(&own),
            prefactor: Value::from(&analytic.prefactor),
            density: match &analytic.density {
                Some(d) => Value::exact(d.clone()),
                None => Value::approx(analytic.approx),
            },
            empirical: format_rational(&empirical),
            empirical_value: to_f64(&empirical),
            difference,
            pass: difference <= tolerance,
            subset: t,
        });
    }
    let blocks = (0..fam.block_count())
        .map(|k| match family_density(fam, k) {
            Ok(d) => Ok(BlockDensity {
                block: k,
                density: Some(format_rational(&d)),
            }),
            Err(PolyError::IrrationalPrefactor(_)) => Ok(BlockDensity { block: k, density: None }),
            Err(e) => Err(ScenarioError::from(e)),
        })
        .collect::<Result<_, _>>()?;
    let pass = rows.iter().all(|r| r.pass);
    Ok(DensityReport {
        name: sc.name().to_string(),
        n_max,
        tolerance,
        rows,
        blocks,
        pass,
    })
}

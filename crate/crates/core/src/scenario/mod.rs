//! Scenario configuration: a strict JSON schema for models, simulation plans
//! and checks, the built-in scenarios, and the report runners shared by the
//! command-line tool and the test suites.

mod builtins;
mod run;

pub use builtins::{builtin, builtin_names};
pub use run::{
    run_analyze, run_density, run_simulate, run_verify, AnalyzeReport, DensityReport, DensityRow, LongRunRow,
    BlockDensity, IncrementPrediction, RatioSummary, Row, SimulateReport, StructureSummary, VerifyReport,
};

use crate::covariance::{CovarianceError, EngineOptions};
use crate::montecarlo::{MonteCarloError, SimulationPlan};
use crate::observable::{reduce_setup, MultiPolynomial, ObservableError, ReducedSetup};
use crate::poly::{analyze_family, FamilyStructure, IntegerValuedPolynomial, PolyError};
use crate::process::{ProcessError, ProcessSpec};
use crate::rational::{format_rational, parse_rational, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown built-in scenario {0:?}")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

fn process_code(e: &ProcessError) -> i32 {
    match e {
        ProcessError::NotDoeblin(_) | ProcessError::ArityTooLarge { .. } | ProcessError::TimeOverflow(_) => EXIT_MODEL,
        ProcessError::UnsortedTimes | ProcessError::BadCoordinate { .. } => EXIT_INTERNAL,
        _ => EXIT_CONFIG,
    }
}

fn poly_code(e: &PolyError) -> i32 {
    match e {
        PolyError::Parse(_) | PolyError::Empty | PolyError::EmptyFamily | PolyError::BadSubset | PolyError::IndexOutOfRange(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_MODEL,
    }
}

fn observable_code(e: &ObservableError) -> i32 {
    match e {
        ObservableError::StackTooLarge { .. } => EXIT_MODEL,
        ObservableError::Process(p) => process_code(p),
        _ => EXIT_CONFIG,
    }
}

fn covariance_code(e: &CovarianceError) -> i32 {
    if e.is_internal() {
        return EXIT_INTERNAL;
    }
    match e {
        CovarianceError::Poly(p) => poly_code(p),
        CovarianceError::Process(p) => process_code(p),
        CovarianceError::Observable(o) => observable_code(o),
        CovarianceError::TolNotMet { .. } | CovarianceError::NoSolutionInTemplate(_) => EXIT_MODEL,
        CovarianceError::NotLinear { .. } | CovarianceError::NotNonlinear { .. } => EXIT_INTERNAL,
        _ => EXIT_CONFIG,
    }
}

impl ScenarioError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Json(_) | ScenarioError::Config(_) | ScenarioError::UnknownBuiltin(_) => EXIT_CONFIG,
            ScenarioError::Poly(e) => poly_code(e),
            ScenarioError::Process(e) => process_code(e),
            ScenarioError::Observable(e) => observable_code(e),
            ScenarioError::Covariance(e) => covariance_code(e),
            ScenarioError::MonteCarlo(e) => match e {
                MonteCarloError::Process(p) => process_code(p),
                MonteCarloError::Covariance(c) => covariance_code(c),
                MonteCarloError::BadPlan(_) => EXIT_CONFIG,
                MonteCarloError::TimeOverflow { .. } => EXIT_MODEL,
                MonteCarloError::DegenerateVariance | MonteCarloError::TooFewReplicates { .. } => EXIT_INTERNAL,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Ascending coefficient lists, one per polynomial.
    pub polynomials: Vec<Vec<String>>,
    pub process: ProcessConfig,
    pub observable: ObservableConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_run: Option<LongRunConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessConfig {
    Iid {
        support: Vec<AtomConfig>,
    },
    Markov {
        states: Vec<Vec<String>>,
        transition: Vec<Vec<String>>,
    },
    MovingAverage {
        innovations: Vec<ScalarAtom>,
        coefficients: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub value: Vec<String>,
    pub prob: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarAtom {
    pub value: String,
    pub prob: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    pub monomials: Vec<MonomialConfig>,
}

/// `coef · Π x_{slot,coord}^exp` with one-based slots and coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub coef: String,
    pub powers: Vec<[u64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_ladder: Vec<u64>,
    pub replicates: u64,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub increments: Vec<[f64; 3]>,
    pub seed: u64,
    #[serde(default = "yes")]
    pub components: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Tail bound for truncated covariance series.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_lag")]
    pub max_lag: u64,
    /// Largest accepted `|z|` in verification.
    #[serde(default = "default_z")]
    pub z_threshold: f64,
    /// Largest accepted relative residual of the path decomposition.
    #[serde(default = "default_identity")]
    pub identity_tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_lag() -> u64 {
    10_000
}
fn default_z() -> f64 {
    4.0
}
fn default_identity() -> f64 {
    1e-9
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            tolerance: default_tolerance(),
            max_lag: default_max_lag(),
            z_threshold: default_z(),
            identity_tolerance: default_identity(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub n_max: u64,
    /// One-based subsets of the polynomial list; all same-degree pairs when empty.
    #[serde(default)]
    pub subsets: Vec<Vec<usize>>,
    #[serde(default = "default_density_tolerance")]
    pub tolerance: f64,
}

fn default_density_tolerance() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongRunConfig {
    pub n_ladder: Vec<u64>,
    pub replicates: u64,
    /// One-based part index; the whole linear block when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<usize>,
    /// Expected `σ²` as an exact rational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn rational(field: &str, text: &str) -> Result<Rational, ScenarioError> {
    parse_rational(text).map_err(|e| ScenarioError::Config(format!("{field}: {e}")))
}

fn rationals(field: &str, texts: &[String]) -> Result<Vec<Rational>, ScenarioError> {
    texts.iter().map(|t| rational(field, t)).collect()
}

fn canon(field: &str, text: &str) -> Result<String, ScenarioError> {
    rational(field, text).map(|r| format_rational(&r))
}

fn canon_all(field: &str, texts: &[String]) -> Result<Vec<String>, ScenarioError> {
    texts.iter().map(|t| canon(field, t)).collect()
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| ScenarioError::Json(e.to_string()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Equivalent config with reduced rationals and a merged, sorted observable.
    pub fn canonical(&self) -> Result<Self, ScenarioError> {
        let process = match &self.process {
            ProcessConfig::Iid { support } => ProcessConfig::Iid {
                support: support
                    .iter()
                    .map(|a| {
                        Ok(AtomConfig {
                            value: canon_all("process.support.value", &a.value)?,
                            prob: canon("process.support.prob", &a.prob)?,
                        })
                    })
                    .collect::<Result<_, ScenarioError>>()?,
            },
            ProcessConfig::Markov { states, transition } => ProcessConfig::Markov {
                states: states.iter().map(|s| canon_all("process.states", s)).collect::<Result<_, _>>()?,
                transition: transition
                    .iter()
                    .map(|r| canon_all("process.transition", r))
                    .collect::<Result<_, _>>()?,
            },
            ProcessConfig::MovingAverage { innovations, coefficients } => ProcessConfig::MovingAverage {
                innovations: innovations
                    .iter()
                    .map(|a| {
                        Ok(ScalarAtom {
                            value: canon("process.innovations.value", &a.value)?,
                            prob: canon("process.innovations.prob", &a.prob)?,
                        })
                    })
                    .collect::<Result<_, ScenarioError>>()?,
                coefficients: canon_all("process.coefficients", coefficients)?,
            },
        };
        Ok(ScenarioConfig {
            polynomials: self
                .polynomials
                .iter()
                .map(|p| {
                    let mut c = canon_all("polynomials", p)?;
                    while c.len() > 1 && c.last().map(String::as_str) == Some("0") {
                        c.pop();
                    }
                    Ok(c)
                })
                .collect::<Result<_, ScenarioError>>()?,
            process,
            observable: observable_config(&self.observable_polynomial()?),
            ..self.clone()
        })
    }

    pub fn canonical_json(&self) -> Result<String, ScenarioError> {
        Ok(self.canonical()?.to_json())
    }

    pub fn observable_polynomial(&self) -> Result<MultiPolynomial, ScenarioError> {
        let mut terms = Vec::with_capacity(self.observable.monomials.len());
        for m in &self.observable.monomials {
            let coef = rational("observable.coef", &m.coef)?;
            let powers = m
                .powers
                .iter()
                .map(|&[slot, coord, e]| {
                    if slot == 0 || coord == 0 {
                        return Err(ScenarioError::Config("observable slots and coordinates are one-based".into()));
                    }
                    let e = u32::try_from(e).map_err(|_| ScenarioError::Config("exponent too large".into()))?;
                    Ok((slot as usize - 1, coord as usize - 1, e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            terms.push((coef, powers));
        }
        Ok(MultiPolynomial::from_terms(terms)?)
    }

    pub fn process_spec(&self) -> Result<ProcessSpec, ScenarioError> {
        Ok(match &self.process {
            ProcessConfig::Iid { support } => {
                let atoms = support
                    .iter()
                    .map(|a| Ok((rationals("process.support.value", &a.value)?, rational("process.support.prob", &a.prob)?)))
                    .collect::<Result<Vec<_>, ScenarioError>>()?;
                ProcessSpec::iid(atoms)?
            }
            ProcessConfig::Markov { states, transition } => ProcessSpec::markov(
                states.iter().map(|s| rationals("process.states", s)).collect::<Result<_, _>>()?,
                transition
                    .iter()
                    .map(|r| rationals("process.transition", r))
                    .collect::<Result<_, _>>()?,
            )?,
            ProcessConfig::MovingAverage { innovations, coefficients } => ProcessSpec::moving_average(
                innovations
                    .iter()
                    .map(|a| {
                        Ok((
                            rational("process.innovations.value", &a.value)?,
                            rational("process.innovations.prob", &a.prob)?,
                        ))
                    })
                    .collect::<Result<_, ScenarioError>>()?,
                rationals("process.coefficients", coefficients)?,
            )?,
        })
    }

    pub fn family(&self) -> Result<FamilyStructure, ScenarioError> {
        let polys = self
            .polynomials
            .iter()
            .map(|c| IntegerValuedPolynomial::from_strings(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(analyze_family(&polys)?)
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            tol: self.analysis.tolerance,
            max_lag: self.analysis.max_lag,
        }
    }

    pub fn simulation_plan(&self) -> Result<SimulationPlan, ScenarioError> {
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| ScenarioError::Config("missing \"simulation\" section".into()))?;
        let plan = SimulationPlan {
            n_ladder: sim.n_ladder.clone(),
            replicates: sim.replicates,
            t_grid: sim.t_grid.clone(),
            increments: sim.increments.iter().map(|&[a, b, c]| (a, b, c)).collect(),
            seed: sim.seed,
            components: sim.components,
            threads: None,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Serializes an observable with one-based slots and coordinates.
pub fn observable_config(f: &MultiPolynomial) -> ObservableConfig {
    ObservableConfig {
        monomials: f
            .to_terms()
            .into_iter()
            .map(|(c, vars)| MonomialConfig {
                coef: format_rational(&c),
                powers: vars
                    .into_iter()
                    .map(|(s, k, e)| [s as u64 + 1, k as u64 + 1, e as u64])
                    .collect(),
            })
            .collect(),
    }
}

/// Runtime overrides from the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<u64>,
    pub threads: Option<usize>,
}

/// A config turned into validated model objects.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub family: FamilyStructure,
    pub spec: ProcessSpec,
    pub observable: MultiPolynomial,
    pub setup: ReducedSetup,
    pub threads: Option<usize>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        Self::with_overrides(config, &Overrides::default())
    }

    pub fn with_overrides(mut config: ScenarioConfig, overrides: &Overrides) -> Result<Self, ScenarioError> {
        if config.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Config(format!("unsupported schema_version {}", config.schema_version)));
        }
        if let Some(sim) = config.simulation.as_mut() {
            if let Some(seed) = overrides.seed {
                sim.seed = seed;
            }
            if let Some(r) = overrides.replicates {
                sim.replicates = r;
            }
        }
        if let Some(lr) = config.long_run.as_mut() {
            if let Some(seed) = overrides.seed {
                lr.seed = seed;
            }
        }
        if overrides.threads == Some(0) {
            return Err(ScenarioError::Config("thread count must be positive".into()));
        }
        let a = &config.analysis;
        if !(a.tolerance > 0.0 && a.z_threshold > 0.0 && a.identity_tolerance > 0.0) {
            return Err(ScenarioError::Config("analysis tolerances must be positive".into()));
        }
        let family = config.family()?;
        let spec = config.process_spec()?;
        let observable = config.observable_polynomial()?;
        let setup = reduce_setup(&family, &observable, &spec)?;
        Ok(Scenario {
            config,
            family,
            spec,
            observable,
            setup,
            threads: overrides.threads,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Self::new(ScenarioConfig::from_json(text)?)
    }

    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        Self::new(builtin(name)?)
    }

    pub fn name(&self) -> &str {
        self.config.name.as_deref().unwrap_or("unnamed")
    }
}

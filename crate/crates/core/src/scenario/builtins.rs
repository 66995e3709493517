use super::{
    observable_config, AnalysisConfig, AtomConfig, DensityConfig, LongRunConfig, MonomialConfig, ObservableConfig,
    ProcessConfig, ScalarAtom, ScenarioConfig, ScenarioError, SimulationConfig, SCHEMA_VERSION,
};
use crate::covariance::coboundary_witness;
use crate::rational::{format_rational, int, rat};

const NAMES: &[&str] = &[
    "classical-clt",
    "odd-squares-density",
    "degree-mismatch",
    "equivalent-nonlinear",
    "constant-difference",
    "linear-pair",
    "sec8-zero-variance",
    "zero-by-m",
    "coboundary",
    "markov-linear-pair",
];

pub fn builtin_names() -> &'static [&'static str] {
    NAMES
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn polys(ps: &[&[&str]]) -> Vec<Vec<String>> {
    ps.iter().map(|p| strings(p)).collect()
}

fn plus_minus_one() -> ProcessConfig {
    ProcessConfig::Iid {
        support: vec![
            AtomConfig {
                value: strings(&["-1"]),
                prob: "1/2".into(),
            },
            AtomConfig {
                value: strings(&["1"]),
                prob: "1/2".into(),
            },
        ],
    }
}

/// Monomials with one-based `(slot, coord, exponent)` powers.
fn observable(terms: &[(&str, &[[u64; 3]])]) -> ObservableConfig {
    ObservableConfig {
        monomials: terms
            .iter()
            .map(|(c, p)| MonomialConfig {
                coef: c.to_string(),
                powers: p.to_vec(),
            })
            .collect(),
    }
}

fn simulation(n_ladder: &[u64], replicates: u64, t_grid: &[f64], increments: &[[f64; 3]]) -> Option<SimulationConfig> {
    Some(SimulationConfig {
        n_ladder: n_ladder.to_vec(),
        replicates,
        t_grid: t_grid.to_vec(),
        increments: increments.to_vec(),
        seed: 20_240_601,
        components: true,
    })
}

fn base(name: &str, description: &str, polynomials: Vec<Vec<String>>, process: ProcessConfig, obs: ObservableConfig) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: Some(name.into()),
        description: Some(description.into()),
        polynomials,
        process,
        observable: obs,
        simulation: None,
        analysis: AnalysisConfig::default(),
        density: None,
        long_run: None,
    }
}

/// The named built-in scenario as a config.
pub fn builtin(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let config = match name {
        "classical-clt" => ScenarioConfig {
            simulation: simulation(&[1_000, 10_000], 2_000, &[0.5, 1.0], &[[0.5, 0.75, 1.0]]),
            long_run: Some(LongRunConfig {
                n_ladder: vec![100, 400, 1_600],
                replicates: 400,
                part: None,
                expect: Some("1".into()),
                seed: 7,
            }),
            ..base(
                name,
                "q(n) = n, F(x) = x, i.i.d. uniform on {-1, 1}",
                polys(&[&["0", "1"]]),
                plus_minus_one(),
                observable(&[("1", &[[1, 1, 1]])]),
            )
        },
        "odd-squares-density" => ScenarioConfig {
            simulation: simulation(&[1_000, 10_000], 1_000, &[1.0], &[]),
            density: Some(DensityConfig {
                n_max: 1_000_000,
                subsets: vec![vec![1, 2]],
                tolerance: 1e-3,
            }),
            ..base(
                name,
                "q = (n^2, (2n-1)^2): half of all squares are odd squares",
                polys(&[&["0", "0", "1"], &["1", "-4", "4"]]),
                plus_minus_one(),
                observable(&[("1", &[[1, 1, 1]]), ("1", &[[2, 1, 1]])]),
            )
        },
        "degree-mismatch" => ScenarioConfig {
            simulation: simulation(&[1_000, 10_000], 2_000, &[0.5, 1.0], &[]),
            ..base(
                name,
                "q = (n, n^2), F(x, y) = x + xy: components of different degree decorrelate",
                polys(&[&["0", "1"], &["0", "0", "1"]]),
                plus_minus_one(),
                observable(&[("1", &[[1, 1, 1]]), ("1", &[[1, 1, 1], [2, 1, 1]])]),
            )
        },
        "equivalent-nonlinear" => ScenarioConfig {
            simulation: simulation(
                &[1_000, 10_000],
                2_000,
                &[0.5, 1.0],
                &[[1.0, 1.5, 2.0], [1.0, 1.2, 2.5], [0.5, 1.0, 2.0]],
            ),
            density: Some(DensityConfig {
                n_max: 1_000_000,
                subsets: Vec::new(),
                tolerance: 1e-3,
            }),
            ..base(
                name,
                "q = (n^2, (2n-1)^2), F(x, y) = x^2 y + x, i.i.d. uniform on {-1, 1}",
                polys(&[&["0", "0", "1"], &["1", "-4", "4"]]),
                plus_minus_one(),
                observable(&[("1", &[[1, 1, 2], [2, 1, 1]]), ("1", &[[1, 1, 1]])]),
            )
        },
        "constant-difference" => ScenarioConfig {
            simulation: simulation(&[1_000, 10_000], 2_000, &[0.5, 1.0], &[[0.5, 0.75, 1.0]]),
            ..base(
                name,
                "q = (n, n + 1), F(x, y) = xy: one stacked component",
                polys(&[&["0", "1"], &["1", "1"]]),
                plus_minus_one(),
                observable(&[("1", &[[1, 1, 1], [2, 1, 1]])]),
            )
        },
        "linear-pair" => ScenarioConfig {
            simulation: simulation(&[1_000, 10_000], 2_000, &[0.5, 1.0], &[[0.5, 0.75, 1.0]]),
            ..base(
                name,
                "q = (n, 2n), F(x, y) = xy, i.i.d. uniform on {-1, 1}",
                polys(&[&["0", "1"], &["0", "2"]]),
                plus_minus_one(),
                observable(&[("1", &[[1, 1, 1], [2, 1, 1]])]),
            )
        },
        "sec8-zero-variance" => {
            let innovations = vec![(int(-1), rat(1, 2)), (int(1), rat(1, 2))];
            let w = coboundary_witness(&innovations)?;
            ScenarioConfig {
                simulation: simulation(&[1_000, 10_000, 100_000], 200, &[1.0], &[]),
                ..base(
                    name,
                    "q = (n^2, n^2 + 2n), moving average X(n) = e(n) + 2 e(n+1), F(x, y) = e0(x) - e1(y)",
                    w.polynomials.iter().map(|p| p.to_strings()).collect(),
                    ProcessConfig::MovingAverage {
                        innovations: innovations
                            .iter()
                            .map(|(v, p)| ScalarAtom {
                                value: format_rational(v),
                                prob: format_rational(p),
                            })
                            .collect(),
                        coefficients: w.coefficients.iter().map(format_rational).collect(),
                    },
                    observable_config(&w.observable),
                )
            }
        }
        "zero-by-m" => ScenarioConfig {
            simulation: simulation(&[1_000, 10_000], 2_000, &[1.0], &[]),
            density: Some(DensityConfig {
                n_max: 1_000_000,
                subsets: vec![vec![1, 2]],
                tolerance: 1e-3,
            }),
            ..base(
                name,
                "q = (n^2, n^2 + n): equivalent polynomials whose value sets never meet",
                polys(&[&["0", "0", "1"], &["0", "1", "1"]]),
                plus_minus_one(),
                observable(&[("1", &[[1, 1, 1]]), ("1", &[[2, 1, 1]])]),
            )
        },
        "coboundary" => ScenarioConfig {
            simulation: simulation(&[1_000, 10_000], 1_000, &[1.0], &[]),
            long_run: Some(LongRunConfig {
                n_ladder: vec![100, 400, 1_600],
                replicates: 400,
                part: None,
                expect: Some("0".into()),
                seed: 7,
            }),
            ..base(
                name,
                "q = (n, n + 1), F(x, y) = y - x: a telescoping sum",
                polys(&[&["0", "1"], &["1", "1"]]),
                plus_minus_one(),
                observable(&[("1", &[[2, 1, 1]]), ("-1", &[[1, 1, 1]])]),
            )
        },
        "markov-linear-pair" => ScenarioConfig {
            simulation: simulation(&[1_000, 10_000], 2_000, &[0.5, 1.0], &[[0.5, 0.75, 1.0]]),
            ..base(
                name,
                "q = (n, 2n), F(x, y) = x + xy over a two-state chain that stays put with probability 3/4",
                polys(&[&["0", "1"], &["0", "2"]]),
                ProcessConfig::Markov {
                    states: vec![strings(&["-1"]), strings(&["1"])],
                    transition: vec![strings(&["3/4", "1/4"]), strings(&["1/4", "3/4"])],
                },
                observable(&[("1", &[[1, 1, 1]]), ("1", &[[1, 1, 1], [2, 1, 1]])]),
            )
        },
        _ => return Err(ScenarioError::UnknownBuiltin(name.into())),
    };
    Ok(config)
}

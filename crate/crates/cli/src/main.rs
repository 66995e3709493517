use clap::{Parser, Subcommand, ValueEnum};
use nonconv_core::scenario::{
    builtin, builtin_names, run_analyze, run_density, run_simulate, run_verify, Overrides, Row, Scenario, ScenarioConfig,
    ScenarioError, EXIT_CONFIG, EXIT_INTERNAL, EXIT_OK, EXIT_VERIFY,
};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "nonconv-clt", version, about = "Limiting covariances of nonconventional polynomial sums")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Source {
    /// Scenario config (JSON).
    #[arg(long, value_name = "FILE", conflicts_with = "builtin", required_unless_present = "builtin")]
    config: Option<PathBuf>,
    /// Use a built-in scenario instead of a config file.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "R")]
    replicates: Option<u64>,
    #[arg(long, value_name = "T")]
    threads: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Family structure and exact limiting covariances.
    Analyze(Common),
    /// Monte-Carlo replicate statistics.
    Simulate(Common),
    /// Simulation compared against the exact predictions.
    Verify(Common),
    /// Analytic against counted asymptotic densities.
    Density(Common),
    /// Print the canonical form of a config.
    Config {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    List,
}

#[derive(Serialize)]
struct CsvRow {
    name: String,
    estimate: f64,
    std_error: Option<f64>,
    predicted: Option<f64>,
    z: Option<f64>,
}

fn load(source: &Source) -> Result<ScenarioConfig, ScenarioError> {
    match (&source.config, &source.builtin) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::from_json(&text)
        }
        (None, Some(name)) => builtin(name),
        (None, None) => Err(ScenarioError::Config("one of --config or --builtin is required".into())),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), ScenarioError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| ScenarioError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| ScenarioError::Config(format!("cannot write output: {e}")))
        }
    }
}

fn csv_text(scenario: &str, rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow {
            name: format!("{scenario}/{}", r.name),
            estimate: r.estimate,
            std_error: r.std_error,
            predicted: r.predicted,
            z: r.z,
        })
        .expect("rows serialize");
    }
    if rows.is_empty() {
        w.write_record(["name", "estimate", "std_error", "predicted", "z"]).expect("header");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn render<T: Serialize>(format: Format, report: &T, scenario: &str, rows: impl FnOnce() -> Vec<Row>) -> String {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("report serializes");
            text.push('\n');
            text
        }
        Format::Csv => csv_text(scenario, &rows()),
    }
}

fn scenario(common: &Common) -> Result<Scenario, ScenarioError> {
    let overrides = Overrides {
        seed: common.seed,
        replicates: common.replicates,
        threads: common.threads,
    };
    Scenario::with_overrides(load(&common.source)?, &overrides)
}

fn run(cli: Cli) -> Result<i32, ScenarioError> {
    match cli.command {
        Command::List => {
            let mut text = String::new();
            for name in builtin_names() {
                let c = builtin(name)?;
                text.push_str(&format!("{name}\t{}\n", c.description.unwrap_or_default()));
            }
            emit(&None, &text)?;
            Ok(EXIT_OK)
        }
        Command::Config { source, out } => {
            let mut text = load(&source)?.canonical_json()?;
            text.push('\n');
            emit(&out, &text)?;
            Ok(EXIT_OK)
        }
        Command::Analyze(common) => {
            let sc = scenario(&common)?;
            let report = run_analyze(&sc)?;
            emit(&common.out, &render(common.format, &report, sc.name(), || report.rows()))?;
            Ok(EXIT_OK)
        }
        Command::Simulate(common) => {
            let sc = scenario(&common)?;
            let report = run_simulate(&sc)?;
            emit(&common.out, &render(common.format, &report, sc.name(), || report.rows()))?;
            Ok(EXIT_OK)
        }
        Command::Verify(common) => {
            let sc = scenario(&common)?;
            let report = run_verify(&sc)?;
            emit(&common.out, &render(common.format, &report, sc.name(), || report.rows.clone()))?;
            for row in report.failures() {
                eprintln!("verification failed: {} estimate {} predicted {:?} z {:?}", row.name, row.estimate, row.predicted, row.z);
            }
            Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Density(common) => {
            let sc = scenario(&common)?;
            let report = run_density(&sc)?;
            emit(&common.out, &render(common.format, &report, sc.name(), || report.rows()))?;
            for row in report.rows.iter().filter(|r| !r.pass) {
                eprintln!(
                    "density mismatch for {:?}: analytic {} empirical {}",
                    row.subset, row.own_density, row.empirical
                );
            }
            Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => EXIT_INTERNAL,
    };
    ExitCode::from(code as u8)
}

//! Command-line front end. Every command that writes files finishes by
//! writing `manifest.json` next to them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::calibration::{omega_sweep, solve_optimal_delta, write_sweep_csv, CalibrationModel, CalibrationParams};
use crate::error::{invalid, Error, Result};
use crate::harness::{competitive_comparison, write_ratio_csv, Instance};
use crate::online::{diff_traces, parse_trace_csv, render_trace_csv, run_omg, run_omz, TraceRow};
use crate::rational::{self, Rational};
use crate::scenarios;
use crate::sim::{run_experiment, summarize, write_metrics_csv, MechanismKind, ScenarioConfig};
use crate::verify::{run_suite, Suite};

#[derive(Parser, Debug)]
#[command(name = "crowdsense", version, about = "Online budget-feasible sensing auctions: replay, simulate, calibrate, verify")]
pub struct Cli {
    /// Worker threads for replications and suites (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Replay a built-in example or an instance file and print the step table.
    Trace(TraceArgs),
    /// Run mechanisms on generated scenarios and write a metrics CSV.
    Simulate(SimulateArgs),
    /// Solve for the ratio-maximizing delta over a range of omega.
    Calibrate(CalibrateArgs),
    /// Offline/online value ratios over budget and arrival-rate grids.
    Sweep(SweepArgs),
    /// Run randomized invariant suites; exits nonzero on any violation.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    /// `example1` or `example2`.
    pub example: Option<String>,
    /// Instance file (as written in repro cases) instead of a built-in example.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mechanism: Option<TraceMechanism>,
    /// Expected trace CSV to diff against (built-in examples use their own).
    #[arg(long)]
    pub expect: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TraceMechanism {
    Omz,
    Omg,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario key-value file; defaults to the full-size region.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mechanisms to run; repeat the flag or separate with commas.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MechanismKind::Omg])]
    pub mechanism: Vec<MechanismKind>,
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub model: Option<CalibrationModel>,
    /// Comma-separated omega values; defaults to a geometric sweep 10..1e9.
    #[arg(long, value_delimiter = ',')]
    pub omega: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub reps: u64,
    /// Comma-separated budgets.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Vec<String>,
    /// Comma-separated arrival rates.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    /// Start from the desk-scale scenario instead of the full-size one.
    #[arg(long)]
    pub scaled: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Random instances per suite.
    #[arg(short = 'n', long = "count", default_value_t = 200)]
    pub count: usize,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    version: &'static str,
    seed: Option<u64>,
    config: Option<String>,
    artifacts: Vec<String>,
    timings_ms: Vec<(String, f64)>,
}

impl RunManifest {
    fn new(command: &str, seed: Option<u64>, config: Option<String>) -> Self {
        Self { command: command.into(), version: env!("CARGO_PKG_VERSION"), seed, config, artifacts: vec![], timings_ms: vec![] }
    }

    fn time(&mut self, label: &str, since: Instant) {
        self.timings_ms.push((label.into(), since.elapsed().as_secs_f64() * 1e3));
    }

    fn write(self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&self)?)?;
        Ok(())
    }
}

fn out_dir(cli: &Cli) -> Result<Option<PathBuf>> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

fn load_config(path: Option<&PathBuf>, fallback: ScenarioConfig, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut config = match path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::parse(&text)?
        }
        None => fallback,
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8], manifest: &mut RunManifest) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    manifest.artifacts.push(path.display().to_string());
    Ok(())
}

fn print_rows(rows: &[TraceRow]) {
    println!("{:>4} {:>5} {:>10} {:>8} {:>10}  winners / payments", "t", "stage", "rho*", "B'", "committed");
    for row in rows {
        let payments: Vec<String> =
            row.payments.iter().map(|(id, p)| format!("{}:{}", id, rational::format(p))).collect();
        println!(
            "{:>4} {:>5} {:>10} {:>8} {:>10}  {}",
            row.t,
            row.stage,
            rational::format(&row.threshold),
            rational::format(&row.stage_budget),
            rational::format(&row.committed),
            payments.join(" ")
        );
    }
}

fn final_line(rows: &[TraceRow]) -> String {
    let Some(last) = rows.last() else { return "S={} payments".into() };
    let ids: Vec<String> = last.winners.iter().map(|w| w.to_string()).collect();
    let paid: Vec<String> = last.winners.iter().map(|w| rational::format(&last.payments[w])).collect();
    format!("S={{{}}} payments {}", ids.join(","), paid.join(","))
}

/// Returns the process exit code.
fn cmd_trace(cli: &Cli, args: &TraceArgs) -> Result<i32> {
    let (instance, builtin_expected, label) = match (&args.example, &args.config) {
        (Some(name), None) => {
            let example =
                scenarios::by_name(name).ok_or_else(|| invalid(format!("unknown example '{name}' (example1, example2)")))?;
            (Instance::from_example(&example), Some(example.expected_trace()), name.clone())
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
            (Instance::parse(&text)?, None, path.display().to_string())
        }
        _ => return Err(invalid("give exactly one of an example name or --config")),
    };
    let mechanism = args.mechanism.unwrap_or(match label.as_str() {
        "example1" => TraceMechanism::Omz,
        _ => TraceMechanism::Omg,
    });
    let started = Instant::now();
    let bids = instance.truthful_bids();
    let run = match mechanism {
        TraceMechanism::Omz => run_omz(&bids, &instance.universe, &instance.config)?,
        TraceMechanism::Omg => run_omg(&bids, &instance.universe, &instance.config)?,
    };
    let rows = run.rows();
    print_rows(&rows);

    let expected = match &args.expect {
        Some(path) => Some(parse_trace_csv(&fs::read_to_string(path)?)?),
        None => builtin_expected,
    };
    let mut code = 0;
    if let Some(expected) = expected {
        if let Some(mismatch) = diff_traces(&rows, &expected) {
            eprintln!("trace mismatch at {mismatch}");
            code = 1;
        }
    }
    if let Some(dir) = out_dir(cli)? {
        let mut manifest = RunManifest::new("trace", None, Some(instance.dump()));
        write_artifact(&dir, "trace.csv", render_trace_csv(&rows)?.as_bytes(), &mut manifest)?;
        manifest.time("run", started);
        manifest.write(&dir)?;
    }
    println!("{}", final_line(&rows));
    Ok(code)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<i32> {
    let config = load_config(args.config.as_ref(), ScenarioConfig::default(), cli.seed)?;
    let started = Instant::now();
    let rows = run_experiment(&config, &args.mechanism, args.reps)?;
    println!("{:<11} {:>5} {:>10} {:>8} {:>10} {:>8}", "mechanism", "reps", "value", "sd", "payment", "sd");
    for s in summarize(&rows) {
        println!(
            "{:<11} {:>5} {:>10.2} {:>8.2} {:>10.2} {:>8.2}",
            s.mechanism.name(),
            s.replications,
            s.value_mean,
            s.value_sd,
            s.payment_mean,
            s.payment_sd
        );
    }
    if let Some(dir) = out_dir(cli)? {
        let mut manifest = RunManifest::new("simulate", Some(config.seed), Some(config.to_text()));
        let mut csv = Vec::new();
        write_metrics_csv(&mut csv, &rows)?;
        write_artifact(&dir, "metrics.csv", &csv, &mut manifest)?;
        manifest.time("replications", started);
        manifest.write(&dir)?;
    }
    Ok(0)
}

fn cmd_calibrate(cli: &Cli, args: &CalibrateArgs) -> Result<i32> {
    let models = match args.model {
        Some(model) => vec![model],
        None => vec![CalibrationModel::Iid, CalibrationModel::Secretary],
    };
    let omegas = if args.omega.is_empty() { omega_sweep(10.0, 1e9, 33) } else { args.omega.clone() };
    let started = Instant::now();
    println!("{:<10} {:>14} {:>12} {:>12} {:>12}", "model", "omega", "delta", "alpha", "ratio");
    for &model in &models {
        for &omega in &omegas {
            match solve_optimal_delta(CalibrationParams { omega, model }) {
                Some(r) => {
                    println!("{:<10} {:>14} {:>12.6} {:>12.6} {:>12.8}", model.name(), omega, r.delta, r.alpha, r.ratio)
                }
                None => println!("{:<10} {:>14} {:>12}", model.name(), omega, "infeasible"),
            }
        }
    }
    if let Some(dir) = out_dir(cli)? {
        let mut manifest = RunManifest::new("calibrate", None, None);
        let mut csv = Vec::new();
        write_sweep_csv(&mut csv, &omegas, &models)?;
        write_artifact(&dir, "calibration.csv", &csv, &mut manifest)?;
        manifest.time("solve", started);
        manifest.write(&dir)?;
    }
    Ok(0)
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<i32> {
    let base = if args.scaled { ScenarioConfig::scaled() } else { ScenarioConfig::default() };
    let config = load_config(args.config.as_ref(), base, cli.seed)?;
    let budgets: Vec<Rational> = if args.budgets.is_empty() && args.lambdas.is_empty() {
        (1..=5).map(|k| &config.budget * rational::ratio(k, 5) * rational::int(2)).collect()
    } else {
        args.budgets.iter().map(|b| rational::parse(b)).collect::<Result<_>>()?
    };
    let lambdas = if args.budgets.is_empty() && args.lambdas.is_empty() {
        vec![0.2, 0.4, 0.6, 0.8, 1.0]
    } else {
        args.lambdas.clone()
    };
    let started = Instant::now();
    let table = competitive_comparison(&config, &budgets, &lambdas, args.reps)?;
    println!(
        "{:<7} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "axis", "point", "omz", "omg", "prop", "greedy", "random", "prop/omz", "prop/omg"
    );
    for row in &table {
        println!(
            "{:<7} {:>9} {:>9.1} {:>9.1} {:>9.1} {:>9.1} {:>9.1} {:>9.3} {:>9.3}",
            format!("{:?}", row.axis).to_lowercase(),
            row.point,
            row.omz,
            row.omg,
            row.prop_share,
            row.greedy,
            row.random,
            row.prop_share_over_omz,
            row.prop_share_over_omg
        );
    }
    if let Some(dir) = out_dir(cli)? {
        let mut manifest = RunManifest::new("sweep", Some(config.seed), Some(config.to_text()));
        let mut csv = Vec::new();
        write_ratio_csv(&mut csv, &table)?;
        write_artifact(&dir, "ratios.csv", &csv, &mut manifest)?;
        manifest.time("sweep", started);
        manifest.write(&dir)?;
    }
    Ok(0)
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<i32> {
    if args.count == 0 {
        return Err(invalid("instance count must be positive"));
    }
    let seed = cli.seed.unwrap_or(1);
    let started = Instant::now();
    let reports = run_suite(args.suite, args.count, seed)?;
    let dir = out_dir(cli)?;
    let mut manifest = RunManifest::new("verify", Some(seed), None);
    let mut code = 0;
    for report in &reports {
        let status = if report.passed() { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {:<14} instances={} runs={} violations={}",
            report.suite,
            report.instances,
            report.runs,
            report.failures.len()
        );
        for failure in report.failures.iter().take(5) {
            println!("       {failure}");
        }
        if !report.passed() {
            code = 1;
            if let Some(dir) = &dir {
                if let Some(case) = report.repros.first() {
                    let name = format!("repro-{}.txt", report.suite);
                    write_artifact(dir, &name, case.dump().as_bytes(), &mut manifest)?;
                    println!("       repro case: {}", dir.join(name).display());
                }
            }
        }
    }
    if let Some(dir) = dir {
        manifest.time("suites", started);
        manifest.write(&dir)?;
    }
    Ok(code)
}

pub fn run(cli: &Cli) -> Result<i32> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Trace(args) => cmd_trace(cli, args),
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Calibrate(args) => cmd_calibrate(cli, args),
        Command::Sweep(args) => cmd_sweep(cli, args),
        Command::Verify(args) => cmd_verify(cli, args),
    }
}

/// Parses the process arguments, runs, and maps errors to exit code 2.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            2
        }
    }
}

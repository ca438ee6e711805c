//! `rtt`: exact values, simulations, verification suites and limit checks
//! for iterated random-to-top shuffles.
//!
//! Exit codes: 0 success, 1 statistical verification failure, 2 usage or
//! configuration error, 3 I/O error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use rtt_core::exact::Formula;
use rtt_core::experiments::{
    brute_suite, decomposition_suite, figure_panel_checks, limits_suite, run_configured,
    CheckResult, ExperimentConfig, ExperimentOutcome, Panel, Regime, ResolvedConfig,
};
use rtt_core::harness::{write_histogram_csv, write_samples_csv, Criterion, Sampler, Statistic};

const EXIT_STAT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "rtt", version, about = "Random-to-top shuffle statistics: exact values, simulation and limit-law checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a finite-n formula.
    Exact(ExactArgs),
    /// Run an experiment and write histogram, sample and report files.
    Simulate(RunArgs),
    /// Run a verification suite; exit 1 if any check fails.
    Verify(VerifyArgs),
    /// Compare a critical or mixed run with its limit law; exit 1 on failure.
    Limitcheck(LimitArgs),
}

/// Flags shared by every experiment-style command. Flags override `--config`.
#[derive(Args, Default)]
struct Common {
    /// JSON file with any of the flag names as keys.
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_parser = parse_with::<Regime>)]
    regime: Option<Regime>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_with::<Statistic>)]
    statistic: Option<Statistic>,
    #[arg(long, value_parser = parse_with::<Sampler>)]
    sampler: Option<Sampler>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum FormulaName {
    /// Expected fixed points.
    Efix,
    /// Expected inversions.
    Einv,
    /// Expected descents.
    Edes,
    /// Variance of descents.
    Vdes,
    /// Probability that card k is in position k.
    Ret,
    /// Mean of the number of distinct cards selected.
    Kmean,
    /// Variance of the number of distinct cards selected.
    Kvar,
    /// P(number of distinct cards selected = k).
    Kpmf,
    /// Fixed-point law Q(k, m, s) of a partial permutation.
    Q,
    /// P(max of the first j entries = m).
    Prefixmax,
    /// Finite-n fixed-point law at prefix fraction a, value l.
    Finite,
    /// Poisson-geometric law at c, value l.
    Pg,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long, value_enum)]
    formula: Option<FormulaName>,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    l: Option<usize>,
    /// Print a JSON object instead of the bare value.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Suite {
    Brute,
    Decomposition,
    Limits,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    max_r: Option<usize>,
    /// Restrict the limits suite to one figure (1, 2 or 3).
    #[arg(long)]
    figure: Option<u8>,
    #[arg(long, value_parser = parse_with::<Panel>)]
    panel: Option<Panel>,
}

#[derive(Args)]
struct LimitArgs {
    #[command(flatten)]
    common: Common,
    /// Pass when the test statistic is below this value instead of the
    /// default rule (TV < 0.05, or p > 0.001 for KS).
    #[arg(long)]
    threshold: Option<f64>,
}

/// Everything a `--config` file may hold.
#[derive(Deserialize, Default)]
#[serde(default)]
struct FileConfig {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    formula: Option<FormulaName>,
    k: Option<usize>,
    m: Option<usize>,
    s: Option<usize>,
    j: Option<usize>,
    a: Option<f64>,
    l: Option<usize>,
    suite: Option<Suite>,
    max_n: Option<usize>,
    max_r: Option<usize>,
    figure: Option<u8>,
    panel: Option<Panel>,
    threshold: Option<f64>,
}

fn parse_with<T: std::str::FromStr<Err = rtt_core::Error>>(s: &str) -> Result<T, String> {
    s.parse::<T>().map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<rtt_core::Error> for Failure {
    fn from(e: rtt_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

impl Common {
    fn load(&self) -> Result<FileConfig, Failure> {
        let Some(path) = &self.config else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("malformed config {}: {e}", path.display())))
    }

    fn flags(&self) -> ExperimentConfig {
        ExperimentConfig {
            experiment: None,
            n: self.n,
            r: self.r,
            c: self.c,
            regime: self.regime,
            trials: self.trials,
            statistic: self.statistic,
            sampler: self.sampler,
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
        }
    }

    fn merged(&self, file: &FileConfig) -> ExperimentConfig {
        file.experiment.overridden_by(&self.flags())
    }
}

/// Twelve decimals with trailing zeros removed.
fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn need<T>(v: Option<T>, name: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--{name} is required for this formula")))
}

fn cmd_exact(args: &ExactArgs) -> Outcome {
    let file = args.common.load()?;
    let cfg = args.common.merged(&file);
    let formula = need(args.formula.or(file.formula), "formula")?;
    let n = || need(cfg.n, "n");
    let r = || need(cfg.r, "r");
    let k = || need(args.k.or(file.k), "k");
    let l = || need(args.l.or(file.l), "l");
    let f = match formula {
        FormulaName::Efix => Formula::ExpectedFixedPoints { n: n()?, r: r()? },
        FormulaName::Einv => Formula::ExpectedInversions { n: n()?, r: r()? },
        FormulaName::Edes => Formula::ExpectedDescents { n: n()?, r: r()? },
        FormulaName::Vdes => Formula::DescentsVariance { n: n()?, r: r()? },
        FormulaName::Ret => Formula::ReturnProbability { n: n()?, r: r()?, k: k()? },
        FormulaName::Kmean => Formula::OccupiedMean { n: n()?, r: r()? },
        FormulaName::Kvar => Formula::OccupiedVariance { n: n()?, r: r()? },
        FormulaName::Kpmf => Formula::OccupiedPmf { n: n()?, r: r()?, k: k()? },
        FormulaName::Q => Formula::QFixedPoints {
            k: k()?,
            m: need(args.m.or(file.m), "m")?,
            s: need(args.s.or(file.s), "s")?,
        },
        FormulaName::Prefixmax => Formula::PrefixMax {
            n: n()?,
            j: need(args.j.or(file.j), "j")?,
            m: need(args.m.or(file.m), "m")?,
        },
        FormulaName::Finite => Formula::FiniteFixedPointLaw {
            n: n()?,
            a: need(args.a.or(file.a), "a")?,
            l: l()?,
        },
        FormulaName::Pg => Formula::PoissonGeometric { c: need(cfg.c, "c")?, l: l()? },
    };
    let value = f.evaluate()?;
    let json = serde_json::json!({ "query": f, "value": value.value, "method": value.method });
    if let Some(out) = &cfg.out {
        write_file(Path::new(&format!("{out}_exact.json")), |w| {
            writeln!(w, "{}", serde_json::to_string_pretty(&json).expect("json"))
        })?;
    }
    if args.json {
        println!("{json}");
    } else {
        println!("{}", format_value(value.value));
    }
    Ok(true)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::Io(format!("cannot write {}: {e}", path.display()));
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// `<out>_hist.csv`, `<out>_samples.csv` (standardized when the target is
/// continuous) and `<out>_report.json`.
fn write_outputs(out: &str, config: &ResolvedConfig, outcome: &ExperimentOutcome) -> Result<(), Failure> {
    let preamble = config.to_json();
    write_file(Path::new(&format!("{out}_hist.csv")), |w| {
        write_histogram_csv(w, &outcome.raw, Some(&preamble))
    })?;
    let samples = outcome.standardized.as_ref().unwrap_or(&outcome.raw);
    write_file(Path::new(&format!("{out}_samples.csv")), |w| {
        write_samples_csv(w, samples, Some(&preamble))
    })?;
    write_file(Path::new(&format!("{out}_report.json")), |w| {
        writeln!(w, "{}", serde_json::to_string_pretty(&outcome.report).expect("json"))
    })
}

fn cmd_simulate(args: &RunArgs) -> Outcome {
    let file = args.common.load()?;
    let cfg = args.common.merged(&file);
    let resolved = cfg.resolve()?;
    let outcome = run_configured(&resolved, cfg.workers, None)?;
    if let Some(out) = &resolved.out {
        write_outputs(out, &resolved, &outcome)?;
    }
    println!("{}", serde_json::to_string(&outcome.report).expect("json"));
    Ok(true)
}

fn cmd_limitcheck(args: &LimitArgs) -> Outcome {
    let file = args.common.load()?;
    let cfg = args.common.merged(&file);
    let resolved = cfg.resolve()?;
    if resolved.regime == Regime::Fixed {
        return Err(Failure::Usage("limitcheck needs --regime critical (with --c) or --regime mixed".into()));
    }
    let criterion = args.threshold.or(file.threshold).map(Criterion::StatisticBelow);
    let outcome = run_configured(&resolved, cfg.workers, criterion)?;
    if let Some(out) = &resolved.out {
        write_outputs(out, &resolved, &outcome)?;
    }
    println!("{}", serde_json::to_string(&outcome.report).expect("json"));
    Ok(outcome.report.test.as_ref().is_some_and(|t| t.pass))
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let file = args.common.load()?;
    let cfg = args.common.merged(&file);
    let suite = need(args.suite.or(file.suite), "suite")?;
    let seed = cfg.seed.unwrap_or(rtt_core::experiments::DEFAULT_SEED);
    let checks: Vec<CheckResult> = match suite {
        Suite::Brute => brute_suite(args.max_n.or(file.max_n).unwrap_or(5), args.max_r.or(file.max_r).unwrap_or(4))?,
        Suite::Decomposition => decomposition_suite(
            cfg.n.unwrap_or(100),
            cfg.r.unwrap_or(150),
            cfg.trials.unwrap_or(30_000),
            seed,
            cfg.workers,
        )?,
        Suite::Limits => match (args.figure.or(file.figure), args.panel.or(file.panel)) {
            (Some(f), Some(p)) => figure_panel_checks(f, p, seed, cfg.workers)?,
            (Some(f), None) => {
                let mut all = Vec::new();
                for p in Panel::ALL {
                    all.extend(figure_panel_checks(f, p, seed, cfg.workers)?);
                }
                all
            }
            (None, Some(_)) => return Err(Failure::Usage("--panel needs --figure".into())),
            (None, None) => limits_suite(seed, cfg.workers)?,
        },
    };
    for c in &checks {
        println!("{}", serde_json::to_string(c).expect("json"));
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    eprintln!("{} checks, {failed} failed", checks.len());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Exact(a) => cmd_exact(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Limitcheck(a) => cmd_limitcheck(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_STAT_FAIL),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::format_value;

    #[test]
    fn value_format() {
        assert_eq!(format_value(10.0 / 9.0), "1.111111111111");
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(-0.0), "0");
        assert_eq!(format_value(1.5), "1.5");
        assert_eq!(format_value(3.0), "3");
    }
}

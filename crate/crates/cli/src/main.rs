use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mltt::analysis::{empirical_rip, RipClass};
use mltt::basis::{check_admissibility, WeightSequence};
use mltt::fem::Hierarchy;
use mltt::harness::{make_reference, run_experiment, ExperimentConfig};
use mltt::multilevel::{fit_multilevel, plan_samples, EstimatorOptions, FemModel, MultilevelSurrogate, PlanParams};
use mltt::regression::Algorithm;
use mltt::{Error, Result};

/// Sparse tensor-train surrogates for an affine-parametric diffusion problem.
#[derive(Parser)]
#[command(name = "mltt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) the work-accuracy grid and append rows to `<output>/results.csv`.
    Experiment(ExperimentArgs),
    /// Fit one single- or multilevel surrogate and save it as a bundle directory.
    Fit(FitArgs),
    /// Evaluate a saved surrogate at parameter points.
    Eval(EvalArgs),
    /// Build (or reuse) the cached reference test set.
    Reference(ConfigArgs),
    /// Report the analytic admissibility conditions for a parameter set.
    CheckParams(CheckArgs),
    /// Estimate restricted isometry constants of a sparse Legendre class.
    Rip(RipArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.output {
            config.output = out.clone();
        }
        Ok(config)
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Overrides the configured trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Writes the effective configuration as TOML and exits.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Problem and fit settings come from this configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of levels `L` (1 = single level).
    #[arg(long, default_value_t = 1)]
    levels: u32,
    /// Sample-size index `k`.
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Finest mesh has `2^finest_log2` elements (overrides the config).
    #[arg(long)]
    finest_log2: Option<u32>,
    /// Schedule constant (overrides the config).
    #[arg(long)]
    c: Option<f64>,
    /// Polynomial degree per mode (overrides the config).
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, default_value = "sals")]
    algorithm: Algorithm,
    #[arg(long, default_value = "exp-weak")]
    weights: WeightSequence,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bundle directory to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Bundle directory written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// File with one comma- or whitespace-separated point per line; `-` reads stdin.
    #[arg(long, conflicts_with = "y")]
    points: Option<PathBuf>,
    /// A single comma-separated point.
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    p: f64,
    /// Defaults to zeta(2).
    #[arg(long)]
    a0: Option<f64>,
}

#[derive(Args)]
struct RipArgs {
    /// Number of parameters.
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 1)]
    sparsity: usize,
    /// Sample size; repeat for several.
    #[arg(long, default_values_t = [1000])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Supports are sampled beyond this many.
    #[arg(long, default_value_t = 2000)]
    max_supports: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_point(line: &str) -> Result<Vec<f64>> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad coordinate {t:?}: {e}"))))
        .collect()
}

fn read_points(args: &EvalArgs) -> Result<Vec<Vec<f64>>> {
    if let Some(y) = &args.y {
        return Ok(vec![parse_point(y)?]);
    }
    let path = args.points.as_ref().ok_or_else(|| Error::Input("pass --points or --y".into()))?;
    let lines: Vec<String> = if path.as_os_str() == "-" {
        io::stdin().lock().lines().collect::<io::Result<_>>()?
    } else {
        fs::read_to_string(path)?.lines().map(str::to_owned).collect()
    };
    lines
        .iter()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_point)
        .collect()
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{value}")?;
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Experiment(args) => {
            let mut config = args.config.load()?;
            if let Some(t) = args.trials {
                config.trials = t;
            }
            if args.print_config {
                print!("{}", config.to_toml()?);
                return Ok(());
            }
            let summary = run_experiment(&config)?;
            print_json(&json!({
                "results": config.results_path(),
                "written": summary.written,
                "skipped": summary.skipped,
                "failed": summary.failed,
            }))
        }
        Command::Fit(args) => {
            let mut config = match &args.config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(f) = args.finest_log2 {
                config.finest_log2 = f;
            }
            if let Some(c) = args.c {
                config.schedule_c = c;
            }
            if let Some(d) = args.degree {
                config.degree = d;
            }
            config.levels = vec![args.levels];
            config.validate()?;
            let plan = plan_samples(&PlanParams::experiment(args.levels, config.schedule_c, args.k, config.degree))?;
            let hierarchy = Hierarchy::with_finest(config.finest_elements(), args.levels)?;
            let model = FemModel { problem: config.problem.clone(), hierarchy };
            let options = EstimatorOptions { algorithm: args.algorithm, weights: args.weights, fit: config.fit.clone() };
            let fitted = fit_multilevel(&model, &plan, &options, args.seed)?;
            fitted.save(&args.output)?;
            print_json(&json!({
                "output": args.output,
                "samples": fitted.samples(),
                "work": fitted.work(),
                "work_est": plan.work_estimate(model.hierarchy.h0()),
            }))
        }
        Command::Eval(args) => {
            let model = MultilevelSurrogate::load(&args.model)?;
            let points = read_points(&args)?;
            let mut out = io::stdout().lock();
            for y in &points {
                writeln!(out, "{:.17e}", model.eval(y)?)?;
            }
            Ok(())
        }
        Command::Reference(args) => {
            let config = args.load()?;
            let (path, test) = make_reference(&config)?;
            print_json(&json!({ "path": path, "size": test.len() }))
        }
        Command::CheckParams(args) => {
            let a0 = match args.a0 {
                Some(a) => a,
                None => mltt::basis::zeta(2.0)?,
            };
            let report = check_admissibility(args.eta, args.c, args.theta, args.kappa, args.p, a0)?;
            print_json(&serde_json::to_value(&report)?)
        }
        Command::Rip(args) => {
            let class = RipClass::Sparse {
                order: args.order,
                degree: args.degree,
                sparsity: args.sparsity,
                max_supports: args.max_supports,
            };
            for (i, &n) in args.n.iter().enumerate() {
                let est = empirical_rip(&class, n, args.trials, mltt::seed::derive_seed(args.seed, &[i as u64]))?;
                print_json(&json!({
                    "class": est.class,
                    "n": n,
                    "trials": est.trials,
                    "median": est.median(),
                    "max": est.max(),
                    "at_most_half": est.count_at_most(0.5),
                }))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim() }));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}

//! Command-line front end: `simulate`, `fit` and `experiment`.
//!
//! Exit codes: 0 on success (and `--help`), 1 on a runtime failure, 2 on a
//! usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::datagen::{simulate, SyntheticConfig};
use crate::error::{Error, Result};
use crate::harness::{self, render, render_failure_log, ExperimentConfig};
use crate::lasso::lambda_grid;
use crate::model::{make_folds, standardize, FittedModel, Method, Task};
use crate::neural::AdamConfig;
use crate::training::TrainConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "neural-lasso",
    version,
    about = "Statistical and neural lasso fitting and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Draw a synthetic training set and test set.
    Simulate(SimulateArgs),
    /// Fit one method to a CSV dataset.
    Fit(FitArgs),
    /// Run a repeated-validation benchmark.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    #[arg(long, default_value_t = 50)]
    pub n_train: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the generating column order.
    #[arg(long)]
    pub no_permute: bool,
    /// Training set CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Test set CSV; defaults to `<out stem>.test.csv` next to `--out`.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long, default_value = "linear")]
    pub task: Task,
    /// statistical, standard, restricted or voting.
    #[arg(long, default_value = "statistical")]
    pub method: Method,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub grid_count: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub grid_ratio: f64,
    #[arg(long, default_value_t = AdamConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file; printed to stdout when omitted.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// key=value configuration file; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated method list.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub grid_count: Option<usize>,
    #[arg(long)]
    pub grid_ratio: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or markdown.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Where to write `rep,seed,method,error` lines for failed repetitions;
    /// they go to stderr otherwise.
    #[arg(long)]
    pub failure_log: Option<PathBuf>,
}

impl ExperimentArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |key: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((key, v));
            }
        };
        push("kind", self.kind.clone());
        push("repetitions", self.repetitions.map(|v| v.to_string()));
        push("k", self.k.map(|v| v.to_string()));
        push("methods", self.methods.clone());
        push("p", self.p.map(|v| v.to_string()));
        push("n_train", self.n_train.map(|v| v.to_string()));
        push("n_test", self.n_test.map(|v| v.to_string()));
        push("rho", self.rho.map(|v| v.to_string()));
        push("data_path", self.data.as_ref().map(|v| v.display().to_string()));
        push("target", self.target.clone());
        push("train_size", self.train_size.map(|v| v.to_string()));
        push("test_size", self.test_size.map(|v| v.to_string()));
        push("grid_count", self.grid_count.map(|v| v.to_string()));
        push("grid_ratio", self.grid_ratio.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("max_epochs", self.max_epochs.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("output", self.out.as_ref().map(|v| v.display().to_string()));
        push("format", self.format.clone());
        push("threads", self.threads.map(|v| v.to_string()));
        out
    }

    /// The config file (if any) with the inline flags applied on top.
    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for (key, value) in self.overrides() {
            cfg.set(key, &value)?;
        }
        Ok(cfg)
    }
}

/// Test set path used when `--test-out` is not given.
pub fn default_test_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.test.csv"))
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        p: args.p,
        n_train: args.n_train,
        n_test: args.n_test,
        rho: args.rho,
        noise_std: args.noise_std,
        permute_columns: !args.no_permute,
        seed: args.seed,
        ..SyntheticConfig::default()
    };
    let (train, test) = simulate(&cfg)?;
    harness::write_csv(&train, &args.out)?;
    let test_path = args
        .test_out
        .clone()
        .unwrap_or_else(|| default_test_path(&args.out));
    harness::write_csv(&test, &test_path)?;
    Ok(())
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let ds = harness::load_csv(&args.data, &args.target, args.task)?;
    ds.check_task(args.task)?;
    let (std, _) = standardize(&ds, args.task)?;
    let grid = lambda_grid(&std, args.task, args.grid_count, args.grid_ratio)?;
    let folds = make_folds(ds.n(), args.k, args.seed)?;
    let train_cfg = TrainConfig {
        max_epochs: args.max_epochs,
        adam: AdamConfig {
            lr: args.lr,
            ..AdamConfig::default()
        },
        seed: args.seed,
        ..TrainConfig::default()
    };
    let model = harness::fit_method(args.method, &ds, args.task, &grid, &folds, &train_cfg)?;
    let text = render_model(&model, ds.feature_names());
    match &args.model_out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_experiment(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.to_config()?;
    let table = harness::run_experiment(&cfg)?;
    if !table.failures.is_empty() {
        let log = render_failure_log(&table.failures);
        match &args.failure_log {
            Some(path) => std::fs::write(path, log)?,
            None => eprint!("{log}"),
        }
    }
    let text = render(&table, cfg.format);
    match &cfg.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Text model file: header fields, then `name,coefficient` for every nonzero
/// original-scale coefficient in column order.
pub fn render_model(model: &FittedModel, names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "task={}", model.task);
    let _ = writeln!(out, "method={}", model.method);
    let _ = writeln!(out, "lambda={}", model.lambda);
    let _ = writeln!(out, "intercept_original={}", model.intercept_original);
    for (j, &b) in model.beta_original.iter().enumerate() {
        if b != 0.0 {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1));
            let _ = writeln!(out, "{name},{b}");
        }
    }
    out
}

pub fn emit_model(model: &FittedModel, names: &[String], path: &Path) -> Result<()> {
    std::fs::write(path, render_model(model, names))?;
    Ok(())
}

/// Parsed contents of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub task: Task,
    pub method: Method,
    pub lambda: f64,
    pub intercept_original: f64,
    pub coefficients: Vec<(String, f64)>,
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let bad = |line: usize, msg: &str| Error::BadConfig(format!("model file line {}: {msg}", line + 1));
    let mut lines = text.lines().enumerate();
    let mut header = |key: &str| -> Result<String> {
        let (i, line) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| bad(i, &format!("expected `{key}=`")))
    };
    let task = header("task")?.parse()?;
    let method = header("method")?.parse()?;
    let lambda = header("lambda")?.parse().map_err(|_| bad(2, "bad lambda"))?;
    let intercept_original = header("intercept_original")?
        .parse()
        .map_err(|_| bad(3, "bad intercept"))?;
    let mut coefficients = Vec::new();
    for (i, line) in lines {
        let (name, value) = line
            .rsplit_once(',')
            .ok_or_else(|| bad(i, "expected name,coefficient"))?;
        let value = value.parse().map_err(|_| bad(i, "bad coefficient"))?;
        coefficients.push((name.to_string(), value));
    }
    Ok(ModelFile {
        task,
        method,
        lambda,
        intercept_original,
        coefficients,
    })
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// Collapses clap's rendered error into one line, keeping the flag names it
/// lists on continuation lines.
fn one_line(err: &clap::Error) -> String {
    let rendered = err.render().to_string();
    let mut parts = Vec::new();
    for line in rendered.lines() {
        let line = line.trim();
        if line.starts_with("Usage:") || line.starts_with("For more information") {
            break;
        }
        if !line.is_empty() {
            parts.push(line);
        }
    }
    parts.join(" ")
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = err.print();
                    EXIT_OK
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = err.print();
                    EXIT_USAGE
                }
                _ => {
                    eprintln!("{}", one_line(&err));
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Fit(a) => run_fit(a),
        Command::Experiment(a) => run_experiment(a),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(e @ Error::BadConfig(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

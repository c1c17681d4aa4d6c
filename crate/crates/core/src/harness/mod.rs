//! Repeated-validation experiments comparing the four lasso fitters.
//!
//! Every repetition draws its own data (or train/test partition of a real
//! dataset) from `mix_seed(base_seed, r)`. Within a repetition all methods
//! share the training set, test set, folds and penalty grid, so per-method
//! metrics can be compared pairwise.

mod data;
mod report;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

pub use data::{load_csv, write_csv};
pub use report::{
    render, render_csv, render_failure_log, render_markdown, write_report, FailureRecord, Metric,
    ReportFormat, ReportRow, ReportTable, Star, CSV_HEADER,
};

use crate::datagen::{simulate, SyntheticConfig};
use crate::error::{Error, Result};
use crate::lasso::{cv_statistical_lasso_with_folds, lambda_grid, CdOptions};
use crate::metrics::{paired_t_test, RunMetrics};
use crate::model::{make_folds, standardize, FittedModel, LabeledDataset, Method, Task};
use crate::rng::{mix_seed, permutation};
use crate::training::{fit_restricted_with_folds, fit_standard, fit_voting_with_folds, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SyntheticLinear,
    RealLinear,
    RealLogistic,
}

impl ExperimentKind {
    pub fn task(self) -> Task {
        match self {
            ExperimentKind::RealLogistic => Task::Logistic,
            _ => Task::Linear,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SyntheticLinear => "synthetic_linear",
            ExperimentKind::RealLinear => "real_linear",
            ExperimentKind::RealLogistic => "real_logistic",
        }
    }

    /// Metrics reported for this kind of experiment, in table order.
    pub fn metrics(self) -> &'static [Metric] {
        match self {
            ExperimentKind::SyntheticLinear => &[Metric::Mse, Metric::Precision, Metric::Recall],
            ExperimentKind::RealLinear => &[Metric::Mse, Metric::Selected],
            ExperimentKind::RealLogistic => &[Metric::Acc, Metric::Selected],
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic_linear" => Ok(ExperimentKind::SyntheticLinear),
            "real_linear" => Ok(ExperimentKind::RealLinear),
            "real_logistic" => Ok(ExperimentKind::RealLogistic),
            other => Err(Error::BadConfig(format!("unknown experiment kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub repetitions: usize,
    pub k: usize,
    pub methods: Vec<Method>,
    /// Used by synthetic experiments; its seed is replaced per repetition.
    pub synthetic: SyntheticConfig,
    pub data_path: Option<PathBuf>,
    pub target: Option<String>,
    /// Real-data partition sizes; default to 80% / the remaining rows.
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub grid_count: usize,
    pub grid_ratio: f64,
    pub train: TrainConfig,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
    pub format: ReportFormat,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::SyntheticLinear,
            repetitions: 100,
            k: 5,
            methods: Method::ALL.to_vec(),
            synthetic: SyntheticConfig::default(),
            data_path: None,
            target: None,
            train_size: None,
            test_size: None,
            grid_count: 100,
            grid_ratio: 1e-3,
            train: TrainConfig::default(),
            base_seed: 0,
            output: None,
            format: ReportFormat::Csv,
            threads: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::BadConfig(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::BadConfig(format!("invalid value `{value}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "kind" => self.kind = value.parse()?,
            "repetitions" => self.repetitions = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "methods" => {
                self.methods = value
                    .split(',')
                    .map(|m| m.trim().parse())
                    .collect::<Result<_>>()?
            }
            "p" => self.synthetic.p = parse(key, value)?,
            "n_train" => self.synthetic.n_train = parse(key, value)?,
            "n_test" => self.synthetic.n_test = parse(key, value)?,
            "rho" => self.synthetic.rho = parse(key, value)?,
            "noise_std" => self.synthetic.noise_std = parse(key, value)?,
            "beta_pattern" => {
                self.synthetic.beta_pattern = value
                    .split(',')
                    .map(|b| parse(key, b.trim()))
                    .collect::<Result<_>>()?
            }
            "permute_columns" => self.synthetic.permute_columns = parse_bool(key, value)?,
            "data_path" => self.data_path = Some(PathBuf::from(value)),
            "target" => self.target = Some(value.to_string()),
            "train_size" => self.train_size = Some(parse(key, value)?),
            "test_size" => self.test_size = Some(parse(key, value)?),
            "grid_count" => self.grid_count = parse(key, value)?,
            "grid_ratio" => self.grid_ratio = parse(key, value)?,
            "max_epochs" => self.train.max_epochs = parse(key, value)?,
            "patience" => self.train.patience = parse(key, value)?,
            "lr" => self.train.adam.lr = parse(key, value)?,
            "beta1" => self.train.adam.beta1 = parse(key, value)?,
            "beta2" => self.train.adam.beta2 = parse(key, value)?,
            "eps" => self.train.adam.eps = parse(key, value)?,
            "tol" => self.train.tol = parse(key, value)?,
            "lr_backoff" => self.train.lr_backoff = parse(key, value)?,
            "val_fraction" => self.train.val_fraction = parse(key, value)?,
            "standard_sweep" => self.train.standard_sweep = parse_bool(key, value)?,
            "seed" | "base_seed" => self.base_seed = parse(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "threads" => self.threads = Some(parse(key, value)?),
            other => return Err(Error::BadConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::BadConfig(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(key.trim(), value)
                .map_err(|e| Error::BadConfig(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::BadConfig("repetitions must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::BadConfig("k must be at least 2".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::BadConfig("no methods selected".into()));
        }
        if self.grid_count == 0 || !(self.grid_ratio > 0.0 && self.grid_ratio <= 1.0) {
            return Err(Error::BadConfig(
                "grid needs count >= 1 and ratio in (0, 1]".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(Error::BadConfig("threads must be at least 1".into()));
        }
        self.train.validate()?;
        match self.kind {
            ExperimentKind::SyntheticLinear => self.synthetic.validate(),
            _ => {
                if self.data_path.is_none() {
                    return Err(Error::BadConfig("real-data experiments need data_path".into()));
                }
                if self.target.is_none() {
                    return Err(Error::BadConfig("real-data experiments need target".into()));
                }
                Ok(())
            }
        }
    }

    /// `key=value` pairs describing the run, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        let mut out = vec![
            ("kind", self.kind.as_str().to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("k", self.k.to_string()),
            ("methods", methods.join(",")),
            ("grid_count", self.grid_count.to_string()),
            ("grid_ratio", self.grid_ratio.to_string()),
            ("max_epochs", self.train.max_epochs.to_string()),
            ("patience", self.train.patience.to_string()),
            ("lr", self.train.adam.lr.to_string()),
            ("val_fraction", self.train.val_fraction.to_string()),
            ("standard_sweep", self.train.standard_sweep.to_string()),
            ("base_seed", self.base_seed.to_string()),
        ];
        if self.kind == ExperimentKind::SyntheticLinear {
            out.push(("p", self.synthetic.p.to_string()));
            out.push(("n_train", self.synthetic.n_train.to_string()));
            out.push(("n_test", self.synthetic.n_test.to_string()));
            out.push(("rho", self.synthetic.rho.to_string()));
        } else {
            if let Some(p) = &self.data_path {
                out.push(("data_path", p.display().to_string()));
            }
            if let Some(t) = &self.target {
                out.push(("target", t.clone()));
            }
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// Seeds of the independent streams used inside one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepSeeds {
    pub rep: u64,
    pub folds: u64,
    pub split: u64,
    pub partition: u64,
    pub data: u64,
}

impl RepSeeds {
    pub fn new(base_seed: u64, r: usize) -> Self {
        let rep = mix_seed(base_seed, r as u64);
        Self {
            rep,
            folds: mix_seed(rep, 1),
            split: mix_seed(rep, 2),
            partition: mix_seed(rep, 3),
            data: mix_seed(rep, 4),
        }
    }
}

/// Per-method outcome of one repetition.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub results: Vec<(Method, std::result::Result<RunMetrics, String>)>,
}

/// Fits one method on a repetition's shared inputs.
pub fn fit_method(
    method: Method,
    train: &LabeledDataset,
    task: Task,
    grid: &crate::lasso::LambdaGrid,
    folds: &crate::model::FoldAssignment,
    train_cfg: &TrainConfig,
) -> Result<FittedModel> {
    match method {
        Method::Statistical => {
            Ok(cv_statistical_lasso_with_folds(train, task, folds, grid, &CdOptions::default())?.model)
        }
        Method::StandardNeural => fit_standard(train, task, grid, train_cfg),
        Method::RestrictedNeural => Ok(fit_restricted_with_folds(train, task, grid, folds, train_cfg)?.model),
        Method::VotingNeural => Ok(fit_voting_with_folds(train, task, grid, folds, train_cfg)?.model),
    }
}

fn partition(
    ds: &LabeledDataset,
    train_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let perm = permutation(ds.n(), seed);
    let mut train_idx = perm[..train_size].to_vec();
    let mut test_idx = perm[train_size..train_size + test_size].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((ds.subset_rows(&train_idx)?, ds.subset_rows(&test_idx)?))
}

fn run_repetition(
    cfg: &ExperimentConfig,
    real: Option<&LabeledDataset>,
    sizes: (usize, usize),
    r: usize,
) -> RepOutcome {
    let seeds = RepSeeds::new(cfg.base_seed, r);
    let task = cfg.kind.task();
    let fail_all = |msg: String| RepOutcome {
        rep: r,
        seed: seeds.rep,
        results: cfg.methods.iter().map(|&m| (m, Err(msg.clone()))).collect(),
    };

    let drawn = match real {
        Some(ds) => partition(ds, sizes.0, sizes.1, seeds.partition),
        None => simulate(&SyntheticConfig {
            seed: seeds.data,
            ..cfg.synthetic.clone()
        }),
    };
    let (train, test) = match drawn {
        Ok(d) => d,
        Err(e) => return fail_all(e.to_string()),
    };
    let shared = (|| -> Result<_> {
        train.check_task(task)?;
        let (std, _) = standardize(&train, task)?;
        let grid = lambda_grid(&std, task, cfg.grid_count, cfg.grid_ratio)?;
        let folds = make_folds(train.n(), cfg.k, seeds.folds)?;
        Ok((grid, folds))
    })();
    let (grid, folds) = match shared {
        Ok(s) => s,
        Err(e) => return fail_all(e.to_string()),
    };
    let train_cfg = TrainConfig {
        seed: seeds.split,
        ..cfg.train
    };

    let results = cfg
        .methods
        .iter()
        .map(|&m| {
            let res = fit_method(m, &train, task, &grid, &folds, &train_cfg)
                .and_then(|model| RunMetrics::evaluate(&model, &test))
                .map_err(|e| e.to_string());
            (m, res)
        })
        .collect();
    RepOutcome {
        rep: r,
        seed: seeds.rep,
        results,
    }
}

fn metric_value(m: &RunMetrics, metric: Metric) -> Option<f64> {
    match metric {
        Metric::Mse => m.mse,
        Metric::Acc => m.acc,
        Metric::Precision => m.precision,
        Metric::Recall => m.recall,
        Metric::Selected => Some(m.selected_fraction),
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Builds the table from per-repetition outcomes ordered by repetition.
pub fn aggregate(kind: ExperimentKind, methods: &[Method], outcomes: &[RepOutcome]) -> Vec<ReportRow> {
    let value = |o: &RepOutcome, method: Method, metric: Metric| -> Option<f64> {
        o.results
            .iter()
            .find(|(m, _)| *m == method)
            .and_then(|(_, r)| r.as_ref().ok())
            .and_then(|m| metric_value(m, metric))
    };
    let has_reference = methods.contains(&Method::Statistical);
    let mut rows = Vec::new();
    for &metric in kind.metrics() {
        for &method in methods {
            let values: Vec<f64> = outcomes.iter().filter_map(|o| value(o, method, metric)).collect();
            let (mean, sd) = mean_sd(&values);
            let p_value = if has_reference && method != Method::Statistical {
                let (a, b): (Vec<f64>, Vec<f64>) = outcomes
                    .iter()
                    .filter_map(|o| Some((value(o, method, metric)?, value(o, Method::Statistical, metric)?)))
                    .unzip();
                paired_t_test(&a, &b).ok().map(|t| t.p_value)
            } else {
                None
            };
            rows.push(ReportRow {
                method,
                metric,
                mean,
                sd,
                count: values.len(),
                p_value,
                star: p_value.map(Star::from_p_value).unwrap_or(Star::None),
            });
        }
    }
    rows
}

/// Everything a run produced: the table plus raw per-repetition outcomes.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub table: ReportTable,
    pub outcomes: Vec<RepOutcome>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportTable> {
    Ok(run_experiment_detailed(cfg)?.table)
}

/// Runs all repetitions on a pool of `cfg.threads` workers. Results are
/// reduced in repetition order, so the table does not depend on scheduling.
pub fn run_experiment_detailed(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let start = Instant::now();
    let real = match cfg.kind {
        ExperimentKind::SyntheticLinear => None,
        kind => {
            let path = cfg.data_path.as_ref().expect("validated");
            let target = cfg.target.as_ref().expect("validated");
            Some(load_csv(path, target, kind.task())?)
        }
    };
    let sizes = match &real {
        Some(ds) => {
            let train = cfg.train_size.unwrap_or(((ds.n() as f64) * 0.8).round() as usize);
            let test = cfg.test_size.unwrap_or(ds.n().saturating_sub(train));
            if train < 2 || test < 1 || train + test > ds.n() {
                return Err(Error::BadConfig(format!(
                    "train_size {train} + test_size {test} does not fit {} rows",
                    ds.n()
                )));
            }
            (train, test)
        }
        None => (0, 0),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::BadConfig(e.to_string()))?;
    let outcomes: Vec<RepOutcome> = pool.install(|| {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(|r| run_repetition(cfg, real.as_ref(), sizes, r))
            .collect()
    });

    let failures: Vec<FailureRecord> = outcomes
        .iter()
        .flat_map(|o| {
            o.results.iter().filter_map(move |(m, r)| {
                r.as_ref().err().map(|e| FailureRecord {
                    rep: o.rep,
                    seed: o.seed,
                    method: *m,
                    error: e.clone(),
                })
            })
        })
        .collect();
    let failed_reps = outcomes
        .iter()
        .filter(|o| o.results.iter().any(|(_, r)| r.is_err()))
        .count();
    if failed_reps * 10 > cfg.repetitions {
        return Err(Error::TooManyFailures {
            failed: failed_reps,
            total: cfg.repetitions,
        });
    }

    let table = ReportTable {
        rows: aggregate(cfg.kind, &cfg.methods, &outcomes),
        config: cfg.echo(),
        base_seed: cfg.base_seed,
        failures,
        wall_clock: start.elapsed(),
    };
    Ok(ExperimentRun { table, outcomes })
}

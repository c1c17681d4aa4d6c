//! Fitting the lasso network: standard, restricted and voting training.
//!
//! * standard: one seeded train/validation split. The network starts from
//!   `w = 0, gamma = 1` at `l1` just below lambda_max of the training part;
//!   as `gamma` grows the effective penalty `l1 / gamma` falls and predictors
//!   enter one by one, and the epoch with the lowest validation error wins.
//!   With `standard_sweep` set, every penalty of the grid is trained this way
//!   instead and the best snapshot over all of them is kept.
//! * restricted: `gamma` frozen at 1 and the penalty chosen by K-fold
//!   cross-validation, as the statistical lasso does.
//! * voting: each fold is trained as in standard training with that fold as
//!   the validation set; predictors kept by a strict majority of the folds
//!   are refit without penalty.
//!
//! Training is full-batch Adam. One epoch is one gradient step followed by
//! the zero test on every weight.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::lasso::{lambda_max, select_min_error, soft_threshold, LambdaGrid};
use crate::linalg::{cholesky, cholesky_solve, dot, least_squares};
use crate::metrics::prediction_error;
use crate::model::{
    destandardize, make_folds, sigmoid, standardize, train_val_split, FittedModel, FoldAssignment,
    LabeledDataset, Method, Task,
};
use crate::neural::{self, adam_step, apply_zeroing, AdamConfig, AdamState, NeuralParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub adam: AdamConfig,
    /// Largest minimum-norm subgradient entry that counts as converged when
    /// there is no validation set.
    pub tol: f64,
    /// Factor applied to the learning rate after every epoch that raises the
    /// training loss, when there is no validation set. 1 disables it.
    pub lr_backoff: f64,
    pub val_fraction: f64,
    pub seed: u64,
    /// Standard and voting training sweep the whole grid when set; otherwise
    /// they train once, starting just below lambda_max of the training part.
    pub standard_sweep: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 2000,
            patience: 100,
            adam: AdamConfig::default(),
            tol: 1e-6,
            lr_backoff: 0.95,
            val_fraction: 0.2,
            seed: 0,
            standard_sweep: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::BadConfig("max_epochs must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::BadConfig("patience must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::BadConfig(format!(
                "val_fraction {} must lie in (0, 1)",
                self.val_fraction
            )));
        }
        if !(self.lr_backoff > 0.0 && self.lr_backoff <= 1.0) {
            return Err(Error::BadConfig(format!(
                "lr_backoff {} must lie in (0, 1]",
                self.lr_backoff
            )));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::BadConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Result of training one network at one penalty.
#[derive(Debug, Clone)]
pub struct NetworkRun {
    /// Best-validation snapshot, or the final state without validation data.
    pub params: NeuralParams,
    /// Validation error of `params`; NaN without validation data.
    pub val_error: f64,
    pub epochs: usize,
    pub converged: bool,
}

fn val_error(task: Task, val: &LabeledDataset, params: &NeuralParams) -> Result<f64> {
    let mut eta = neural::forward_linear(val, params)?;
    if task == Task::Logistic {
        eta += params.b0;
    }
    Ok(prediction_error(task, eta.as_slice().unwrap(), val.y_slice()))
}

/// Largest entry of a gradient whose zero-weight entries are already
/// soft-thresholded, over the trainable parameters.
fn stationarity(task: Task, params: &NeuralParams, grad: &neural::NeuralGradient) -> f64 {
    let mut worst = grad.w.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if !params.gamma_frozen {
        worst = worst.max(grad.gamma.abs());
    }
    if task == Task::Logistic {
        worst = worst.max(grad.b0.abs());
    }
    worst
}

/// Trains one network on standardized `train` starting from `init`.
///
/// With `val`, keeps the snapshot of lowest validation error (the starting
/// point included) and stops after `patience` epochs without improvement.
/// Without it, stops once every entry of the minimum-norm subgradient is
/// within `cfg.tol` of zero, scaling the learning rate by `cfg.lr_backoff`
/// after every epoch that raises the training loss.
///
/// At `w_j = 0` the step uses the minimum-norm subgradient of the full loss,
/// `soft_threshold(data gradient, l1)`, so a zeroed weight only moves when
/// its data gradient exceeds the penalty.
pub fn train_network(
    task: Task,
    train: &LabeledDataset,
    val: Option<&LabeledDataset>,
    init: NeuralParams,
    cfg: &TrainConfig,
) -> Result<NetworkRun> {
    let mut params = init;
    let mut adam = AdamState::for_network(task, &params, cfg.adam);
    let mut best = match val {
        Some(v) => Some((val_error(task, v, &params)?, params.clone())),
        None => None,
    };
    let mut since_best = 0;
    let mut prev_loss = neural::loss(task, train, &params)?;
    let mut converged = false;
    let mut epochs = 0;

    for epoch in 1..=cfg.max_epochs {
        let mut grad = neural::gradient(task, train, &params)?;
        for (g, &w) in grad.w.iter_mut().zip(params.w.iter()) {
            if w == 0.0 {
                *g = soft_threshold(*g, params.l1);
            }
        }
        if val.is_none() && stationarity(task, &params, &grad) <= cfg.tol {
            converged = true;
            break;
        }
        epochs = epoch;
        adam_step(&mut adam, &mut params, &grad, task)?;
        let report = neural::zero_condition(task, train, &params)?;
        params = apply_zeroing(&params, &report);
        adam.reset_slots(report.zeroed_indices());

        if val.is_none() {
            let loss = neural::loss(task, train, &params)?;
            if loss > prev_loss {
                adam.lr *= cfg.lr_backoff;
            }
            prev_loss = loss;
        }
        if let (Some(v), Some((best_err, best_params))) = (val, best.as_mut()) {
            let err = val_error(task, v, &params)?;
            if err < *best_err {
                *best_err = err;
                *best_params = params.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    converged = true;
                    break;
                }
            }
        }
    }

    Ok(match best {
        Some((val_error, params)) => NetworkRun {
            params,
            val_error,
            epochs,
            converged,
        },
        None => NetworkRun {
            params,
            val_error: f64::NAN,
            epochs,
            converged,
        },
    })
}

/// Relative offset below lambda_max for single-penalty training. At lambda_max
/// itself `w = 0` is stationary and full-batch training never leaves it; any
/// offset works because Adam steps do not scale with the gradient.
pub const START_BELOW_LAMBDA_MAX: f64 = 1e-6;

/// Penalties tried on a standardized training part.
fn l1_candidates(task: Task, train_std: &LabeledDataset, grid: &LambdaGrid, cfg: &TrainConfig) -> Vec<f64> {
    if cfg.standard_sweep {
        grid.values().to_vec()
    } else {
        vec![lambda_max(train_std, task) * (1.0 - START_BELOW_LAMBDA_MAX)]
    }
}

/// Trains every penalty of `l1_values` from scratch against `val` and returns
/// the run with the lowest validation error (ties go to the larger penalty).
fn best_over_grid(
    task: Task,
    train: &LabeledDataset,
    val: &LabeledDataset,
    l1_values: &[f64],
    cfg: &TrainConfig,
) -> Result<NetworkRun> {
    let mut runs = Vec::with_capacity(l1_values.len());
    for &l1 in l1_values {
        runs.push(train_network(
            task,
            train,
            Some(val),
            NeuralParams::init(train.p(), l1),
            cfg,
        )?);
    }
    let errors: Vec<f64> = runs.iter().map(|r| r.val_error).collect();
    let idx = select_min_error(&errors);
    Ok(runs.swap_remove(idx))
}

/// Standard neural lasso: single validation split.
pub fn fit_standard(
    ds: &LabeledDataset,
    task: Task,
    grid: &LambdaGrid,
    cfg: &TrainConfig,
) -> Result<FittedModel> {
    cfg.validate()?;
    ds.check_task(task)?;
    let (train_idx, val_idx) = train_val_split(ds.n(), cfg.val_fraction, cfg.seed)?;
    let train = ds.subset_rows(&train_idx)?;
    let val = ds.subset_rows(&val_idx)?;
    train.check_task(task)?;
    let (train_std, params) = standardize(&train, task)?;
    let val_std = params.apply(&val)?;
    let l1_values = l1_candidates(task, &train_std, grid, cfg);
    let run = best_over_grid(task, &train_std, &val_std, &l1_values, cfg)?;
    let mut model = run.params.to_model(task, Method::StandardNeural, &params)?;
    model.converged = run.converged;
    Ok(model)
}

/// Trains along `l1_values` in order with `gamma = 1` frozen, warm-starting
/// each penalty from the previous solution.
fn restricted_path(
    task: Task,
    train: &LabeledDataset,
    l1_values: &[f64],
    cfg: &TrainConfig,
) -> Result<Vec<NetworkRun>> {
    let mut params = NeuralParams::init(train.p(), l1_values[0]).frozen_gamma();
    let mut out = Vec::with_capacity(l1_values.len());
    for &l1 in l1_values {
        params.l1 = l1;
        let run = train_network(task, train, None, params.clone(), cfg)?;
        params = run.params.clone();
        out.push(run);
    }
    Ok(out)
}

/// Restricted fit together with its cross-validation curve.
#[derive(Debug, Clone)]
pub struct RestrictedFit {
    pub model: FittedModel,
    pub mean_errors: Vec<f64>,
    pub chosen: usize,
}

pub fn fit_restricted(
    ds: &LabeledDataset,
    task: Task,
    grid: &LambdaGrid,
    k: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<RestrictedFit> {
    let folds = make_folds(ds.n(), k, seed)?;
    fit_restricted_with_folds(ds, task, grid, &folds, cfg)
}

/// Restricted neural lasso: `gamma = 1` and the penalty chosen by K-fold CV.
pub fn fit_restricted_with_folds(
    ds: &LabeledDataset,
    task: Task,
    grid: &LambdaGrid,
    folds: &FoldAssignment,
    cfg: &TrainConfig,
) -> Result<RestrictedFit> {
    cfg.validate()?;
    ds.check_task(task)?;
    let mut totals = vec![0.0; grid.len()];
    for fold in 0..folds.k {
        let train_idx = folds.training_indices(fold);
        if train_idx.len() < 2 {
            return Err(Error::FoldTooSmall {
                fold,
                size: train_idx.len(),
            });
        }
        let train = ds.subset_rows(&train_idx)?;
        train.check_task(task)?;
        let val = ds.held_out_rows(&folds.validation_indices(fold))?;
        let (train_std, params) = standardize(&train, task)?;
        let val_std = params.apply(&val)?;
        let runs = restricted_path(task, &train_std, grid.values(), cfg)?;
        for (total, run) in totals.iter_mut().zip(&runs) {
            *total += val_error(task, &val_std, &run.params)?;
        }
    }
    let mean_errors: Vec<f64> = totals.into_iter().map(|t| t / folds.k as f64).collect();
    let chosen = select_min_error(&mean_errors);

    let (std, params) = standardize(ds, task)?;
    let runs = restricted_path(task, &std, &grid.values()[..=chosen], cfg)?;
    let last = runs.last().expect("non-empty path");
    let mut model = last.params.to_model(task, Method::RestrictedNeural, &params)?;
    model.converged = last.converged;
    Ok(RestrictedFit {
        model,
        mean_errors,
        chosen,
    })
}

/// Per-predictor vote counts across folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    pub votes: Vec<usize>,
    pub k: usize,
    /// `floor(k / 2) + 1`.
    pub majority_threshold: usize,
    pub selected: Vec<bool>,
}

impl VoteTally {
    pub fn from_supports(supports: &[Vec<bool>]) -> Result<Self> {
        let k = supports.len();
        if k == 0 {
            return Err(Error::BadConfig("no fold supports to tally".into()));
        }
        let p = supports[0].len();
        if let Some(s) = supports.iter().find(|s| s.len() != p) {
            return Err(Error::LengthMismatch(p, s.len()));
        }
        let votes: Vec<usize> = (0..p).map(|j| supports.iter().filter(|s| s[j]).count()).collect();
        let majority_threshold = k / 2 + 1;
        let selected = votes.iter().map(|&v| v >= majority_threshold).collect();
        Ok(Self {
            votes,
            k,
            majority_threshold,
            selected,
        })
    }

    pub fn is_empty(&self) -> bool {
        !self.selected.iter().any(|&s| s)
    }
}

/// Voting fit with the per-fold evidence behind it.
#[derive(Debug, Clone)]
pub struct VotingFit {
    pub model: FittedModel,
    pub tally: VoteTally,
    pub fold_supports: Vec<Vec<bool>>,
    pub fold_l1: Vec<f64>,
    /// Set when no predictor won a majority and the intercept-only model was
    /// returned.
    pub empty_majority: bool,
}

pub fn fit_voting(
    ds: &LabeledDataset,
    task: Task,
    grid: &LambdaGrid,
    k: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<VotingFit> {
    let folds = make_folds(ds.n(), k, seed)?;
    fit_voting_with_folds(ds, task, grid, &folds, cfg)
}

/// Voting neural lasso.
pub fn fit_voting_with_folds(
    ds: &LabeledDataset,
    task: Task,
    grid: &LambdaGrid,
    folds: &FoldAssignment,
    cfg: &TrainConfig,
) -> Result<VotingFit> {
    cfg.validate()?;
    ds.check_task(task)?;
    let mut fold_supports = Vec::with_capacity(folds.k);
    let mut fold_l1 = Vec::with_capacity(folds.k);
    for fold in 0..folds.k {
        let train_idx = folds.training_indices(fold);
        if train_idx.len() < 2 {
            return Err(Error::FoldTooSmall {
                fold,
                size: train_idx.len(),
            });
        }
        let train = ds.subset_rows(&train_idx)?;
        train.check_task(task)?;
        let val = ds.held_out_rows(&folds.validation_indices(fold))?;
        let (train_std, params) = standardize(&train, task)?;
        let val_std = params.apply(&val)?;
        let l1_values = l1_candidates(task, &train_std, grid, cfg);
        let run = best_over_grid(task, &train_std, &val_std, &l1_values, cfg)?;
        fold_supports.push(run.params.w.iter().map(|&w| w != 0.0).collect::<Vec<_>>());
        fold_l1.push(run.params.l1);
    }
    let tally = VoteTally::from_supports(&fold_supports)?;
    let mut model = refit_unpenalized(ds, &tally.selected, task)?;
    model.method = Method::VotingNeural;
    Ok(VotingFit {
        model,
        empty_majority: tally.is_empty(),
        tally,
        fold_supports,
        fold_l1,
    })
}

const NEWTON_MAX_ITER: usize = 200;

/// Unpenalized fit on the predictors in `support`; the rest stay exactly 0.
///
/// Linear: least squares by Householder QR on the standardized columns.
/// Logistic: damped Newton with intercept until the gradient norm is below
/// 1e-8.
pub fn refit_unpenalized(ds: &LabeledDataset, support: &[bool], task: Task) -> Result<FittedModel> {
    if support.len() != ds.p() {
        return Err(Error::DimensionMismatch(format!(
            "support has {} entries for {} predictors",
            support.len(),
            ds.p()
        )));
    }
    ds.check_task(task)?;
    let (std, params) = standardize(ds, task)?;
    let selected: Vec<usize> = (0..ds.p()).filter(|&j| support[j]).collect();
    if task == Task::Linear && selected.len() + 1 > ds.n() {
        return Err(Error::SingularDesign);
    }
    let columns: Vec<&[f64]> = selected.iter().map(|&j| std.column(j)).collect();
    let (coef, intercept) = match task {
        Task::Linear => (least_squares(&columns, std.y_slice())?, 0.0),
        Task::Logistic => newton_logistic(&columns, std.y_slice())?,
    };
    let mut beta = Array1::zeros(ds.p());
    for (&j, c) in selected.iter().zip(coef) {
        beta[j] = c;
    }
    let m = FittedModel::new(task, Method::VotingNeural, beta, intercept, 0.0);
    destandardize(&m, &params)
}

/// Unpenalized logistic regression with intercept by damped Newton.
fn newton_logistic(columns: &[&[f64]], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    let nf = n as f64;
    let k = columns.len();
    let ybar = y.iter().sum::<f64>() / nf;
    // parameter order: intercept, then coefficients
    let mut theta = vec![0.0; k + 1];
    theta[0] = (ybar / (1.0 - ybar)).ln();

    let eta_of = |theta: &[f64]| -> Vec<f64> {
        let mut eta = vec![theta[0]; n];
        for (c, &b) in columns.iter().zip(&theta[1..]) {
            for (e, x) in eta.iter_mut().zip(c.iter()) {
                *e += b * x;
            }
        }
        eta
    };
    let loss_of = |eta: &[f64]| prediction_error(Task::Logistic, eta, y);

    let mut eta = eta_of(&theta);
    let mut loss = loss_of(&eta);
    for _ in 0..NEWTON_MAX_ITER {
        let prob: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let resid: Vec<f64> = prob.iter().zip(y).map(|(p, y)| p - y).collect();
        let weights: Vec<f64> = prob.iter().map(|p| p * (1.0 - p)).collect();
        let mut grad = vec![0.0; k + 1];
        grad[0] = resid.iter().sum::<f64>() / nf;
        for (g, c) in grad[1..].iter_mut().zip(columns) {
            *g = dot(c, &resid) / nf;
        }
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-8 {
            return Ok((theta[1..].to_vec(), theta[0]));
        }
        let col = |a: usize, i: usize| if a == 0 { 1.0 } else { columns[a - 1][i] };
        let mut hess = ndarray::Array2::<f64>::zeros((k + 1, k + 1));
        for a in 0..=k {
            for b in 0..=a {
                let h = (0..n).map(|i| weights[i] * col(a, i) * col(b, i)).sum::<f64>() / nf;
                hess[[a, b]] = h;
                hess[[b, a]] = h;
            }
        }
        let l = cholesky(&hess)?;
        let step = cholesky_solve(&l, &grad);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(th, s)| th - t * s).collect();
            let cand_eta = eta_of(&cand);
            let cand_loss = loss_of(&cand_eta);
            if cand_loss <= loss || t < 1e-10 {
                theta = cand;
                eta = cand_eta;
                loss = cand_loss;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NonConvergent(NEWTON_MAX_ITER))
}

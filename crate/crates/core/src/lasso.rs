//! Coordinate-descent lasso for linear and logistic regression.
//!
//! All solvers minimize
//!
//! ```text
//! R(y, X beta) + lambda * ||beta||_1
//! ```
//!
//! with `R = (1/N) ||y - X beta||^2` for the linear task and
//! `R = (1/N) sum_i [log(1 + exp(eta_i)) - y_i eta_i]`, `eta = X beta + beta0`,
//! for the logistic task. Because the squared-error term has no 1/2 factor
//! the linear coordinate update thresholds at `lambda / 2` and the null-model
//! bound is `max_j |(2/N) X_j^t y|`. The logistic quadratic approximation
//! carries its own 1/2, so its weighted update thresholds at `lambda`.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::metrics::prediction_error;
use crate::model::{
    destandardize, make_folds, sigmoid, standardize, FittedModel, FoldAssignment, LabeledDataset, Method,
    Task,
};

/// Lower bound on IRLS weights `p (1 - p)`.
pub const IRLS_WEIGHT_FLOOR: f64 = 1e-5;

/// Maximum inner coordinate sweeps per IRLS step.
const MAX_INNER_SWEEPS: usize = 10_000;

/// `sign(x) * max(|x| - t, 0)`.
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// IRLS iteration cap for the logistic task.
    pub max_outer: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 10_000,
            max_outer: 100,
        }
    }
}

/// Strictly decreasing, log-equispaced penalty values starting at lambda_max.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
    ratio: f64,
}

impl LambdaGrid {
    pub fn new(lambda_max: f64, count: usize, ratio: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::BadConfig("lambda grid needs at least one value".into()));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::BadConfig(format!("grid ratio {ratio} must lie in (0, 1)")));
        }
        if !(lambda_max > 0.0 && lambda_max.is_finite()) {
            return Err(Error::BadConfig(format!(
                "lambda_max must be positive, got {lambda_max}"
            )));
        }
        let values = if count == 1 {
            vec![lambda_max]
        } else {
            let last = (count - 1) as f64;
            (0..count)
                .map(|i| lambda_max * ratio.powf(i as f64 / last))
                .collect()
        };
        Ok(Self { values, ratio })
    }

    /// A grid from explicit values, which must be positive and strictly decreasing.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::BadConfig("grid values must be positive".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::BadConfig("grid values must be strictly decreasing".into()));
        }
        let ratio = values[values.len() - 1] / values[0];
        Ok(Self { values, ratio })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// The first `len` values.
    pub fn truncated(&self, len: usize) -> Self {
        let values = self.values[..len.clamp(1, self.values.len())].to_vec();
        Self::from_values(values).expect("prefix of a valid grid")
    }
}

/// Smallest penalty at which the all-zero model is optimal (standardized data).
///
/// Linear: `max_j |(2/N) X_j^t y|`. Logistic: `max_j |(1/N) X_j^t (y - 1/2)|`.
pub fn lambda_max(ds: &LabeledDataset, task: Task) -> f64 {
    let n = ds.n() as f64;
    let y = ds.y_slice();
    match task {
        Task::Linear => (0..ds.p())
            .map(|j| 2.0 * (dot(ds.column(j), y) / n).abs())
            .fold(0.0, f64::max),
        Task::Logistic => {
            let centered: Vec<f64> = y.iter().map(|v| v - sigmoid(0.0)).collect();
            (0..ds.p())
                .map(|j| (dot(ds.column(j), &centered) / n).abs())
                .fold(0.0, f64::max)
        }
    }
}

pub fn lambda_grid(ds: &LabeledDataset, task: Task, count: usize, ratio: f64) -> Result<LambdaGrid> {
    LambdaGrid::new(lambda_max(ds, task), count, ratio)
}

/// Value of the penalized objective on standardized data.
pub fn lasso_objective(ds: &LabeledDataset, task: Task, beta: &[f64], intercept: f64, lambda: f64) -> f64 {
    let eta = linear_predictor(ds, beta, intercept);
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    data_loss(task, &eta, ds.y_slice()) + lambda * l1
}

/// `R(y, eta)` without the penalty.
pub fn data_loss(task: Task, eta: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    match task {
        Task::Linear => eta.iter().zip(y).map(|(e, y)| (y - e) * (y - e)).sum::<f64>() / n,
        Task::Logistic => eta.iter().zip(y).map(|(&e, &y)| softplus(e) - y * e).sum::<f64>() / n,
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn linear_predictor(ds: &LabeledDataset, beta: &[f64], intercept: f64) -> Vec<f64> {
    let mut eta = vec![intercept; ds.n()];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            axpy(&mut eta, b, ds.column(j));
        }
    }
    eta
}

/// Working state of a coordinate-descent run, reusable as a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct CdState {
    pub beta: Vec<f64>,
    pub intercept: f64,
    /// `y - X beta - intercept`; coordinate j's partial residual is
    /// `residual + X_j beta_j`.
    pub residual: Vec<f64>,
    pub active_set: Vec<bool>,
}

impl CdState {
    pub fn zeros(ds: &LabeledDataset) -> Self {
        Self {
            beta: vec![0.0; ds.p()],
            intercept: 0.0,
            residual: ds.y_slice().to_vec(),
            active_set: vec![false; ds.p()],
        }
    }

    /// Partial residual for coordinate `j`.
    pub fn partial_residual(&self, ds: &LabeledDataset, j: usize) -> Vec<f64> {
        let mut r = self.residual.clone();
        axpy(&mut r, self.beta[j], ds.column(j));
        r
    }

    fn refresh_residual(&mut self, ds: &LabeledDataset) {
        let eta = linear_predictor(ds, &self.beta, self.intercept);
        self.residual = ds.y_slice().iter().zip(&eta).map(|(y, e)| y - e).collect();
        self.active_set = self.beta.iter().map(|&b| b != 0.0).collect();
    }
}

/// One pass of linear coordinate updates over `coords`; returns the largest
/// coefficient change.
fn linear_sweep(
    ds: &LabeledDataset,
    col_ms: &[f64],
    state: &mut CdState,
    threshold: f64,
    coords: impl Iterator<Item = usize>,
) -> f64 {
    let n = ds.n() as f64;
    let mut max_delta = 0.0_f64;
    for j in coords {
        if col_ms[j] == 0.0 {
            continue;
        }
        let col = ds.column(j);
        let old = state.beta[j];
        let rho = dot(col, &state.residual) / n + col_ms[j] * old;
        let new = soft_threshold(rho, threshold) / col_ms[j];
        if new != old {
            axpy(&mut state.residual, old - new, col);
            state.beta[j] = new;
            max_delta = max_delta.max((new - old).abs());
        }
    }
    max_delta
}

/// Runs linear coordinate descent from `state`. Returns `(sweeps, converged)`.
fn solve_linear(ds: &LabeledDataset, lambda: f64, opts: &CdOptions, state: &mut CdState) -> (usize, bool) {
    let n = ds.n() as f64;
    let p = ds.p();
    let col_ms: Vec<f64> = (0..p)
        .map(|j| ds.column(j).iter().map(|v| v * v).sum::<f64>() / n)
        .collect();
    let threshold = 0.5 * lambda;
    let mut sweeps = 0;
    loop {
        let delta = linear_sweep(ds, &col_ms, state, threshold, 0..p);
        sweeps += 1;
        if delta < opts.tol {
            break;
        }
        if sweeps >= opts.max_sweeps {
            state.active_set = state.beta.iter().map(|&b| b != 0.0).collect();
            return (sweeps, false);
        }
        // iterate on the active set until it settles, then re-check all
        loop {
            let active: Vec<usize> = (0..p).filter(|&j| state.beta[j] != 0.0).collect();
            let delta = linear_sweep(ds, &col_ms, state, threshold, active.into_iter());
            sweeps += 1;
            if delta < opts.tol {
                break;
            }
            if sweeps >= opts.max_sweeps {
                state.active_set = state.beta.iter().map(|&b| b != 0.0).collect();
                return (sweeps, false);
            }
        }
    }
    state.active_set = state.beta.iter().map(|&b| b != 0.0).collect();
    (sweeps, true)
}

/// IRLS with weighted coordinate descent. Returns `(outer iterations, converged)`.
fn solve_logistic(ds: &LabeledDataset, lambda: f64, opts: &CdOptions, state: &mut CdState) -> (usize, bool) {
    let n = ds.n() as f64;
    let p = ds.p();
    let y = ds.y_slice();
    let ybar = y.iter().sum::<f64>() / n;

    // null model: all |(1/N) X_j^t (y - ybar)| within the penalty
    let centered: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let null_stat = (0..p)
        .map(|j| (dot(ds.column(j), &centered) / n).abs())
        .fold(0.0, f64::max);
    if null_stat <= lambda * (1.0 + 1e-10) {
        state.beta.iter_mut().for_each(|b| *b = 0.0);
        state.intercept = (ybar / (1.0 - ybar)).ln();
        state.refresh_residual(ds);
        return (0, true);
    }

    let mut eta = linear_predictor(ds, &state.beta, state.intercept);
    let mut objective =
        data_loss(Task::Logistic, &eta, y) + lambda * state.beta.iter().map(|b| b.abs()).sum::<f64>();

    for outer in 1..=opts.max_outer {
        let mut weights = vec![0.0; ds.n()];
        // working residual z - eta = (y - prob) / weight
        let mut work: Vec<f64> = vec![0.0; ds.n()];
        for i in 0..ds.n() {
            let prob = sigmoid(eta[i]);
            let w = (prob * (1.0 - prob)).max(IRLS_WEIGHT_FLOOR);
            weights[i] = w;
            work[i] = (y[i] - prob) / w;
        }
        let weight_sum: f64 = weights.iter().sum();
        let col_wms: Vec<f64> = (0..p)
            .map(|j| {
                ds.column(j)
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| w * x * x)
                    .sum::<f64>()
                    / n
            })
            .collect();

        let old_beta = state.beta.clone();
        let old_intercept = state.intercept;
        let mut beta = state.beta.clone();
        let mut intercept = state.intercept;
        let mut wx = vec![0.0; ds.n()];
        for _ in 0..MAX_INNER_SWEEPS {
            let mut max_delta = 0.0_f64;
            for j in 0..p {
                if col_wms[j] == 0.0 {
                    continue;
                }
                let col = ds.column(j);
                for ((o, x), w) in wx.iter_mut().zip(col).zip(&weights) {
                    *o = x * w;
                }
                let old = beta[j];
                let rho = dot(&wx, &work) / n + col_wms[j] * old;
                let new = soft_threshold(rho, lambda) / col_wms[j];
                if new != old {
                    axpy(&mut work, old - new, col);
                    beta[j] = new;
                    max_delta = max_delta.max((new - old).abs());
                }
            }
            let shift = dot(&weights, &work) / weight_sum;
            if shift != 0.0 {
                work.iter_mut().for_each(|r| *r -= shift);
                intercept += shift;
                max_delta = max_delta.max(shift.abs());
            }
            if max_delta < opts.tol {
                break;
            }
        }

        // backtrack towards the previous iterate if the true objective went up
        let mut new_eta = linear_predictor(ds, &beta, intercept);
        let mut new_obj =
            data_loss(Task::Logistic, &new_eta, y) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
        let mut halvings = 0;
        while new_obj > objective + 1e-12 * (1.0 + objective.abs()) && halvings < 30 {
            for (b, o) in beta.iter_mut().zip(&old_beta) {
                *b = 0.5 * (*b + o);
            }
            intercept = 0.5 * (intercept + old_intercept);
            new_eta = linear_predictor(ds, &beta, intercept);
            new_obj =
                data_loss(Task::Logistic, &new_eta, y) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
            halvings += 1;
        }

        let change = beta
            .iter()
            .zip(&old_beta)
            .map(|(a, b)| (a - b).abs())
            .fold((intercept - old_intercept).abs(), f64::max);
        state.beta = beta;
        state.intercept = intercept;
        eta = new_eta;
        objective = new_obj;
        if change < opts.tol {
            state.refresh_residual(ds);
            return (outer, true);
        }
    }
    state.refresh_residual(ds);
    (opts.max_outer, false)
}

fn solve(
    ds: &LabeledDataset,
    task: Task,
    lambda: f64,
    opts: &CdOptions,
    state: &mut CdState,
) -> (usize, bool) {
    match task {
        Task::Linear => solve_linear(ds, lambda, opts, state),
        Task::Logistic => solve_logistic(ds, lambda, opts, state),
    }
}

fn model_from_state(task: Task, state: &CdState, lambda: f64, converged: bool) -> FittedModel {
    let mut m = FittedModel::new(
        task,
        Method::Statistical,
        Array1::from(state.beta.clone()),
        state.intercept,
        lambda,
    );
    m.converged = converged;
    m
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::BadConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Linear lasso on standardized data with centered response.
///
/// The returned model is on the standardized scale with a zero intercept.
pub fn cd_linear(ds: &LabeledDataset, lambda: f64, tol: f64, max_sweeps: usize) -> Result<FittedModel> {
    check_lambda(lambda)?;
    let opts = CdOptions {
        tol,
        max_sweeps,
        ..CdOptions::default()
    };
    let mut state = CdState::zeros(ds);
    let (sweeps, converged) = solve_linear(ds, lambda, &opts, &mut state);
    let model = model_from_state(Task::Linear, &state, lambda, converged);
    if converged {
        Ok(model)
    } else {
        Err(Error::NoConvergence {
            iterations: sweeps,
            last: Box::new(model),
        })
    }
}

/// Logistic lasso with an unpenalized intercept on standardized predictors.
pub fn cd_logistic(ds: &LabeledDataset, lambda: f64, tol: f64, max_outer: usize) -> Result<FittedModel> {
    check_lambda(lambda)?;
    ds.check_task(Task::Logistic)?;
    let opts = CdOptions {
        tol,
        max_outer,
        ..CdOptions::default()
    };
    let mut state = CdState::zeros(ds);
    let (iters, converged) = solve_logistic(ds, lambda, &opts, &mut state);
    let model = model_from_state(Task::Logistic, &state, lambda, converged);
    if converged {
        Ok(model)
    } else {
        Err(Error::NoConvergence {
            iterations: iters,
            last: Box::new(model),
        })
    }
}

/// Fits every grid value in order with warm starts.
///
/// Non-converged fits are returned with `converged = false` rather than
/// aborting the path.
pub fn lasso_path(
    ds: &LabeledDataset,
    task: Task,
    grid: &LambdaGrid,
    opts: &CdOptions,
) -> Result<Vec<FittedModel>> {
    ds.check_task(task)?;
    let mut state = CdState::zeros(ds);
    if task == Task::Logistic {
        let ybar = ds.y().sum() / ds.n() as f64;
        state.intercept = (ybar / (1.0 - ybar)).ln();
        state.refresh_residual(ds);
    }
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid.values() {
        let (_, converged) = solve(ds, task, lambda, opts, &mut state);
        out.push(model_from_state(task, &state, lambda, converged));
    }
    Ok(out)
}

/// Index of the smallest error; near-ties (within 1e-12) go to the earliest,
/// i.e. largest-penalty, entry. NaN errors never win.
pub fn select_min_error(errors: &[f64]) -> usize {
    let best = errors
        .iter()
        .copied()
        .filter(|e| !e.is_nan())
        .fold(f64::INFINITY, f64::min);
    errors.iter().position(|&e| e <= best + 1e-12).unwrap_or(0)
}

/// Mean validation error per grid value across the folds.
pub fn cv_errors(
    ds: &LabeledDataset,
    task: Task,
    folds: &FoldAssignment,
    grid: &LambdaGrid,
    opts: &CdOptions,
) -> Result<Vec<f64>> {
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
        let val = ds.held_out_rows(&folds.validation_indices(fold))?;
        let (train_std, params) = standardize(&train, task)?;
        let val_std = params.apply(&val)?;
        let path = lasso_path(&train_std, task, grid, opts)?;
        for (total, model) in totals.iter_mut().zip(&path) {
            let eta = linear_predictor(&val_std, model.beta.as_slice().unwrap(), model.intercept);
            *total += prediction_error(task, &eta, val_std.y_slice());
        }
    }
    Ok(totals.into_iter().map(|t| t / folds.k as f64).collect())
}

/// Result of cross-validated lasso selection.
#[derive(Debug, Clone)]
pub struct CvFit {
    pub model: FittedModel,
    pub mean_errors: Vec<f64>,
    pub chosen: usize,
}

/// K-fold cross-validated lasso on unstandardized data.
///
/// Standardizes each fold's training part on its own, selects the penalty
/// with the lowest mean validation error, then refits on all of `ds`.
pub fn cv_statistical_lasso(
    ds: &LabeledDataset,
    task: Task,
    k: usize,
    grid: &LambdaGrid,
    seed: u64,
    opts: &CdOptions,
) -> Result<CvFit> {
    let folds = make_folds(ds.n(), k, seed)?;
    cv_statistical_lasso_with_folds(ds, task, &folds, grid, opts)
}

pub fn cv_statistical_lasso_with_folds(
    ds: &LabeledDataset,
    task: Task,
    folds: &FoldAssignment,
    grid: &LambdaGrid,
    opts: &CdOptions,
) -> Result<CvFit> {
    let mean_errors = cv_errors(ds, task, folds, grid, opts)?;
    let chosen = select_min_error(&mean_errors);
    let (std, params) = standardize(ds, task)?;
    let path = lasso_path(&std, task, &grid.truncated(chosen + 1), opts)?;
    let model = destandardize(path.last().expect("non-empty path"), &params)?;
    Ok(CvFit {
        model,
        mean_errors,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_linear(n: usize, p: usize, seed: u64) -> LabeledDataset {
        let mut r = rng::seeded(seed);
        let x = Array2::from_shape_fn((n, p), |_| r.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(n, |i| {
            x[[i, 0]] * 1.5 - x[[i, p - 1]] + 0.5 * r.sample::<f64, _>(StandardNormal)
        });
        standardize(&LabeledDataset::new(x, y).unwrap(), Task::Linear)
            .unwrap()
            .0
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
    }

    #[test]
    fn grid_is_log_equispaced() {
        let g = LambdaGrid::new(2.0, 3, 0.01).unwrap();
        let want = [2.0, 0.2, 0.02];
        for (a, b) in g.values().iter().zip(want) {
            assert!((a - b).abs() < 1e-15 * b.max(1.0));
        }
        assert_eq!(LambdaGrid::new(2.0, 1, 0.5).unwrap().values(), &[2.0]);
        assert!(LambdaGrid::from_values(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn null_model_at_lambda_max() {
        let ds = random_linear(40, 6, 1);
        let lmax = lambda_max(&ds, Task::Linear);
        let m = cd_linear(&ds, lmax, 1e-9, 1000).unwrap();
        assert!(m.beta.iter().all(|&b| b == 0.0));
        let m = cd_linear(&ds, 0.999 * lmax, 1e-9, 1000).unwrap();
        assert_eq!(m.support_size(), 1);
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let ds = random_linear(30, 8, 2);
        let lambda = 0.05 * lambda_max(&ds, Task::Linear);
        let mut state = CdState::zeros(&ds);
        let col_ms = vec![1.0; 8];
        let mut prev = lasso_objective(&ds, Task::Linear, &state.beta, 0.0, lambda);
        for _ in 0..50 {
            linear_sweep(&ds, &col_ms, &mut state, lambda / 2.0, 0..8);
            let obj = lasso_objective(&ds, Task::Linear, &state.beta, 0.0, lambda);
            assert!(obj <= prev + 1e-14);
            prev = obj;
        }
    }

    #[test]
    fn partial_residual_definition() {
        let ds = random_linear(20, 4, 3);
        let mut state = CdState::zeros(&ds);
        solve_linear(&ds, 0.1, &CdOptions::default(), &mut state);
        let r2 = state.partial_residual(&ds, 2);
        for (i, got) in r2.iter().enumerate() {
            let mut want = ds.y()[i];
            for k in [0, 1, 3] {
                want -= ds.x()[[i, k]] * state.beta[k];
            }
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn no_convergence_carries_iterate() {
        let ds = random_linear(30, 8, 4);
        let r = cd_linear(&ds, 1e-4, 1e-15, 2);
        match r {
            Err(Error::NoConvergence { iterations, last }) => {
                assert_eq!(iterations, 2);
                assert!(!last.converged);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn single_class_logistic_rejected() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i * 3 + j) as f64);
        let ds = LabeledDataset::new(x, Array1::ones(6)).unwrap();
        assert!(matches!(
            cd_logistic(&ds, 0.1, 1e-7, 100),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn select_prefers_largest_lambda_on_ties() {
        assert_eq!(select_min_error(&[3.0, 1.0, 1.0, 2.0]), 1);
        assert_eq!(select_min_error(&[f64::NAN, 2.0, 1.0]), 2);
        assert_eq!(select_min_error(&[1.0 + 5e-13, 1.0]), 0);
    }
}

//! Datasets, standardization, fold assignment and fitted models.
//!
//! Solvers work on standardized data: every column has mean zero and unit
//! mean square, `(1/N) * sum_i x_ij^2 = 1`, and for the linear task the
//! response is centered. [`FittedModel`] carries coefficients on both the
//! standardized and the original scale.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ShapeBuilder};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Linear,
    Logistic,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Linear => "linear",
            Task::Logistic => "logistic",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Task::Linear),
            "logistic" => Ok(Task::Logistic),
            _ => Err(Error::BadConfig(format!("unknown task `{s}`"))),
        }
    }
}

/// Which procedure produced a [`FittedModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Statistical,
    StandardNeural,
    RestrictedNeural,
    VotingNeural,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Statistical,
        Method::StandardNeural,
        Method::RestrictedNeural,
        Method::VotingNeural,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Statistical => "statistical",
            Method::StandardNeural => "standard_neural",
            Method::RestrictedNeural => "restricted_neural",
            Method::VotingNeural => "voting_neural",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts both the short CLI names (`standard`) and the full tags
    /// (`standard_neural`).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statistical" => Ok(Method::Statistical),
            "standard" | "standard_neural" => Ok(Method::StandardNeural),
            "restricted" | "restricted_neural" => Ok(Method::RestrictedNeural),
            "voting" | "voting_neural" => Ok(Method::VotingNeural),
            _ => Err(Error::BadConfig(format!("unknown method `{s}`"))),
        }
    }
}

/// Observations `x` (N x p, stored column-major) with responses `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: Array2<f64>,
    y: Array1<f64>,
    truth_support: Option<Vec<bool>>,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset, copying `x` into column-major order.
    ///
    /// Requires N >= 2, p >= 1 and finite entries. Task-specific checks on
    /// `y` live in [`LabeledDataset::check_task`].
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x has {n} rows but y has {} entries",
                y.len()
            )));
        }
        if n < 2 || p < 1 {
            return Err(Error::DimensionMismatch(format!(
                "need at least 2 observations and 1 predictor, got {n}x{p}"
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut xf = Array2::<f64>::zeros((n, p).f());
        xf.assign(&x);
        let feature_names = (1..=p).map(|j| format!("x{j}")).collect();
        Ok(Self {
            x: xf,
            y,
            truth_support: None,
            feature_names,
        })
    }

    pub fn with_truth_support(mut self, support: Vec<bool>) -> Result<Self> {
        if support.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "truth support has {} entries for {} predictors",
                support.len(),
                self.p()
            )));
        }
        self.truth_support = Some(support);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature names for {} predictors",
                names.len(),
                self.p()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn y_slice(&self) -> &[f64] {
        self.y.as_slice().expect("y is contiguous")
    }

    /// Column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        let data = self.x.as_slice_memory_order().expect("x is contiguous");
        &data[j * n..(j + 1) * n]
    }

    pub fn columns(&self) -> Vec<&[f64]> {
        (0..self.p()).map(|j| self.column(j)).collect()
    }

    pub fn truth_support(&self) -> Option<&[bool]> {
        self.truth_support.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Checks the response against the task: logistic responses must be 0/1
    /// with both classes present.
    pub fn check_task(&self, task: Task) -> Result<()> {
        if task == Task::Logistic {
            if let Some(v) = self.y.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::NonBinaryTarget { line: 0, value: *v });
            }
            let ones = self.y.iter().filter(|&&v| v == 1.0).count();
            if ones == 0 || ones == self.n() {
                return Err(Error::SingleClass);
            }
        }
        Ok(())
    }

    /// Rows `idx` in the given order.
    pub fn subset_rows(&self, idx: &[usize]) -> Result<Self> {
        let x = self.x.select(ndarray::Axis(0), idx);
        let y = self.y.select(ndarray::Axis(0), idx);
        let mut out = Self::new(x, y)?;
        out.truth_support = self.truth_support.clone();
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    /// Rows `idx` as a held-out part. Unlike [`LabeledDataset::subset_rows`]
    /// a single row is accepted, which leave-one-out folds need.
    pub fn held_out_rows(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::DimensionMismatch("empty held-out part".into()));
        }
        let mut x = Array2::<f64>::zeros((idx.len(), self.p()).f());
        x.assign(&self.x.select(ndarray::Axis(0), idx));
        let y = self.y.select(ndarray::Axis(0), idx);
        Ok(self.replace_xy(x, y))
    }

    fn replace_xy(&self, x: Array2<f64>, y: Array1<f64>) -> Self {
        Self {
            x,
            y,
            truth_support: self.truth_support.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Per-column centering/scaling and the removed response mean.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationParams {
    pub col_mean: Array1<f64>,
    pub col_scale: Array1<f64>,
    /// Zero for the logistic task.
    pub y_mean: f64,
}

impl StandardizationParams {
    /// The identity transform for `p` columns.
    pub fn identity(p: usize) -> Self {
        Self {
            col_mean: Array1::zeros(p),
            col_scale: Array1::ones(p),
            y_mean: 0.0,
        }
    }

    /// Applies these parameters to another dataset (e.g. a validation fold).
    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        if ds.p() != self.col_mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "dataset has {} columns, parameters have {}",
                ds.p(),
                self.col_mean.len()
            )));
        }
        let mut x = ds.x.clone();
        for (j, mut col) in x.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.col_mean[j], self.col_scale[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        let y = ds.y.mapv(|v| v - self.y_mean);
        Ok(ds.replace_xy(x, y))
    }
}

/// Centers and scales every column to `(1/N) * sum x^2 = 1`; centers `y` for
/// the linear task.
pub fn standardize(ds: &LabeledDataset, task: Task) -> Result<(LabeledDataset, StandardizationParams)> {
    let n = ds.n() as f64;
    let p = ds.p();
    let mut col_mean = Array1::zeros(p);
    let mut col_scale = Array1::zeros(p);
    for j in 0..p {
        let col = ds.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let ms = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = ms.sqrt();
        if !(scale > 1e-12 * (1.0 + mean.abs())) {
            return Err(Error::ConstantColumn(j));
        }
        col_mean[j] = mean;
        col_scale[j] = scale;
    }
    let y_mean = match task {
        Task::Linear => ds.y.sum() / n,
        Task::Logistic => 0.0,
    };
    let params = StandardizationParams {
        col_mean,
        col_scale,
        y_mean,
    };
    let out = params.apply(ds)?;
    Ok((out, params))
}

/// Assignment of observations to K cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Deals a seeded random permutation of `0..n` round-robin into `k` folds.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::BadK { k, n });
    }
    let perm = rng::permutation(n, seed);
    let mut fold_of = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

/// Seeded train/validation split, both index lists sorted.
///
/// The validation side gets `max(1, round(val_fraction * n))` indices
/// (ties rounded away from zero); an empty training side is an error.
pub fn train_val_split(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::BadConfig(format!(
            "validation fraction {val_fraction} must lie in (0, 1)"
        )));
    }
    let val = ((val_fraction * n as f64).round() as usize).max(1);
    if val >= n {
        return Err(Error::DegenerateSplit { n, val });
    }
    let perm = rng::permutation(n, seed);
    let mut val_idx = perm[..val].to_vec();
    let mut train_idx = perm[val..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((train_idx, val_idx))
}

/// A fitted sparse linear or logistic model.
///
/// `beta`/`intercept` live on the standardized scale of the data the model
/// was trained on; `beta_original`/`intercept_original` apply to raw inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub task: Task,
    pub method: Method,
    pub beta: Array1<f64>,
    pub intercept: f64,
    pub support: Vec<bool>,
    pub lambda: f64,
    pub beta_original: Array1<f64>,
    pub intercept_original: f64,
    /// False when the solver stopped at its iteration cap.
    pub converged: bool,
}

impl FittedModel {
    /// A model on the standardized scale; original-scale fields mirror the
    /// standardized ones until [`destandardize`] is applied.
    pub fn new(task: Task, method: Method, beta: Array1<f64>, intercept: f64, lambda: f64) -> Self {
        let support = beta.iter().map(|&b| b != 0.0).collect();
        Self {
            task,
            method,
            beta_original: beta.clone(),
            intercept_original: intercept,
            beta,
            intercept,
            support,
            lambda,
            converged: true,
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn support_size(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    /// Linear predictor on raw inputs.
    pub fn linear_predictor(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        check_cols(x, self.p())?;
        Ok(x.dot(&self.beta_original) + self.intercept_original)
    }

    /// Fitted responses (linear) or class-1 probabilities (logistic) on raw inputs.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        let eta = self.linear_predictor(x)?;
        Ok(match self.task {
            Task::Linear => eta,
            Task::Logistic => eta.mapv(sigmoid),
        })
    }

    /// Predictions on standardized inputs, restoring the removed response mean.
    pub fn predict_standardized(&self, x_std: &Array2<f64>, y_mean: f64) -> Result<Array1<f64>> {
        check_cols(x_std, self.p())?;
        let eta = x_std.dot(&self.beta) + self.intercept;
        Ok(match self.task {
            Task::Linear => eta + y_mean,
            Task::Logistic => eta.mapv(sigmoid),
        })
    }
}

fn check_cols(x: &Array2<f64>, p: usize) -> Result<()> {
    if x.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "model has {p} coefficients, input has {} columns",
            x.ncols()
        )));
    }
    Ok(())
}

/// Fills the original-scale coefficients of `model` from `params`.
pub fn destandardize(model: &FittedModel, params: &StandardizationParams) -> Result<FittedModel> {
    if params.col_scale.len() != model.p() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients, parameters cover {} columns",
            model.p(),
            params.col_scale.len()
        )));
    }
    let beta_original = &model.beta / &params.col_scale;
    let shift = dot(
        beta_original.as_slice().expect("contiguous"),
        params.col_mean.as_slice().expect("contiguous"),
    );
    let mut out = model.clone();
    out.intercept_original = params.y_mean + model.intercept - shift;
    out.beta_original = beta_original;
    Ok(out)
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::seeded(seed);
        Array2::from_shape_fn((n, p), |_| r.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn standardize_two_points() {
        let ds = LabeledDataset::new(array![[1.0], [3.0]], array![0.0, 2.0]).unwrap();
        let (s, params) = standardize(&ds, Task::Linear).unwrap();
        assert_eq!(s.column(0), &[-1.0, 1.0]);
        assert_eq!(s.y_slice(), &[-1.0, 1.0]);
        assert_eq!(params.col_mean[0], 2.0);
        assert_eq!(params.col_scale[0], 1.0);
        assert_eq!(params.y_mean, 1.0);
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let ds = LabeledDataset::new(array![[5.0], [5.0]], array![0.0, 1.0]).unwrap();
        assert!(matches!(
            standardize(&ds, Task::Linear),
            Err(Error::ConstantColumn(0))
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let r = LabeledDataset::new(array![[1.0], [f64::NAN]], array![0.0, 1.0]);
        assert!(matches!(r, Err(Error::NonFinite)));
    }

    #[test]
    fn standardize_random_moments() {
        let x = gaussian(50, 20, 3) * 3.0 + 1.5;
        let y = Array1::from_shape_fn(50, |i| i as f64);
        let ds = LabeledDataset::new(x, y).unwrap();
        let (s, _) = standardize(&ds, Task::Linear).unwrap();
        for j in 0..20 {
            let col = s.column(j);
            let mean = col.iter().sum::<f64>() / 50.0;
            let ms = col.iter().map(|v| v * v).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-10);
            assert!((ms - 1.0).abs() < 1e-10);
        }
        assert!(s.y().sum().abs() < 1e-10);
    }

    #[test]
    fn logistic_response_untouched() {
        let ds = LabeledDataset::new(array![[1.0], [2.0], [4.0]], array![0.0, 1.0, 1.0]).unwrap();
        let (s, params) = standardize(&ds, Task::Logistic).unwrap();
        assert_eq!(s.y_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(params.y_mean, 0.0);
    }

    #[test]
    fn folds_balanced_and_deterministic() {
        let f = make_folds(4, 2, 11).unwrap();
        assert_eq!(f.fold_sizes(), vec![2, 2]);
        let f = make_folds(5, 5, 0).unwrap();
        assert_eq!(f.fold_sizes(), vec![1; 5]);
        assert_eq!(make_folds(50, 5, 7).unwrap(), make_folds(50, 5, 7).unwrap());
        assert!(matches!(make_folds(5, 1, 0), Err(Error::BadK { .. })));
        assert!(matches!(make_folds(5, 6, 0), Err(Error::BadK { .. })));
    }

    #[test]
    fn split_sizes_and_rounding() {
        let (t, v) = train_val_split(50, 0.2, 1).unwrap();
        assert_eq!((t.len(), v.len()), (40, 10));
        // round(4.5) = 5 leaves no training observations
        assert!(matches!(
            train_val_split(5, 0.9, 1),
            Err(Error::DegenerateSplit { n: 5, val: 5 })
        ));
        // tiny fractions still produce one validation point
        let (t, v) = train_val_split(10, 0.01, 1).unwrap();
        assert_eq!((t.len(), v.len()), (9, 1));
        assert_eq!(
            train_val_split(10, 0.2, 4).unwrap(),
            train_val_split(10, 0.2, 4).unwrap()
        );
    }

    #[test]
    fn destandardize_examples() {
        let params = StandardizationParams {
            col_mean: array![3.0],
            col_scale: array![2.0],
            y_mean: 10.0,
        };
        let m = FittedModel::new(Task::Linear, Method::Statistical, array![4.0], 0.0, 0.1);
        let d = destandardize(&m, &params).unwrap();
        assert_eq!(d.beta_original[0], 2.0);
        assert_eq!(d.intercept_original, 4.0);

        let zero = FittedModel::new(Task::Linear, Method::Statistical, array![0.0], 0.0, 0.1);
        let d = destandardize(&zero, &params).unwrap();
        assert_eq!(d.beta_original[0], 0.0);
        assert_eq!(d.intercept_original, 10.0);
        assert_eq!(d.support, vec![false]);

        let bad = StandardizationParams::identity(2);
        assert!(matches!(
            destandardize(&m, &bad),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn predictions_agree_across_scales() {
        let x = gaussian(30, 6, 5) * 2.0 - 0.7;
        for task in [Task::Linear, Task::Logistic] {
            let y = Array1::from_shape_fn(30, |i| (i % 2) as f64);
            let ds = LabeledDataset::new(x.clone(), y).unwrap();
            let (s, params) = standardize(&ds, task).unwrap();
            let beta = array![0.5, 0.0, -1.2, 0.0, 0.3, 2.0];
            let m = FittedModel::new(task, Method::Statistical, beta, 0.25, 0.0);
            let m = destandardize(&m, &params).unwrap();
            let raw = m.predict(ds.x()).unwrap();
            let std = m.predict_standardized(s.x(), params.y_mean).unwrap();
            for (a, b) in raw.iter().zip(std.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

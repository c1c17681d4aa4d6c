//! Evaluation metrics and paired significance testing.
//!
//! `precision` here is the fraction of truly irrelevant predictors that a
//! model sets to zero (a true-negative rate), and `recall` the fraction of
//! truly relevant predictors it keeps. This is the convention of the
//! benchmark tables this crate reproduces, not the TP/(TP+FP) definition.

use ndarray::Array2;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::lasso::softplus;
use crate::model::{FittedModel, LabeledDataset, Task};

/// Per-repetition evaluation of one fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub mse: Option<f64>,
    pub acc: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub selected_fraction: f64,
}

impl RunMetrics {
    pub fn evaluate(model: &FittedModel, test: &LabeledDataset) -> Result<Self> {
        let (mse, acc) = match model.task {
            Task::Linear => (Some(test_mse(model, test)?), None),
            Task::Logistic => (None, Some(test_accuracy(model, test)?)),
        };
        let (precision, recall) = match test.truth_support() {
            Some(truth) => (
                support_precision(model, truth).ok(),
                support_recall(model, truth).ok(),
            ),
            None => (None, None),
        };
        Ok(Self {
            mse,
            acc,
            precision,
            recall,
            selected_fraction: selected_fraction(model),
        })
    }
}

/// Mean squared error of `eta` (linear) or mean binary cross-entropy of
/// `sigmoid(eta)` (logistic) against `y`.
pub fn prediction_error(task: Task, eta: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    match task {
        Task::Linear => eta.iter().zip(y).map(|(e, y)| (y - e) * (y - e)).sum::<f64>() / n,
        Task::Logistic => eta.iter().zip(y).map(|(&e, &y)| softplus(e) - y * e).sum::<f64>() / n,
    }
}

/// Validation error of a destandardized model on raw data.
pub fn validation_error(model: &FittedModel, ds: &LabeledDataset) -> Result<f64> {
    let eta = model.linear_predictor(ds.x())?;
    Ok(prediction_error(
        model.task,
        eta.as_slice().expect("contiguous"),
        ds.y_slice(),
    ))
}

fn check_rows(x: &Array2<f64>, y_len: usize) -> Result<()> {
    if x.nrows() != y_len {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} responses",
            x.nrows(),
            y_len
        )));
    }
    Ok(())
}

pub fn test_mse(model: &FittedModel, test: &LabeledDataset) -> Result<f64> {
    check_rows(test.x(), test.n())?;
    let pred = model.predict(test.x())?;
    let n = test.n() as f64;
    Ok(pred
        .iter()
        .zip(test.y())
        .map(|(p, y)| (y - p) * (y - p))
        .sum::<f64>()
        / n)
}

/// Fraction of test points whose thresholded probability (>= 0.5) matches y.
pub fn test_accuracy(model: &FittedModel, test: &LabeledDataset) -> Result<f64> {
    let prob = model.predict(test.x())?;
    let hits = prob
        .iter()
        .zip(test.y())
        .filter(|(&p, &y)| (p >= 0.5) == (y == 1.0))
        .count();
    Ok(hits as f64 / test.n() as f64)
}

fn check_truth(model: &FittedModel, truth: &[bool]) -> Result<()> {
    if truth.len() != model.p() {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} entries, model {}",
            truth.len(),
            model.p()
        )));
    }
    Ok(())
}

/// Share of truly irrelevant predictors the model zeroes out.
pub fn support_precision(model: &FittedModel, truth: &[bool]) -> Result<f64> {
    check_truth(model, truth)?;
    let noise = truth.iter().filter(|&&t| !t).count();
    if noise == 0 {
        return Err(Error::Undefined("no truly irrelevant predictors"));
    }
    let zeroed = truth
        .iter()
        .zip(&model.support)
        .filter(|(&t, &s)| !t && !s)
        .count();
    Ok(zeroed as f64 / noise as f64)
}

/// Share of truly relevant predictors the model keeps.
pub fn support_recall(model: &FittedModel, truth: &[bool]) -> Result<f64> {
    check_truth(model, truth)?;
    let relevant = truth.iter().filter(|&&t| t).count();
    if relevant == 0 {
        return Err(Error::Undefined("empty true support"));
    }
    let kept = truth.iter().zip(&model.support).filter(|(&t, &s)| t && s).count();
    Ok(kept as f64 / relevant as f64)
}

pub fn selected_fraction(model: &FittedModel) -> f64 {
    model.support_size() as f64 / model.p() as f64
}

/// Two-sided paired Student t-test on `a - b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    pub t: f64,
    pub p_value: f64,
    pub df: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let r = a.len();
    if r < 2 {
        return Err(Error::Undefined("paired t-test needs at least two pairs"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = (r - 1) as f64;
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(PairedTTest {
            t: 0.0,
            p_value: 1.0,
            df,
        });
    }
    let mean = diffs.iter().sum::<f64>() / r as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / df;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let t = mean / (var / r as f64).sqrt();
    // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
    let p_value = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(PairedTTest { t, p_value, df })
}

//! Random problem instances shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use neural_lasso::model::{standardize, LabeledDataset, Task};
use neural_lasso::rng::seeded;
use rand::Rng;
use rand_distr::StandardNormal;

/// Raw design with i.i.d. normal entries and a sparse linear or Bernoulli
/// response.
pub fn raw_instance(n: usize, p: usize, task: Task, seed: u64) -> LabeledDataset {
    let mut rng = seeded(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    let beta: Vec<f64> = (0..p)
        .map(|j| {
            if j % 3 == 0 {
                rng.random_range(-2.0..2.0)
            } else {
                0.0
            }
        })
        .collect();
    let y = Array1::from_shape_fn(n, |i| {
        let eta: f64 = (0..p).map(|j| x[[i, j]] * beta[j]).sum();
        match task {
            Task::Linear => eta + rng.sample::<f64, _>(StandardNormal),
            Task::Logistic => {
                let prob = 1.0 / (1.0 + (-eta).exp());
                if rng.random::<f64>() < prob {
                    1.0
                } else {
                    0.0
                }
            }
        }
    });
    // guarantee both classes
    let mut y = y;
    if task == Task::Logistic {
        y[0] = 0.0;
        y[1] = 1.0;
    }
    LabeledDataset::new(x, y).unwrap()
}

/// Standardized instance.
pub fn instance(n: usize, p: usize, task: Task, seed: u64) -> LabeledDataset {
    standardize(&raw_instance(n, p, task, seed), task).unwrap().0
}

pub fn col_dot(ds: &LabeledDataset, j: usize, v: &[f64]) -> f64 {
    (0..ds.n()).map(|i| ds.x()[[i, j]] * v[i]).sum()
}

/// `X beta + b0`, by explicit loops over rows and columns.
pub fn naive_eta(ds: &LabeledDataset, beta: &[f64], b0: f64) -> Vec<f64> {
    (0..ds.n())
        .map(|i| b0 + (0..ds.p()).map(|j| ds.x()[[i, j]] * beta[j]).sum::<f64>())
        .collect()
}

pub fn naive_sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Penalized objective straight from its definition.
pub fn naive_objective(ds: &LabeledDataset, task: Task, beta: &[f64], b0: f64, lambda: f64) -> f64 {
    let eta = naive_eta(ds, beta, b0);
    let n = ds.n() as f64;
    let y = ds.y();
    let data: f64 = match task {
        Task::Linear => eta.iter().zip(y).map(|(e, y)| (y - e).powi(2)).sum::<f64>() / n,
        Task::Logistic => {
            -eta.iter()
                .zip(y)
                .map(|(&e, &y)| {
                    let s = naive_sigmoid(e);
                    y * s.ln() + (1.0 - y) * (1.0 - s).ln()
                })
                .sum::<f64>()
                / n
        }
    };
    data + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of the lasso stationarity conditions.
///
/// Linear: `g_j = (2/N) X_j^t (y - X beta)`; logistic:
/// `g_j = (1/N) X_j^t (y - sigmoid(eta))` with the intercept condition
/// `sum (y - p) = 0`. Nonzero coefficients need `g_j = lambda sign(beta_j)`,
/// zero ones `|g_j| <= lambda`.
pub fn kkt_violation(ds: &LabeledDataset, task: Task, beta: &[f64], b0: f64, lambda: f64) -> f64 {
    let n = ds.n() as f64;
    let eta = naive_eta(ds, beta, b0);
    let r: Vec<f64> = match task {
        Task::Linear => ds.y().iter().zip(&eta).map(|(y, e)| y - e).collect(),
        Task::Logistic => ds
            .y()
            .iter()
            .zip(&eta)
            .map(|(y, &e)| y - naive_sigmoid(e))
            .collect(),
    };
    let scale = match task {
        Task::Linear => 2.0 / n,
        Task::Logistic => 1.0 / n,
    };
    let mut worst: f64 = 0.0;
    if task == Task::Logistic {
        worst = (r.iter().sum::<f64>() / n).abs();
    }
    for (j, &b) in beta.iter().enumerate() {
        let g = scale * col_dot(ds, j, &r);
        let v = if b != 0.0 {
            (g - lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

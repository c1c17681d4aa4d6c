//! Synthetic benchmark data: Gaussian rows with AR(1) correlation.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::model::{sigmoid, LabeledDataset};
use crate::rng::{self, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub p: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub rho: f64,
    /// Standard deviation of the additive noise (linear responses only).
    pub noise_std: f64,
    /// Leading coefficients; the remaining `p - len` are zero.
    pub beta_pattern: Vec<f64>,
    pub permute_columns: bool,
    pub seed: u64,
    /// Draw 0/1 responses from `Bernoulli(sigmoid(logistic_scale * x'beta))`
    /// instead of linear ones. Not part of the benchmark design; used to
    /// exercise the logistic code paths on data with a known support.
    pub logistic: bool,
    pub logistic_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            p: 20,
            n_train: 50,
            n_test: 1000,
            rho: 0.5,
            noise_std: 1.0,
            beta_pattern: vec![1.0, 2.0, 3.0, 4.0],
            permute_columns: true,
            seed: 0,
            logistic: false,
            logistic_scale: 1.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 5 {
            return Err(Error::BadConfig(format!("p = {} must be at least 5", self.p)));
        }
        if self.p < self.beta_pattern.len() {
            return Err(Error::BadConfig(format!(
                "p = {} is smaller than the coefficient pattern ({})",
                self.p,
                self.beta_pattern.len()
            )));
        }
        if self.n_train < 2 {
            return Err(Error::BadConfig("n_train must be at least 2".into()));
        }
        if self.n_test < 2 {
            return Err(Error::BadConfig("n_test must be at least 2".into()));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::BadRho(self.rho));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::BadConfig(format!(
                "noise_std = {} must be finite and >= 0",
                self.noise_std
            )));
        }
        if self.beta_pattern.iter().any(|b| !b.is_finite()) {
            return Err(Error::BadConfig("coefficient pattern must be finite".into()));
        }
        Ok(())
    }

    /// True coefficients in column order, after the permutation.
    pub fn true_beta(&self) -> Array1<f64> {
        let beta = self.unpermuted_beta();
        let perm = self.column_order();
        Array1::from_iter(perm.iter().map(|&src| beta[src]))
    }

    fn unpermuted_beta(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.p];
        beta[..self.beta_pattern.len()].copy_from_slice(&self.beta_pattern);
        beta
    }

    /// `order[j]` is the generating variable placed in output column `j`.
    fn column_order(&self) -> Vec<usize> {
        if self.permute_columns {
            rng::permutation(self.p, self.seed)
        } else {
            (0..self.p).collect()
        }
    }
}

/// `rho^|i-j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> Result<Array2<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::BadRho(rho));
    }
    Ok(Array2::from_shape_fn((p, p), |(i, j)| {
        rho.powi(i.abs_diff(j) as i32)
    }))
}

/// Rows `L z` with `z` standard normal, so each row is `N(0, L L')`.
fn gaussian_rows(n: usize, chol: &Array2<f64>, rng: &mut SeededRng) -> Array2<f64> {
    let p = chol.nrows();
    let mut out = Array2::zeros((n, p));
    let mut z = vec![0.0; p];
    for mut row in out.rows_mut() {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for i in 0..p {
            row[i] = (0..=i).map(|k| chol[[i, k]] * z[k]).sum();
        }
    }
    out
}

fn responses(cfg: &SyntheticConfig, x: &Array2<f64>, beta: &[f64], rng: &mut SeededRng) -> Array1<f64> {
    let signal = x.dot(&Array1::from(beta.to_vec()));
    if cfg.logistic {
        signal.mapv(|s| {
            let u: f64 = rng.random();
            if u < sigmoid(cfg.logistic_scale * s) {
                1.0
            } else {
                0.0
            }
        })
    } else {
        signal.mapv(|s| {
            let e: f64 = StandardNormal.sample(rng);
            s + cfg.noise_std * e
        })
    }
}

fn permute_columns(x: &Array2<f64>, order: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(1), order)
}

/// Draws a training and a test set from the same model.
///
/// Draw order from one seeded stream: training X, training noise, test X,
/// test noise. The column permutation uses its own stream derived from the
/// seed and is shared by both sets and the truth support.
pub fn simulate(cfg: &SyntheticConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    cfg.validate()?;
    let chol = cholesky(&ar1_covariance(cfg.p, cfg.rho)?)?;
    let beta = cfg.unpermuted_beta();
    let order = cfg.column_order();
    let mut rng = rng::seeded(rng::mix_seed(cfg.seed, 1));

    let x_train = gaussian_rows(cfg.n_train, &chol, &mut rng);
    let y_train = responses(cfg, &x_train, &beta, &mut rng);
    let x_test = gaussian_rows(cfg.n_test, &chol, &mut rng);
    let y_test = responses(cfg, &x_test, &beta, &mut rng);

    let truth: Vec<bool> = order.iter().map(|&src| beta[src] != 0.0).collect();
    let train =
        LabeledDataset::new(permute_columns(&x_train, &order), y_train)?.with_truth_support(truth.clone())?;
    let test = LabeledDataset::new(permute_columns(&x_test, &order), y_test)?.with_truth_support(truth)?;
    Ok((train, test))
}

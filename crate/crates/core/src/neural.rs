//! The lasso as a one-layer network.
//!
//! The network computes `gamma * X w` (plus a bias `b0` and a sigmoid for the
//! logistic task) and is trained on
//!
//! ```text
//! L(w, gamma) = R(y, gamma X w + b0) + l1 * ||w||_1
//! ```
//!
//! which is the lasso objective under `beta = gamma * w`, `lambda = l1 / gamma`.
//! Gradient steps never produce exact zeros, so after every epoch a
//! subgradient test decides which weights can be set to zero
//! ([`zero_condition_linear`], [`zero_condition_logistic`]).
//!
//! All kernels expect standardized predictors; the linear ones also expect a
//! centered response.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::lasso::softplus;
use crate::linalg::{axpy, dot};
use crate::model::{sigmoid, FittedModel, LabeledDataset, Method, StandardizationParams, Task};

/// Trainable state of the network plus its penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralParams {
    pub w: Array1<f64>,
    pub gamma: f64,
    /// Output bias; only used by the logistic network.
    pub b0: f64,
    pub l1: f64,
    pub gamma_frozen: bool,
}

impl NeuralParams {
    /// `w = 0`, `gamma = 1`, `b0 = 0`.
    pub fn init(p: usize, l1: f64) -> Self {
        Self {
            w: Array1::zeros(p),
            gamma: 1.0,
            b0: 0.0,
            l1,
            gamma_frozen: false,
        }
    }

    pub fn frozen_gamma(mut self) -> Self {
        self.gamma = 1.0;
        self.gamma_frozen = true;
        self
    }

    pub fn p(&self) -> usize {
        self.w.len()
    }

    /// Effective regression coefficients `gamma * w`.
    pub fn beta(&self) -> Array1<f64> {
        &self.w * self.gamma
    }

    /// Effective lasso penalty `l1 / gamma`, undefined at `gamma = 0`.
    pub fn effective_lambda(&self) -> Option<f64> {
        (self.gamma != 0.0).then(|| self.l1 / self.gamma)
    }

    /// Converts to a model and maps it back to original units.
    pub fn to_model(&self, task: Task, method: Method, std: &StandardizationParams) -> Result<FittedModel> {
        let intercept = match task {
            Task::Linear => 0.0,
            Task::Logistic => self.b0,
        };
        let lambda = self.effective_lambda().unwrap_or(f64::INFINITY);
        let m = FittedModel::new(task, method, self.beta(), intercept, lambda);
        crate::model::destandardize(&m, std)
    }

    fn w_slice(&self) -> &[f64] {
        self.w.as_slice().expect("contiguous")
    }

    fn l1_norm(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }
}

/// Gradient of the network loss with respect to `(w, gamma, b0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralGradient {
    pub w: Array1<f64>,
    pub gamma: f64,
    pub b0: f64,
}

/// Outcome of the per-epoch zero test.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCheckReport {
    /// Left-hand side of the zero condition for each weight.
    pub stat: Array1<f64>,
    /// `l1`.
    pub threshold: f64,
    pub zeroed: Vec<bool>,
    /// Bound on the subgradient `|s_j| <= 1` the condition derives from.
    pub subgradient_bound: f64,
}

impl ZeroCheckReport {
    fn from_stat(stat: Array1<f64>, threshold: f64) -> Self {
        let zeroed = stat.iter().map(|s| s.abs() <= threshold).collect();
        Self {
            stat,
            threshold,
            zeroed,
            subgradient_bound: 1.0,
        }
    }

    pub fn zeroed_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.zeroed
            .iter()
            .enumerate()
            .filter_map(|(j, &z)| z.then_some(j))
    }
}

fn check_dims(ds: &LabeledDataset, params: &NeuralParams) -> Result<()> {
    if ds.p() != params.p() {
        return Err(Error::DimensionMismatch(format!(
            "network has {} weights, data has {} columns",
            params.p(),
            ds.p()
        )));
    }
    Ok(())
}

/// `X w` without the gamma scale.
fn xw(ds: &LabeledDataset, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; ds.n()];
    for (j, &wj) in w.iter().enumerate() {
        if wj != 0.0 {
            axpy(&mut out, wj, ds.column(j));
        }
    }
    out
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `gamma * X w`.
pub fn forward_linear(ds: &LabeledDataset, params: &NeuralParams) -> Result<Array1<f64>> {
    check_dims(ds, params)?;
    let g = params.gamma;
    Ok(xw(ds, params.w_slice()).into_iter().map(|v| g * v).collect())
}

/// `(1/N) ||y - gamma X w||^2 + l1 ||w||_1`.
pub fn loss_linear(ds: &LabeledDataset, params: &NeuralParams) -> Result<f64> {
    check_dims(ds, params)?;
    let n = ds.n() as f64;
    let u = xw(ds, params.w_slice());
    let sse: f64 = ds
        .y()
        .iter()
        .zip(&u)
        .map(|(y, u)| {
            let r = y - params.gamma * u;
            r * r
        })
        .sum();
    Ok(sse / n + params.l1 * params.l1_norm())
}

/// Gradient of [`loss_linear`]. The penalty contributes `l1 * sign(w_j)`,
/// taken as 0 at `w_j = 0`.
pub fn grad_linear(ds: &LabeledDataset, params: &NeuralParams) -> Result<NeuralGradient> {
    check_dims(ds, params)?;
    let n = ds.n() as f64;
    let g = params.gamma;
    let u = xw(ds, params.w_slice());
    let r: Vec<f64> = ds.y().iter().zip(&u).map(|(y, u)| y - g * u).collect();
    let w = Array1::from_shape_fn(ds.p(), |j| {
        -2.0 * g / n * dot(ds.column(j), &r) + params.l1 * sign(params.w[j])
    });
    Ok(NeuralGradient {
        w,
        gamma: -2.0 / n * dot(&u, &r),
        b0: 0.0,
    })
}

/// `sigmoid(gamma X w + b0)`.
pub fn forward_logistic(ds: &LabeledDataset, params: &NeuralParams) -> Result<Array1<f64>> {
    check_dims(ds, params)?;
    Ok(xw(ds, params.w_slice())
        .into_iter()
        .map(|u| sigmoid(params.gamma * u + params.b0))
        .collect())
}

/// `(1/N) sum [log(1 + exp(eta)) - y eta] + l1 ||w||_1` with
/// `eta = gamma X w + b0`; equal to the mean binary cross-entropy of
/// [`forward_logistic`] plus the penalty.
pub fn loss_logistic(ds: &LabeledDataset, params: &NeuralParams) -> Result<f64> {
    check_dims(ds, params)?;
    let n = ds.n() as f64;
    let u = xw(ds, params.w_slice());
    let data: f64 = ds
        .y()
        .iter()
        .zip(&u)
        .map(|(&y, &u)| {
            let eta = params.gamma * u + params.b0;
            softplus(eta) - y * eta
        })
        .sum();
    Ok(data / n + params.l1 * params.l1_norm())
}

pub fn grad_logistic(ds: &LabeledDataset, params: &NeuralParams) -> Result<NeuralGradient> {
    check_dims(ds, params)?;
    let n = ds.n() as f64;
    let g = params.gamma;
    let u = xw(ds, params.w_slice());
    let s: Vec<f64> = ds
        .y()
        .iter()
        .zip(&u)
        .map(|(&y, &u)| sigmoid(g * u + params.b0) - y)
        .collect();
    let w = Array1::from_shape_fn(ds.p(), |j| {
        g / n * dot(ds.column(j), &s) + params.l1 * sign(params.w[j])
    });
    Ok(NeuralGradient {
        w,
        gamma: dot(&u, &s) / n,
        b0: s.iter().sum::<f64>() / n,
    })
}

pub fn loss(task: Task, ds: &LabeledDataset, params: &NeuralParams) -> Result<f64> {
    match task {
        Task::Linear => loss_linear(ds, params),
        Task::Logistic => loss_logistic(ds, params),
    }
}

pub fn gradient(task: Task, ds: &LabeledDataset, params: &NeuralParams) -> Result<NeuralGradient> {
    match task {
        Task::Linear => grad_linear(ds, params),
        Task::Logistic => grad_logistic(ds, params),
    }
}

/// `stat_j = (2/N) gamma X_j^t (y - gamma X w*_j)`, where `w*_j` is `w` with
/// coordinate j zeroed; weight j may be zero when `|stat_j| <= l1`.
pub fn zero_condition_linear(ds: &LabeledDataset, params: &NeuralParams) -> Result<ZeroCheckReport> {
    check_dims(ds, params)?;
    let n = ds.n() as f64;
    let g = params.gamma;
    let u = xw(ds, params.w_slice());
    let r: Vec<f64> = ds.y().iter().zip(&u).map(|(y, u)| y - g * u).collect();
    // X w*_j = X w - X_j w_j, so X_j^t (y - g X w*_j) = X_j^t r + g w_j ||X_j||^2
    let stat = Array1::from_shape_fn(ds.p(), |j| {
        let col = ds.column(j);
        let wj = params.w[j];
        let back = if wj != 0.0 { g * wj * dot(col, col) } else { 0.0 };
        2.0 * g / n * (dot(col, &r) + back)
    });
    Ok(ZeroCheckReport::from_stat(stat, params.l1))
}

/// `stat_j = (gamma/N) X_j^t (y - sigmoid(gamma X w*_j + b0))`.
pub fn zero_condition_logistic(ds: &LabeledDataset, params: &NeuralParams) -> Result<ZeroCheckReport> {
    check_dims(ds, params)?;
    let n = ds.n() as f64;
    let g = params.gamma;
    let y = ds.y_slice();
    let u = xw(ds, params.w_slice());
    let base: Vec<f64> = y
        .iter()
        .zip(&u)
        .map(|(&y, &u)| y - sigmoid(g * u + params.b0))
        .collect();
    let mut scratch = vec![0.0; ds.n()];
    let stat = Array1::from_shape_fn(ds.p(), |j| {
        let col = ds.column(j);
        let wj = params.w[j];
        if wj == 0.0 {
            return g / n * dot(col, &base);
        }
        for i in 0..scratch.len() {
            scratch[i] = y[i] - sigmoid(g * (u[i] - col[i] * wj) + params.b0);
        }
        g / n * dot(col, &scratch)
    });
    Ok(ZeroCheckReport::from_stat(stat, params.l1))
}

pub fn zero_condition(task: Task, ds: &LabeledDataset, params: &NeuralParams) -> Result<ZeroCheckReport> {
    match task {
        Task::Linear => zero_condition_linear(ds, params),
        Task::Logistic => zero_condition_logistic(ds, params),
    }
}

/// Sets every flagged weight to exactly zero.
pub fn apply_zeroing(params: &NeuralParams, report: &ZeroCheckReport) -> NeuralParams {
    let mut out = params.clone();
    for j in report.zeroed_indices() {
        out.w[j] = 0.0;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment estimates, one slot per trainable scalar.
///
/// Slot layout for a network: `w_0..w_{p-1}`, then `gamma` unless frozen,
/// then `b0` for the logistic task.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(slots: usize, cfg: AdamConfig) -> Self {
        Self {
            m: vec![0.0; slots],
            v: vec![0.0; slots],
            step_count: 0,
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
        }
    }

    pub fn for_network(task: Task, params: &NeuralParams, cfg: AdamConfig) -> Self {
        Self::new(trainable_len(task, params), cfg)
    }

    /// One bias-corrected Adam update of `theta` in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "adam has {} slots, got {} parameters and {} gradients",
                self.m.len(),
                theta.len(),
                grad.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    /// Clears both moments of the given slots.
    pub fn reset_slots(&mut self, slots: impl IntoIterator<Item = usize>) {
        for s in slots {
            self.m[s] = 0.0;
            self.v[s] = 0.0;
        }
    }
}

pub fn trainable_len(task: Task, params: &NeuralParams) -> usize {
    params.p() + usize::from(!params.gamma_frozen) + usize::from(task == Task::Logistic)
}

/// Applies one Adam update to the trainable parameters of the network.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut NeuralParams,
    grad: &NeuralGradient,
    task: Task,
) -> Result<()> {
    if grad.w.len() != params.p() {
        return Err(Error::DimensionMismatch(format!(
            "gradient has {} weights, network {}",
            grad.w.len(),
            params.p()
        )));
    }
    let mut theta: Vec<f64> = params.w.to_vec();
    let mut g: Vec<f64> = grad.w.to_vec();
    if !params.gamma_frozen {
        theta.push(params.gamma);
        g.push(grad.gamma);
    }
    if task == Task::Logistic {
        theta.push(params.b0);
        g.push(grad.b0);
    }
    state.step(&mut theta, &g)?;
    let p = params.p();
    params
        .w
        .as_slice_mut()
        .expect("contiguous")
        .copy_from_slice(&theta[..p]);
    let mut k = p;
    if !params.gamma_frozen {
        params.gamma = theta[k];
        k += 1;
    }
    if task == Task::Logistic {
        params.b0 = theta[k];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn tiny() -> LabeledDataset {
        LabeledDataset::new(array![[-1.0], [1.0]], array![-1.0, 1.0]).unwrap()
    }

    #[test]
    fn forward_examples() {
        let ds = LabeledDataset::new(array![[2.0], [0.0]], array![0.0, 0.0]).unwrap();
        let mut params = NeuralParams::init(1, 0.0);
        assert_eq!(forward_linear(&ds, &params).unwrap().to_vec(), vec![0.0, 0.0]);
        params.w[0] = 3.0;
        assert_eq!(forward_linear(&ds, &params).unwrap()[0], 6.0);
        let bad = NeuralParams::init(2, 0.0);
        assert!(matches!(
            forward_linear(&ds, &bad),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn perfect_fit_has_zero_loss() {
        let mut params = NeuralParams::init(1, 0.0);
        params.w[0] = 1.0;
        assert_eq!(loss_linear(&tiny(), &params).unwrap(), 0.0);
        let zero = NeuralParams::init(1, 0.5);
        assert_eq!(loss_linear(&tiny(), &zero).unwrap(), 1.0);
    }

    #[test]
    fn gradient_special_cases() {
        let ds = tiny();
        let params = NeuralParams::init(1, 0.0);
        let g = grad_linear(&ds, &params).unwrap();
        // (-2 gamma / N) X^t y = -2/2 * 2
        assert_eq!(g.w[0], -2.0);

        let mut p0 = NeuralParams::init(1, 0.3);
        p0.gamma = 0.0;
        p0.w[0] = 0.7;
        let g = grad_linear(&ds, &p0).unwrap();
        assert_eq!(g.w[0], 0.3);
        assert!((g.gamma - (-2.0 / 2.0 * 0.7 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn logistic_at_origin() {
        let x = Array2::from_shape_fn((4, 2), |(i, j)| (i as f64) - 1.5 + j as f64 * 0.1 * i as f64);
        let ds = LabeledDataset::new(x, array![0.0, 1.0, 0.0, 1.0]).unwrap();
        let params = NeuralParams::init(2, 0.0);
        let prob = forward_logistic(&ds, &params).unwrap();
        assert!(prob.iter().all(|&p| p == 0.5));
        assert!((loss_logistic(&ds, &params).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_loss_is_finite_for_large_margins() {
        let ds = LabeledDataset::new(array![[1.0], [-1.0]], array![0.0, 1.0]).unwrap();
        let mut params = NeuralParams::init(1, 0.0);
        params.w[0] = 1e4;
        let l = loss_logistic(&ds, &params).unwrap();
        assert!(l.is_finite());
        assert!((l - 1e4).abs() < 1e-9);
    }

    #[test]
    fn zero_condition_orthogonal_column() {
        // column 1 is orthogonal to y and w_1 = 0
        let x = array![[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]];
        let ds = LabeledDataset::new(x, array![1.0, -1.0, 1.0, -1.0]).unwrap();
        let mut params = NeuralParams::init(2, 0.1);
        params.w[0] = 0.5;
        let rep = zero_condition_linear(&ds, &params).unwrap();
        assert_eq!(rep.stat[1], 0.0);
        assert!(rep.zeroed[1]);
        assert!(!rep.zeroed[0]);
        params.l1 = 0.0;
        let rep = zero_condition_linear(&ds, &params).unwrap();
        assert!(rep.zeroed[1]);
        assert!(!rep.zeroed[0]);
    }

    #[test]
    fn zero_condition_logistic_gamma_zero() {
        let x = array![[1.0, 0.3], [-1.0, 2.0], [0.5, -1.0]];
        let ds = LabeledDataset::new(x, array![1.0, 0.0, 1.0]).unwrap();
        let mut params = NeuralParams::init(2, 0.01);
        params.gamma = 0.0;
        params.w = array![0.4, -2.0];
        let rep = zero_condition_logistic(&ds, &params).unwrap();
        assert!(rep.stat.iter().all(|&s| s == 0.0));
        assert!(rep.zeroed.iter().all(|&z| z));
    }

    #[test]
    fn zeroing_examples() {
        let mut params = NeuralParams::init(3, 0.1);
        params.w = array![0.5, -0.2, 1e-3];
        let none = ZeroCheckReport::from_stat(array![1.0, 1.0, 1.0], 0.1);
        assert_eq!(apply_zeroing(&params, &none), params);
        let all = ZeroCheckReport::from_stat(array![0.0, 0.0, 0.0], 0.1);
        let z = apply_zeroing(&params, &all);
        assert!(z.w.iter().all(|v| v.to_bits() == 0));
        let some = ZeroCheckReport::from_stat(array![1.0, 0.05, 0.0], 0.1);
        let once = apply_zeroing(&params, &some);
        assert_eq!(apply_zeroing(&once, &some), once);
        assert_eq!(once.w, array![0.5, 0.0, 0.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut st = AdamState::new(
            1,
            AdamConfig {
                lr: 0.1,
                ..AdamConfig::default()
            },
        );
        let mut theta = [0.0];
        st.step(&mut theta, &[1.0]).unwrap();
        assert!((theta[0] + 0.1).abs() < 1e-8);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut st = AdamState::new(2, AdamConfig::default());
        let mut theta = [1.0, -2.0];
        st.step(&mut theta, &[0.0, 0.0]).unwrap();
        assert_eq!(theta, [1.0, -2.0]);
        assert_eq!(st.step_count, 1);
        assert!(st.step(&mut theta, &[0.0]).is_err());
    }

    #[test]
    fn adam_constant_gradient_saturates_at_lr() {
        // With constant g both bias-corrected moments equal g and g^2 exactly,
        // so every step is lr * g / (|g| + eps).
        let cfg = AdamConfig::default();
        let mut st = AdamState::new(1, cfg);
        let mut theta = [0.0];
        let mut prev = 0.0;
        for k in 1..=500 {
            st.step(&mut theta, &[2.5]).unwrap();
            let step = prev - theta[0];
            assert!(step > 0.0);
            assert!(
                (step - cfg.lr * 2.5 / (2.5 + cfg.eps)).abs() < 1e-12,
                "step {k}: {step}"
            );
            prev = theta[0];
        }
    }

    #[test]
    fn adam_step_respects_frozen_gamma() {
        let ds = tiny();
        let mut params = NeuralParams::init(1, 0.0).frozen_gamma();
        let mut st = AdamState::for_network(Task::Linear, &params, AdamConfig::default());
        assert_eq!(st.m.len(), 1);
        let g = grad_linear(&ds, &params).unwrap();
        adam_step(&mut st, &mut params, &g, Task::Linear).unwrap();
        assert_eq!(params.gamma, 1.0);
        assert!(params.w[0] > 0.0);

        let logistic = NeuralParams::init(3, 0.0);
        assert_eq!(trainable_len(Task::Logistic, &logistic), 5);
    }
}

//! C ABI over `neural_lasso`.
//!
//! Datasets and fitted models are opaque heap handles created by `nl_*_new`,
//! `nl_dataset_load_csv` or `nl_fit` and released with the matching
//! `nl_*_free`. Every fallible call returns an [`NlStatus`]; on failure the
//! message is available from [`nl_last_error_message`] on the same thread.
//! Panics never cross the boundary; they are reported as
//! `NL_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ndarray::Array2;

use neural_lasso::harness::{fit_method, load_csv};
use neural_lasso::lasso::lambda_grid;
use neural_lasso::model::{make_folds, standardize};
use neural_lasso::neural::AdamConfig;
use neural_lasso::training::TrainConfig;
use neural_lasso::{Error, FittedModel, LabeledDataset, Method, Task};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    ConstantColumn = 5,
    NoConvergence = 6,
    SingularDesign = 7,
    SingleClass = 8,
    Io = 9,
    /// Malformed file contents, a missing target column or a non-binary
    /// logistic response.
    Parse = 10,
    Internal = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlTask {
    Linear = 0,
    Logistic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlMethod {
    Statistical = 0,
    Standard = 1,
    Restricted = 2,
    Voting = 3,
}

/// Fitting options; obtain defaults from [`nl_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlFitOptions {
    pub k: usize,
    pub grid_count: usize,
    pub grid_ratio: f64,
    pub lr: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

/// Opaque dataset handle.
pub struct NlDataset(LabeledDataset);

/// Opaque fitted-model handle.
pub struct NlModel(FittedModel);

impl From<NlTask> for Task {
    fn from(t: NlTask) -> Self {
        match t {
            NlTask::Linear => Task::Linear,
            NlTask::Logistic => Task::Logistic,
        }
    }
}

impl From<NlMethod> for Method {
    fn from(m: NlMethod) -> Self {
        match m {
            NlMethod::Statistical => Method::Statistical,
            NlMethod::Standard => Method::StandardNeural,
            NlMethod::Restricted => Method::RestrictedNeural,
            NlMethod::Voting => Method::VotingNeural,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NlStatus {
    match err {
        Error::DimensionMismatch(_) | Error::LengthMismatch(..) => NlStatus::DimensionMismatch,
        Error::NonFinite => NlStatus::NonFinite,
        Error::ConstantColumn(_) => NlStatus::ConstantColumn,
        Error::NoConvergence { .. } | Error::NonConvergent(_) => NlStatus::NoConvergence,
        Error::SingularDesign => NlStatus::SingularDesign,
        Error::SingleClass => NlStatus::SingleClass,
        Error::Io(_) => NlStatus::Io,
        Error::Parse { .. } | Error::MissingTarget(_) | Error::NonBinaryTarget { .. } => NlStatus::Parse,
        _ => NlStatus::InvalidArgument,
    }
}

enum Failure {
    Status(NlStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null_pointer(name: &str) -> Failure {
    Failure::Status(NlStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlStatus::Ok,
        Ok(Err(Failure::Status(status, msg))) => {
            set_last_error(msg);
            status
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            NlStatus::Internal
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null_pointer(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(NlStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

unsafe fn matrix(x: *const f64, n: usize, p: usize) -> Result<Array2<f64>, Failure> {
    if x.is_null() {
        return Err(null_pointer("x"));
    }
    let len = n
        .checked_mul(p)
        .ok_or_else(|| Failure::Status(NlStatus::InvalidArgument, "n * p overflows".into()))?;
    let data = std::slice::from_raw_parts(x, len).to_vec();
    Array2::from_shape_vec((n, p), data)
        .map_err(|e| Failure::Status(NlStatus::DimensionMismatch, e.to_string()))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn nl_fit_options_default() -> NlFitOptions {
    NlFitOptions {
        k: 5,
        grid_count: 100,
        grid_ratio: 1e-3,
        lr: AdamConfig::default().lr,
        max_epochs: TrainConfig::default().max_epochs,
        seed: 0,
    }
}

/// Copies a row-major `n x p` matrix and `n` responses into a new dataset.
///
/// # Safety
/// `x` must point to `n * p` readable doubles, `y` to `n`, and `out` must be
/// a valid location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn nl_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut NlDataset,
) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_pointer("out"));
        }
        if y.is_null() {
            return Err(null_pointer("y"));
        }
        let x = matrix(x, n, p)?;
        let y = std::slice::from_raw_parts(y, n).to_vec();
        let ds = LabeledDataset::new(x, y.into())?;
        *out = Box::into_raw(Box::new(NlDataset(ds)));
        Ok(())
    })
}

/// Loads a CSV file with a header row; `target` names the response column.
///
/// # Safety
/// `path` and `target` must be nul-terminated strings; `out` must be a valid
/// location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn nl_dataset_load_csv(
    path: *const c_char,
    target: *const c_char,
    task: NlTask,
    out: *mut *mut NlDataset,
) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_pointer("out"));
        }
        let path = c_str(path, "path")?;
        let target = c_str(target, "target")?;
        let ds = load_csv(Path::new(path), target, task.into())?;
        *out = Box::into_raw(Box::new(NlDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn nl_dataset_free(ds: *mut NlDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of observations, 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn nl_dataset_rows(ds: *const NlDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n())
}

/// Number of predictors, 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn nl_dataset_cols(ds: *const NlDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.p())
}

/// Fits `method` to `ds`. `options` may be null for the defaults.
///
/// # Safety
/// `ds` must be a live dataset handle, `options` null or valid, and `out` a
/// valid location for one pointer.
#[no_mangle]
pub unsafe extern "C" fn nl_fit(
    ds: *const NlDataset,
    task: NlTask,
    method: NlMethod,
    options: *const NlFitOptions,
    out: *mut *mut NlModel,
) -> NlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_pointer("out"));
        }
        let ds = &ds.as_ref().ok_or_else(|| null_pointer("ds"))?.0;
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| nl_fit_options_default());
        let task: Task = task.into();
        ds.check_task(task)?;
        let (std, _) = standardize(ds, task)?;
        let grid = lambda_grid(&std, task, opts.grid_count, opts.grid_ratio)?;
        let folds = make_folds(ds.n(), opts.k, opts.seed)?;
        let train_cfg = TrainConfig {
            max_epochs: opts.max_epochs,
            adam: AdamConfig {
                lr: opts.lr,
                ..AdamConfig::default()
            },
            seed: opts.seed,
            ..TrainConfig::default()
        };
        let model = fit_method(method.into(), ds, task, &grid, &folds, &train_cfg)?;
        *out = Box::into_raw(Box::new(NlModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn nl_model_free(model: *mut NlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of coefficients, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn nl_model_cols(model: *const NlModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.p())
}

/// Number of nonzero coefficients, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn nl_model_support_size(model: *const NlModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.support_size())
}

/// Copies the original-scale coefficients into `out[0..len]`; `len` must
/// equal the number of predictors.
///
/// # Safety
/// `model` must be a live model handle and `out` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nl_model_coefficients(model: *const NlModel, out: *mut f64, len: usize) -> NlStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null_pointer("model"))?.0;
        if out.is_null() {
            return Err(null_pointer("out"));
        }
        if len != m.p() {
            return Err(Error::LengthMismatch(m.p(), len).into());
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, s) in dst.iter_mut().zip(m.beta_original.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Writes the original-scale intercept and the penalty of the fit.
///
/// # Safety
/// `model` must be a live model handle; `intercept` and `lambda` must be
/// valid or null (null outputs are skipped).
#[no_mangle]
pub unsafe extern "C" fn nl_model_summary(
    model: *const NlModel,
    intercept: *mut f64,
    lambda: *mut f64,
) -> NlStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null_pointer("model"))?.0;
        if let Some(i) = intercept.as_mut() {
            *i = m.intercept_original;
        }
        if let Some(l) = lambda.as_mut() {
            *l = m.lambda;
        }
        Ok(())
    })
}

/// Predicts `n` rows of the row-major `n x p` matrix `x` into `out`:
/// responses for linear models, probabilities for logistic ones.
///
/// # Safety
/// `model` must be a live model handle, `x` must point to `n * p` readable
/// doubles and `out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nl_model_predict(
    model: *const NlModel,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> NlStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null_pointer("model"))?.0;
        if out.is_null() {
            return Err(null_pointer("out"));
        }
        let x = matrix(x, n, p)?;
        let pred = m.predict(&x)?;
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(pred.as_slice().expect("contiguous"));
        Ok(())
    })
}

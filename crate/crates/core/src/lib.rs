//! Sparse linear and logistic regression with the lasso penalty, fitted
//! either by coordinate descent or by a one-layer network whose loss is the
//! lasso objective.
//!
//! ```
//! use neural_lasso::{datagen, lasso, model::Task};
//!
//! let (train, _test) = datagen::simulate(&datagen::SyntheticConfig::default()).unwrap();
//! let (std, _) = neural_lasso::model::standardize(&train, Task::Linear).unwrap();
//! let grid = lasso::lambda_grid(&std, Task::Linear, 20, 1e-2).unwrap();
//! let fit = lasso::cv_statistical_lasso(&train, Task::Linear, 5, &grid, 7, &Default::default()).unwrap();
//! assert!(fit.model.support_size() > 0);
//! ```

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod lasso;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use model::{FittedModel, LabeledDataset, Method, Task};

//! Closed-form ridge regression for extreme multi-label classification.
//!
//! Training solves `min_W ‖Y − XW‖²_F + λ‖W‖²_F` exactly through whichever
//! normal equations are smaller, optionally re-weighting each label column
//! by its inverse propensity to favour tail labels. Predictions rank labels
//! by `xᵀŴ`; quality is measured with P@K and PSP@K.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which is what the solver's
//! tolerances assume.

pub mod container;
pub mod data;
pub mod dense;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod reduce;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod sparse;
pub mod synthetic;
pub mod weighting;

pub use container::MatrixPayload;
pub use data::{concat_features, parse_dataset, train_validation_split, write_dataset};
pub use error::{Error, ParseErrorKind, Result};
pub use metrics::{label_contribution_at_k, label_frequency_histogram, precision_at_k, psp_at_k, MetricsReport};
pub use model::{train, RankedPrediction, SparseVector};
pub use reduce::{apply_reduction, fit_sparse_random_projection, fit_truncated_svd, ReductionKind};
pub use scalar::Scalar;
pub use solver::{gram_dual, gram_primal, solve_ridge, solve_spd, RidgeSolveConfig, SolveMode, Targets};
pub use weighting::{apply_weights, compute_propensity, PropensityModel};

pub type SparseMatrix = sparse::SparseMatrix<f64>;
pub type DenseMatrix = dense::DenseMatrix<f64>;
pub type Dataset = data::Dataset<f64>;
pub type RidgeModel = model::RidgeModel<f64>;
pub type ReductionTransform = reduce::ReductionTransform<f64>;

pub type SparseMatrixF32 = sparse::SparseMatrix<f32>;
pub type DenseMatrixF32 = dense::DenseMatrix<f32>;
pub type DatasetF32 = data::Dataset<f32>;
pub type RidgeModelF32 = model::RidgeModel<f32>;
pub type ReductionTransformF32 = reduce::ReductionTransform<f32>;

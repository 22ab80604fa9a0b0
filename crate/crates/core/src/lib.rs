//! Regression imputation of a single missing covariate.
//!
//! Four imputation strategies (deterministic or posterior-predictive, with
//! or without the outcome in the imputation model), the outcome-model
//! inference that follows them, a data generator for a binary-auxiliary MAR
//! world, and closed-form population values for everything the Monte Carlo
//! code estimates.

pub mod error;
pub mod impute;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod scenario;
pub mod theory;

pub use error::{Error, Result};
pub use impute::{impute, impute_multiple, ImputationKind, ImputationMethod, ImputedDataset};
pub use inference::{
    bootstrap_se, fit_complete_case, fit_full_cohort, fit_outcome, pool_rubin, BootstrapResult,
    FitSource, OutcomeFit, PooledEstimate,
};
pub use linalg::{
    cholesky, fit_ols, mean, predict, sample_covariance, sample_variance, FittedLinearModel, Matrix,
};
pub use rng::{stream_id, RngStream};
pub use scenario::{generate, Dataset, ScenarioParams};
pub use theory::{
    expected_coefficient_variances, theory_quantities, ExpectedCoefficientVariances,
    TheoreticalQuantities,
};

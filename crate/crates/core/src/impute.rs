//! Regression imputation of the single missing covariate.
//!
//! The imputation model regresses `x_obs` on `(1, z)` or `(1, z, y)` over the
//! observed rows. Deterministic imputation fills each missing cell with the
//! point prediction. Stochastic imputation draws from the posterior
//! predictive distribution under a flat prior, one parameter draw per
//! completed dataset:
//!
//! 1. `σ̇² ~ scaled-inv-χ²(n_obs − p, SSR/(n_obs − p))`
//! 2. `coef ~ N(coef_hat, σ̇²·(WᵀW)⁻¹)`
//! 3. each missing cell gets `row·coef + N(0, σ̇²)`, independently
//!
//! Observed cells are copied bit for bit.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fit_ols, FittedLinearModel, Matrix};
use crate::rng::RngStream;
use crate::scenario::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImputationKind {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImputationMethod {
    pub kind: ImputationKind,
    pub include_outcome: bool,
}

impl ImputationMethod {
    pub const DET: Self = Self::new(ImputationKind::Deterministic, false);
    pub const DET_Y: Self = Self::new(ImputationKind::Deterministic, true);
    pub const STOC: Self = Self::new(ImputationKind::Stochastic, false);
    pub const STOC_Y: Self = Self::new(ImputationKind::Stochastic, true);

    /// All four strategies in a fixed order.
    pub const ALL: [Self; 4] = [Self::DET, Self::DET_Y, Self::STOC, Self::STOC_Y];

    pub const fn new(kind: ImputationKind, include_outcome: bool) -> Self {
        Self {
            kind,
            include_outcome,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        self.kind == ImputationKind::Stochastic
    }

    /// Number of imputation-model coefficients, intercept included.
    pub fn n_params(&self) -> usize {
        if self.include_outcome {
            3
        } else {
            2
        }
    }

    pub fn name(&self) -> &'static str {
        match (self.kind, self.include_outcome) {
            (ImputationKind::Deterministic, false) => "det",
            (ImputationKind::Deterministic, true) => "det-y",
            (ImputationKind::Stochastic, false) => "stoc",
            (ImputationKind::Stochastic, true) => "stoc-y",
        }
    }
}

impl fmt::Display for ImputationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImputationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidMethod(format!("unknown method `{s}`")))
    }
}

/// A dataset with its covariate column filled in.
#[derive(Debug, Clone)]
pub struct ImputedDataset<'a> {
    pub base: &'a Dataset,
    pub x_imp: Vec<f64>,
    pub method: ImputationMethod,
    /// 0 for deterministic imputation, 1..=m for multiple imputation.
    pub draw_index: usize,
    pub imputation_fit: Arc<FittedLinearModel>,
}

/// Fitted imputation model, ready to complete the dataset any number of times.
struct Prepared<'a> {
    dataset: &'a Dataset,
    method: ImputationMethod,
    fit: Arc<FittedLinearModel>,
}

#[inline]
fn design_row(d: &Dataset, i: usize, include_outcome: bool) -> [f64; 3] {
    [1.0, f64::from(d.z()[i]), if include_outcome { d.y()[i] } else { 0.0 }]
}

impl<'a> Prepared<'a> {
    fn new(dataset: &'a Dataset, method: ImputationMethod) -> Result<Self> {
        let p = method.n_params();
        let n_obs = dataset.n_observed();
        if n_obs < p + 2 {
            return Err(Error::InsufficientData(format!(
                "{n_obs} observed rows; the {method} imputation model needs at least {}",
                p + 2
            )));
        }
        let mut rows = Vec::with_capacity(n_obs * p);
        let mut response = Vec::with_capacity(n_obs);
        for (i, x) in dataset.x_obs().iter().enumerate() {
            if let Some(x) = x {
                rows.extend_from_slice(&design_row(dataset, i, method.include_outcome)[..p]);
                response.push(*x);
            }
        }
        let design = Matrix::new(n_obs, p, rows)?;
        let fit = fit_ols(&design, &response)?;
        Ok(Self {
            dataset,
            method,
            fit: Arc::new(fit),
        })
    }

    fn complete(&self, rng: Option<&mut RngStream>, draw_index: usize) -> Result<ImputedDataset<'a>> {
        let d = self.dataset;
        let p = self.method.n_params();
        let include_outcome = self.method.include_outcome;

        // Stochastic: one (σ̇², coef) draw for the whole dataset.
        let mut draw = match self.method.kind {
            ImputationKind::Deterministic => None,
            ImputationKind::Stochastic => {
                let rng = rng.ok_or(Error::MissingRng)?;
                let df = self.fit.df_residual;
                let sigma2 = rng.draw_scaled_inv_chisq(df as u64, self.fit.ssr / df as f64)?;
                let coef = rng.draw_mvn(&self.fit.coefficients, &self.fit.xtx_inv.scaled(sigma2))?;
                Some((rng, coef, sigma2.sqrt()))
            }
        };

        let mut x_imp = Vec::with_capacity(d.n());
        for (i, x) in d.x_obs().iter().enumerate() {
            let v = match (x, &mut draw) {
                (Some(x), _) => *x,
                (None, None) => dot(&design_row(d, i, include_outcome)[..p], &self.fit.coefficients),
                (None, Some((rng, coef, sd))) => {
                    let mean = dot(&design_row(d, i, include_outcome)[..p], coef);
                    rng.draw_normal(mean, *sd)?
                }
            };
            x_imp.push(v);
        }
        if x_imp.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("imputed value is not finite".into()));
        }
        Ok(ImputedDataset {
            base: d,
            x_imp,
            method: self.method,
            draw_index,
            imputation_fit: Arc::clone(&self.fit),
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Completes `dataset` once. `rng` is required for stochastic methods and
/// ignored otherwise.
pub fn impute<'a>(
    dataset: &'a Dataset,
    method: ImputationMethod,
    rng: Option<&mut RngStream>,
) -> Result<ImputedDataset<'a>> {
    if method.is_stochastic() && rng.is_none() {
        return Err(Error::MissingRng);
    }
    let draw_index = usize::from(method.is_stochastic());
    Prepared::new(dataset, method)?.complete(rng, draw_index)
}

/// `m` stochastic imputations; draw `k` (1-based) uses `rng.substream(k)`, so
/// the result does not depend on scheduling.
pub fn impute_multiple<'a>(
    dataset: &'a Dataset,
    method: ImputationMethod,
    m: usize,
    rng: &RngStream,
) -> Result<Vec<ImputedDataset<'a>>> {
    if !method.is_stochastic() {
        return Err(Error::InvalidMethod(format!(
            "multiple imputation with deterministic method `{method}` repeats one dataset"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!("m = {m}; need m >= 2")));
    }
    let prepared = Prepared::new(dataset, method)?;
    (1..=m)
        .into_par_iter()
        .map(|k| {
            let mut sub = rng.substream(k as u64);
            prepared.complete(Some(&mut sub), k)
        })
        .collect()
}

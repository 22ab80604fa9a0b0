//! Outcome-model fits and the variance estimates compared across strategies:
//! model-based (imputed values treated as fixed), complete-case, bootstrap
//! over the whole impute-then-fit pipeline, and Rubin's combining rules.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::impute::{impute, ImputationMethod, ImputedDataset};
use crate::linalg::{mean, sample_covariance, sample_variance};
use crate::rng::RngStream;
use crate::scenario::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitSource {
    Full,
    CompleteCase,
    Imputed {
        method: ImputationMethod,
        draw_index: usize,
    },
}

/// Simple regression of `y` on `(1, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeFit {
    pub beta0_hat: f64,
    pub beta1_hat: f64,
    /// `sqrt({Var(y)/Var(x) − Cov(x,y)²/Var(x)²} / (n − 2))`.
    pub se_beta1_model: f64,
    pub n_used: usize,
    pub source: FitSource,
}

impl OutcomeFit {
    pub fn var_beta1_model(&self) -> f64 {
        self.se_beta1_model * self.se_beta1_model
    }
}

fn fit_simple(x: &[f64], y: &[f64], source: FitSource) -> Result<OutcomeFit> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "outcome model needs at least 3 rows, got {n}"
        )));
    }
    let var_x = sample_variance(x)?;
    let mx = mean(x);
    if !(var_x > 1e-12 * mx * mx) || var_x == 0.0 {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let var_y = sample_variance(y)?;
    let cov = sample_covariance(x, y)?;
    let beta1 = cov / var_x;
    let beta0 = mean(y) - beta1 * mx;
    let var_beta1 = ((var_y / var_x - beta1 * beta1) / (n - 2) as f64).max(0.0);
    Ok(OutcomeFit {
        beta0_hat: beta0,
        beta1_hat: beta1,
        se_beta1_model: var_beta1.sqrt(),
        n_used: n,
        source,
    })
}

/// Outcome model on a completed dataset, imputed values treated as data.
pub fn fit_outcome(imputed: &ImputedDataset<'_>) -> Result<OutcomeFit> {
    fit_simple(
        &imputed.x_imp,
        imputed.base.y(),
        FitSource::Imputed {
            method: imputed.method,
            draw_index: imputed.draw_index,
        },
    )
}

/// Outcome model restricted to rows with an observed covariate.
pub fn fit_complete_case(dataset: &Dataset) -> Result<OutcomeFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = dataset
        .x_obs()
        .iter()
        .zip(dataset.y())
        .filter_map(|(x, y)| x.map(|x| (x, *y)))
        .unzip();
    fit_simple(&x, &y, FitSource::CompleteCase)
}

/// Outcome model on the never-masked covariate; needs the `x_full` column.
pub fn fit_full_cohort(dataset: &Dataset) -> Result<OutcomeFit> {
    let x = dataset.x_full().ok_or_else(|| {
        Error::InvalidParameter("full-cohort fit needs the x_full column".into())
    })?;
    fit_simple(x, dataset.y(), FitSource::Full)
}

/// Rubin's rules for the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PooledEstimate {
    pub q_bar: f64,
    /// Pooled intercept (plain mean over imputations).
    pub beta0_bar: f64,
    pub w_bar: f64,
    pub b: f64,
    pub t: f64,
    /// `(m−1)(1 + w̄/((1+1/m)b))²`; infinite when `b = 0`.
    pub df: f64,
    pub m: usize,
}

impl PooledEstimate {
    pub fn se(&self) -> f64 {
        self.t.sqrt()
    }
}

pub fn pool_rubin(fits: &[OutcomeFit]) -> Result<PooledEstimate> {
    let m = fits.len();
    if m < 2 {
        return Err(Error::InsufficientImputations(m));
    }
    let mf = m as f64;
    let q_bar = fits.iter().map(|f| f.beta1_hat).sum::<f64>() / mf;
    let beta0_bar = fits.iter().map(|f| f.beta0_hat).sum::<f64>() / mf;
    let w_bar = fits.iter().map(|f| f.var_beta1_model()).sum::<f64>() / mf;
    let b = fits
        .iter()
        .map(|f| (f.beta1_hat - q_bar).powi(2))
        .sum::<f64>()
        / (mf - 1.0);
    let inflated = (1.0 + 1.0 / mf) * b;
    let t = w_bar + inflated;
    let df = if b > 0.0 {
        (mf - 1.0) * (1.0 + w_bar / inflated).powi(2)
    } else {
        f64::INFINITY
    };
    Ok(PooledEstimate {
        q_bar,
        beta0_bar,
        w_bar,
        b,
        t,
        df,
        m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    /// Slope from each successful replicate, in replicate order.
    pub replicates: Vec<f64>,
    pub se: f64,
    /// Number of successful replicates (`replicates.len()`).
    pub b_count: usize,
    pub requested: usize,
    /// Replicates dropped because the resample could not be fitted.
    pub skipped: usize,
}

/// Nonparametric bootstrap of the full impute-then-fit pipeline. Replicate
/// `i` draws its resample (and any imputation noise) from `rng.substream(i)`.
pub fn bootstrap_se(
    dataset: &Dataset,
    method: ImputationMethod,
    b_count: usize,
    rng: &RngStream,
) -> Result<BootstrapResult> {
    if b_count < 2 {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least 2 replicates, got {b_count}"
        )));
    }
    let n = dataset.n();
    if n == 0 {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    let outcomes: Vec<Result<Option<f64>>> = (0..b_count)
        .into_par_iter()
        .map(|i| {
            let mut sub = rng.substream(i as u64);
            let idx: Vec<usize> = (0..n).map(|_| sub.index(n)).collect();
            let resample = dataset.select(&idx);
            let fitted = impute(&resample, method, Some(&mut sub)).and_then(|imp| fit_outcome(&imp));
            match fitted {
                Ok(fit) => Ok(Some(fit.beta1_hat)),
                Err(
                    Error::RankDeficient { .. }
                    | Error::InsufficientData(_)
                    | Error::NotPositiveDefinite { .. },
                ) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut replicates = Vec::with_capacity(b_count);
    for o in outcomes {
        if let Some(b) = o? {
            replicates.push(b);
        }
    }
    if replicates.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} of {b_count} bootstrap replicates could be fitted",
            replicates.len()
        )));
    }
    let se = sample_variance(&replicates)?.sqrt();
    Ok(BootstrapResult {
        se,
        b_count: replicates.len(),
        requested: b_count,
        skipped: b_count - replicates.len(),
        replicates,
    })
}

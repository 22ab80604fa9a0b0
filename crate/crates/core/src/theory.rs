//! Closed-form population moments of the imputed covariate under each
//! imputation strategy.
//!
//! Conditional moments given the missingness indicator come from Bayes' rule
//! on `Z` and the law of total variance. Fitted imputation coefficients are
//! replaced by their population values, so every quantity here is the
//! large-sample limit that the Monte Carlo code should approach.
//!
//! The attenuation factor
//!
//! ```text
//! ω = 1 + Pr(R=1)·{ R²·δ0·Var(Z|R=1)/Var(Z|R=0) − δ1 }
//! ```
//!
//! with `δr = Var(X|R=r)/Var(X)` and `R² = α1²·Var(Z|R=0)/Var(X|R=0)` (the fit
//! among observed rows) scales both `Var(X_imp,det)` and `Cov(X_imp,det, Y)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::ScenarioParams;

/// Pr(R_X = 1) at or above `1 - DEGENERATE_EPS` means nothing is observed.
pub const DEGENERATE_EPS: f64 = 1e-9;
const MIN_VAR_X: f64 = 1e-12;

/// Population variance/covariance of one completed covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImputedMoments {
    pub mean_ximp: f64,
    pub var_ximp: f64,
    pub cov_ximp_y: f64,
}

impl ImputedMoments {
    pub fn beta1(&self) -> f64 {
        self.cov_ximp_y / self.var_ximp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerMethod<T> {
    pub det: T,
    pub det_y: T,
    pub stoc: T,
    pub stoc_y: T,
}

/// Numerators `c` of the expected coefficient variances `c/(n−2)` (full
/// cohort, deterministic model-based) and `c/(n_obs−2)` (complete case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceCoefficients {
    pub full_cohort: f64,
    pub model_based_det: f64,
    pub complete_case: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoreticalQuantities {
    pub pr_r1: f64,
    pub pr_z1: f64,
    pub pr_z1_given_r0: f64,
    pub pr_z1_given_r1: f64,
    pub var_z: f64,
    pub var_z_given_r0: f64,
    pub var_z_given_r1: f64,

    pub e_x: f64,
    pub e_x_given_r0: f64,
    pub e_x_given_r1: f64,
    pub var_x: f64,
    pub var_x_given_r0: f64,
    pub var_x_given_r1: f64,

    pub e_y: f64,
    pub e_y_given_r0: f64,
    pub e_y_given_r1: f64,
    pub var_y: f64,
    pub var_y_given_r0: f64,
    pub var_y_given_r1: f64,
    pub cov_xy: f64,
    pub cov_xy_given_r0: f64,
    pub cov_zy_given_r1: f64,

    /// Deterministic predictions among the missing, imputation model without Y.
    pub e_xhat_given_r1: f64,
    pub var_xhat_given_r1: f64,
    pub cov_xhat_y_given_r1: f64,

    pub r2_imp: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub omega: f64,
    pub var_x_imp_det: f64,
    pub cov_x_imp_det_y: f64,

    /// Population regression of X on (1, Z, Y): `[γ0, γ1, γ2]`.
    pub gamma: [f64; 3],
    /// Residual variance of that regression.
    pub gamma_resid_var: f64,
    pub var_xhat_y_given_r1: f64,
    pub cov_xhat_y_y_given_r1: f64,
    pub var_x_imp_det_y: f64,
    pub cov_x_imp_det_y_y: f64,

    pub moments: PerMethod<ImputedMoments>,
    pub expected_beta: PerMethod<f64>,
    pub variance_coefficients: VarianceCoefficients,
}

pub fn theory_quantities(params: &ScenarioParams) -> Result<TheoreticalQuantities> {
    params.validate()?;
    let ScenarioParams {
        p_z,
        alpha0: a0,
        alpha1: a1,
        sigma_x,
        beta0: b0,
        beta1: b1,
        sigma_y,
        p_miss_0: _,
        p_miss_1,
    } = *params;
    let s2x = sigma_x * sigma_x;
    let s2y = sigma_y * sigma_y;

    let p1 = params.pr_missing();
    let p0 = 1.0 - p1;
    if p1 > 1.0 - DEGENERATE_EPS {
        return Err(Error::DegenerateScenario(format!(
            "Pr(R_X=1) = {p1}: no observed covariate values"
        )));
    }
    let var_z = p_z * (1.0 - p_z);
    let var_x = s2x + a1 * a1 * var_z;
    if var_x < MIN_VAR_X {
        return Err(Error::DegenerateScenario(format!("Var(X) = {var_x}")));
    }

    let q0 = p_z * (1.0 - p_miss_1) / p0;
    // With nothing missing, conditioning on R=1 is vacuous; fall back to the marginal.
    let q1 = if p1 < DEGENERATE_EPS {
        p_z
    } else {
        p_z * p_miss_1 / p1
    };
    let var_z_r0 = q0 * (1.0 - q0);
    let var_z_r1 = q1 * (1.0 - q1);
    if var_z_r0 <= 0.0 {
        return Err(Error::DegenerateScenario(
            "Z is constant among observed rows; imputation model is not identified".into(),
        ));
    }

    let e_x = a0 + a1 * p_z;
    let e_x_r0 = a0 + a1 * q0;
    let e_x_r1 = a0 + a1 * q1;
    let var_x_r0 = s2x + a1 * a1 * var_z_r0;
    let var_x_r1 = s2x + a1 * a1 * var_z_r1;

    let e_y = b0 + b1 * e_x;
    let e_y_r0 = b0 + b1 * e_x_r0;
    let e_y_r1 = b0 + b1 * e_x_r1;
    let var_y = b1 * b1 * var_x + s2y;
    let var_y_r0 = b1 * b1 * var_x_r0 + s2y;
    let var_y_r1 = b1 * b1 * var_x_r1 + s2y;
    let cov_xy = b1 * var_x;
    let cov_xy_r0 = b1 * var_x_r0;
    // Cov(Z, Y | R=1) = β1·Cov(Z, X | R=1) = β1·α1·Var(Z | R=1)
    let cov_zy_r1 = b1 * a1 * var_z_r1;

    // Imputation model X ~ 1 + Z fitted among observed rows.
    let e_xhat_r1 = a0 + a1 * q1;
    let var_xhat_r1 = a1 * a1 * var_z_r1;
    let cov_xhat_y_r1 = a1 * cov_zy_r1;

    let r2_imp = a1 * a1 * var_z_r0 / var_x_r0;
    let delta0 = var_x_r0 / var_x;
    let delta1 = var_x_r1 / var_x;
    let omega = 1.0 + p1 * (r2_imp * delta0 * (var_z_r1 / var_z_r0) - delta1);

    let cond = Conditional {
        p0,
        p1,
        e_x_r0,
        var_x_r0,
        cov_xy_r0,
        e_y_r0,
        e_y_r1,
        e_y,
    };
    let det = cond.combine(e_xhat_r1, var_xhat_r1, cov_xhat_y_r1);

    // E(X | Z, Y) is exactly linear in (Z, Y) because Z is binary and (X, Y)
    // is jointly normal given Z; R depends on Z only so the same regression
    // holds among observed rows.
    let denom = b1 * b1 * s2x + s2y;
    let k = if denom > 0.0 { b1 * s2x / denom } else { 0.0 };
    let gamma = [a0 * (1.0 - k * b1) - k * b0, a1 * (1.0 - k * b1), k];
    let gamma_resid_var = s2x * (1.0 - k * b1);
    let [g0, g1, g2] = gamma;
    let e_xhat_y_r1 = g0 + g1 * q1 + g2 * e_y_r1;
    let var_xhat_y_r1 = g1 * g1 * var_z_r1 + g2 * g2 * var_y_r1 + 2.0 * g1 * g2 * cov_zy_r1;
    let cov_xhat_y_y_r1 = g1 * cov_zy_r1 + g2 * var_y_r1;
    let det_y = cond.combine(e_xhat_y_r1, var_xhat_y_r1, cov_xhat_y_y_r1);

    // Posterior-predictive draws add the residual variance back onto the
    // predictions; the covariance with Y among the missing is unchanged.
    let stoc = cond.combine(e_xhat_r1, var_xhat_r1 + s2x, cov_xhat_y_r1);
    let stoc_y = cond.combine(e_xhat_y_r1, var_xhat_y_r1 + gamma_resid_var, cov_xhat_y_y_r1);

    let slope = cov_xy / var_x;
    let variance_coefficients = VarianceCoefficients {
        full_cohort: var_y / var_x - slope * slope,
        model_based_det: var_y / (var_x * omega) - slope * slope,
        complete_case: var_y_r0 / var_x_r0 - (cov_xy_r0 / var_x_r0).powi(2),
    };

    Ok(TheoreticalQuantities {
        pr_r1: p1,
        pr_z1: p_z,
        pr_z1_given_r0: q0,
        pr_z1_given_r1: q1,
        var_z,
        var_z_given_r0: var_z_r0,
        var_z_given_r1: var_z_r1,
        e_x,
        e_x_given_r0: e_x_r0,
        e_x_given_r1: e_x_r1,
        var_x,
        var_x_given_r0: var_x_r0,
        var_x_given_r1: var_x_r1,
        e_y,
        e_y_given_r0: e_y_r0,
        e_y_given_r1: e_y_r1,
        var_y,
        var_y_given_r0: var_y_r0,
        var_y_given_r1: var_y_r1,
        cov_xy,
        cov_xy_given_r0: cov_xy_r0,
        cov_zy_given_r1: cov_zy_r1,
        e_xhat_given_r1: e_xhat_r1,
        var_xhat_given_r1: var_xhat_r1,
        cov_xhat_y_given_r1: cov_xhat_y_r1,
        r2_imp,
        delta0,
        delta1,
        omega,
        var_x_imp_det: det.var_ximp,
        cov_x_imp_det_y: det.cov_ximp_y,
        gamma,
        gamma_resid_var,
        var_xhat_y_given_r1: var_xhat_y_r1,
        cov_xhat_y_y_given_r1: cov_xhat_y_y_r1,
        var_x_imp_det_y: det_y.var_ximp,
        cov_x_imp_det_y_y: det_y.cov_ximp_y,
        moments: PerMethod {
            det,
            det_y,
            stoc,
            stoc_y,
        },
        expected_beta: PerMethod {
            det: b1,
            det_y: det_y.beta1(),
            stoc: omega * b1,
            stoc_y: b1,
        },
        variance_coefficients,
    })
}

/// Moments conditional on the missingness indicator that every strategy shares.
struct Conditional {
    p0: f64,
    p1: f64,
    e_x_r0: f64,
    var_x_r0: f64,
    cov_xy_r0: f64,
    e_y_r0: f64,
    e_y_r1: f64,
    e_y: f64,
}

impl Conditional {
    /// Law of total variance / covariance over R, given the mean, variance
    /// and covariance-with-Y of the filled-in values among the missing.
    fn combine(&self, mean_r1: f64, var_r1: f64, cov_y_r1: f64) -> ImputedMoments {
        let Self {
            p0,
            p1,
            e_x_r0,
            var_x_r0,
            cov_xy_r0,
            e_y_r0,
            e_y_r1,
            e_y,
        } = *self;
        let mean = e_x_r0 * p0 + mean_r1 * p1;
        let var = var_x_r0 * p0 + var_r1 * p1 + (e_x_r0 - mean_r1).powi(2) * p0 * p1;
        let cov = cov_xy_r0 * p0 + cov_y_r1 * p1 + e_y_r0 * e_x_r0 * p0 + e_y_r1 * mean_r1 * p1
            - e_y * mean;
        ImputedMoments {
            mean_ximp: mean,
            var_ximp: var,
            cov_ximp_y: cov,
        }
    }
}

impl TheoreticalQuantities {
    /// Internal identities that must hold for any valid scenario. Returns a
    /// description of the first one that fails.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        let checks = [
            (
                "Var(X_imp,det) = ω·Var(X)",
                self.var_x_imp_det,
                self.omega * self.var_x,
            ),
            (
                "Cov(X_imp,det, Y) = ω·Cov(X, Y)",
                self.cov_x_imp_det_y,
                self.omega * self.cov_xy,
            ),
            (
                "Pr(Z=1|R=0)Pr(R=0) + Pr(Z=1|R=1)Pr(R=1) = Pr(Z=1)",
                self.pr_z1_given_r0 * (1.0 - self.pr_r1) + self.pr_z1_given_r1 * self.pr_r1,
                self.pr_z1,
            ),
            (
                "Var(X_imp,stoc|y) = Var(X)",
                self.moments.stoc_y.var_ximp,
                self.var_x,
            ),
            (
                "Cov(X_imp,stoc|y, Y) = Cov(X, Y)",
                self.moments.stoc_y.cov_ximp_y,
                self.cov_xy,
            ),
        ];
        for (name, lhs, rhs) in checks {
            if !close(lhs, rhs) {
                return Err(format!("{name}: {lhs} vs {rhs}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedCoefficientVariances {
    pub full_cohort: f64,
    pub model_based_det: f64,
    pub complete_case: f64,
}

/// Expected model-based variances of the slope at sample size `n`; the
/// complete-case value uses the expected observed count `n·Pr(R_X=0)`.
pub fn expected_coefficient_variances(
    params: &ScenarioParams,
    n: usize,
) -> Result<ExpectedCoefficientVariances> {
    let tq = theory_quantities(params)?;
    let n_f = n as f64;
    let n_obs = n_f * (1.0 - tq.pr_r1);
    if n <= 2 || n_obs <= 2.0 {
        return Err(Error::InsufficientData(format!(
            "n = {n}, expected observed = {n_obs}"
        )));
    }
    let c = tq.variance_coefficients;
    Ok(ExpectedCoefficientVariances {
        full_cohort: c.full_cohort / (n_f - 2.0),
        model_based_det: c.model_based_det / (n_f - 2.0),
        complete_case: c.complete_case / (n_obs - 2.0),
    })
}

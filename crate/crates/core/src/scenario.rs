//! Generative world with one binary auxiliary `Z`, a covariate `X` that may
//! be missing, and an outcome `Y`:
//!
//! ```text
//! Z ~ Bern(p_z)
//! X = alpha0 + alpha1·Z + N(0, sigma_x²)
//! Y = beta0  + beta1·X  + N(0, sigma_y²)
//! Pr(R_X = 1 | Z) = p_miss_0·(1 − Z) + p_miss_1·Z
//! ```
//!
//! Missingness depends on `Z` only (MAR).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub p_z: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub sigma_x: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub sigma_y: f64,
    pub p_miss_0: f64,
    pub p_miss_1: f64,
}

impl Default for ScenarioParams {
    /// Z ~ Bern(0.5), X = Z + N(0,1), Y = 2X + N(0,1), missingness 0.25 / 0.50.
    fn default() -> Self {
        Self {
            p_z: 0.5,
            alpha0: 0.0,
            alpha1: 1.0,
            sigma_x: 1.0,
            beta0: 0.0,
            beta1: 2.0,
            sigma_y: 1.0,
            p_miss_0: 0.25,
            p_miss_1: 0.50,
        }
    }
}

impl ScenarioParams {
    pub fn with_missingness(self, p_miss_0: f64, p_miss_1: f64) -> Self {
        Self {
            p_miss_0,
            p_miss_1,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_z", self.p_z),
            ("p_miss_0", self.p_miss_0),
            ("p_miss_1", self.p_miss_1),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} not in [0, 1]")));
            }
        }
        for (name, s) in [("sigma_x", self.sigma_x), ("sigma_y", self.sigma_y)] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {s} must be >= 0")));
            }
        }
        for (name, c) in [
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("beta0", self.beta0),
            ("beta1", self.beta1),
        ] {
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Marginal `Pr(R_X = 1)`.
    pub fn pr_missing(&self) -> f64 {
        self.p_miss_0 * (1.0 - self.p_z) + self.p_miss_1 * self.p_z
    }
}

/// Column-oriented observations. `x_obs[i]` is `None` exactly when X is
/// missing for row `i` (`r_x = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    z: Vec<u8>,
    y: Vec<f64>,
    x_obs: Vec<Option<f64>>,
    x_full: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        z: Vec<u8>,
        y: Vec<f64>,
        x_obs: Vec<Option<f64>>,
        x_full: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = z.len();
        for len in [y.len(), x_obs.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(i) = z.iter().position(|&v| v > 1) {
            return Err(Error::InvalidParameter(format!("z[{i}] is not 0/1")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("y[{i}] is not finite")));
        }
        if let Some(i) = x_obs.iter().position(|v| v.is_some_and(|x| !x.is_finite())) {
            return Err(Error::InvalidParameter(format!("x_obs[{i}] is not finite")));
        }
        if let Some(full) = &x_full {
            if full.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: full.len(),
                });
            }
            for (i, (o, f)) in x_obs.iter().zip(full).enumerate() {
                if !f.is_finite() {
                    return Err(Error::InvalidParameter(format!("x_full[{i}] is not finite")));
                }
                if o.is_some_and(|o| o.to_bits() != f.to_bits()) {
                    return Err(Error::InvalidParameter(format!(
                        "x_obs[{i}] disagrees with x_full"
                    )));
                }
            }
        }
        Ok(Self { z, y, x_obs, x_full })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_obs(&self) -> &[Option<f64>] {
        &self.x_obs
    }

    pub fn x_full(&self) -> Option<&[f64]> {
        self.x_full.as_deref()
    }

    #[inline]
    pub fn is_missing(&self, i: usize) -> bool {
        self.x_obs[i].is_none()
    }

    /// Missingness indicator `r_x` (1 = missing).
    pub fn r_x(&self) -> impl Iterator<Item = u8> + '_ {
        self.x_obs.iter().map(|v| u8::from(v.is_none()))
    }

    pub fn n_missing(&self) -> usize {
        self.x_obs.iter().filter(|v| v.is_none()).count()
    }

    pub fn n_observed(&self) -> usize {
        self.n() - self.n_missing()
    }

    /// Copy without the generation-only `x_full` column.
    pub fn without_oracle(&self) -> Dataset {
        Dataset {
            x_full: None,
            ..self.clone()
        }
    }

    /// Rows `indices` in order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            z: indices.iter().map(|&i| self.z[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            x_obs: indices.iter().map(|&i| self.x_obs[i]).collect(),
            x_full: self
                .x_full
                .as_ref()
                .map(|f| indices.iter().map(|&i| f[i]).collect()),
        }
    }
}

/// Draws `n` rows. Per row the draw order is z, ε_X, ε_Y, r_x.
pub fn generate(params: &ScenarioParams, n: usize, rng: &mut RngStream) -> Result<Dataset> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut x_obs = Vec::with_capacity(n);
    let mut x_full = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = rng.draw_bernoulli(params.p_z)?;
        let x = rng.draw_normal(params.alpha0 + params.alpha1 * f64::from(zi), params.sigma_x)?;
        let yi = rng.draw_normal(params.beta0 + params.beta1 * x, params.sigma_y)?;
        let p_miss = if zi == 1 {
            params.p_miss_1
        } else {
            params.p_miss_0
        };
        let r = rng.draw_bernoulli(p_miss)?;
        z.push(zi);
        y.push(yi);
        x_obs.push(if r == 1 { None } else { Some(x) });
        x_full.push(x);
    }
    Ok(Dataset {
        z,
        y,
        x_obs,
        x_full: Some(x_full),
    })
}

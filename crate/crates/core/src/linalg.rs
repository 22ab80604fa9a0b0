//! Small dense linear algebra: just enough for OLS with a handful of
//! predictors and the moment statistics used by the imputation and
//! inference code.
//!
//! Normal equations are solved through a Cholesky factor of `WᵀW`. Every
//! symmetric input is symmetrized as `(A + Aᵀ)/2` before factoring.

use serde::Serialize;

use crate::error::{Error, Result};

/// Designs whose `WᵀW` eigenvalue ratio exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Dense row-major matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "matrix entry {bad} is not finite"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Self::zeros(p, p);
        for i in 0..p {
            m.data[i * p + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> Result<Self> {
        self.require_square()?;
        let p = self.rows;
        let mut s = Self::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                s.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        Ok(s)
    }

    fn require_square(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                actual: self.cols,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Artifacts of an ordinary least squares fit.
#[derive(Debug, Clone, Serialize)]
pub struct FittedLinearModel {
    /// Intercept first when the design carries one.
    pub coefficients: Vec<f64>,
    /// `SSR / (n - p)`.
    pub sigma2_hat: f64,
    /// `sigma2_hat · (WᵀW)⁻¹`.
    pub coef_cov: Matrix,
    /// Unscaled `(WᵀW)⁻¹`, kept so posterior draws can rescale it by a drawn variance.
    pub xtx_inv: Matrix,
    pub r_squared: f64,
    pub df_residual: usize,
    pub ssr: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl FittedLinearModel {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }
}

/// Least squares fit of `response` on the columns of `design`.
pub fn fit_ols(design: &Matrix, response: &[f64]) -> Result<FittedLinearModel> {
    let n = design.rows();
    let p = design.cols();
    if response.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: response.len(),
        });
    }
    if p == 0 {
        return Err(Error::InvalidParameter("design has no columns".into()));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "{n} rows for {p} coefficients"
        )));
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("response is not finite".into()));
    }

    let mut xtx = Matrix::zeros(p, p);
    let mut xty = vec![0.0; p];
    for i in 0..n {
        let row = design.row(i);
        let yi = response[i];
        for a in 0..p {
            xty[a] += row[a] * yi;
            for b in a..p {
                xtx.data[a * p + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx.data[a * p + b] = xtx.data[b * p + a];
        }
    }

    let eig = symmetric_eigenvalues(&xtx);
    let lmax = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
        return Err(Error::RankDeficient {
            condition: if lmin > 0.0 { lmax / lmin } else { f64::INFINITY },
        });
    }

    let l = cholesky(&xtx)?;
    let coefficients = cholesky_solve(&l, &xty);
    let xtx_inv = cholesky_inverse(&l);

    let mean_y = response.iter().sum::<f64>() / n as f64;
    let mut ssr = 0.0;
    let mut tss = 0.0;
    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let r = response[i] - dot(design.row(i), &coefficients);
            ssr += r * r;
            let d = response[i] - mean_y;
            tss += d * d;
            r
        })
        .collect();

    let df_residual = n - p;
    let sigma2_hat = ssr / df_residual as f64;
    let r_squared = if tss > 0.0 {
        (1.0 - ssr / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };

    Ok(FittedLinearModel {
        coefficients,
        sigma2_hat,
        coef_cov: xtx_inv.scaled(sigma2_hat),
        xtx_inv,
        r_squared,
        df_residual,
        ssr,
        residuals,
    })
}

pub fn predict(model: &FittedLinearModel, design: &Matrix) -> Result<Vec<f64>> {
    if design.cols() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            actual: design.cols(),
        });
    }
    design.mul_vec(&model.coefficients)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with an `n - 1` denominator.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    sample_covariance(values, values)
}

/// Sample covariance with an `n - 1` denominator.
pub fn sample_covariance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 values, got {}",
            a.len()
        )));
    }
    let ma = mean(a);
    let mb = mean(b);
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    Ok(s / (a.len() - 1) as f64)
}

/// Lower-triangular `L` with `L·Lᵀ = (A + Aᵀ)/2`.
pub fn cholesky(matrix: &Matrix) -> Result<Matrix> {
    factor(matrix, false)
}

/// Cholesky that tolerates zero pivots (positive semidefinite input). A zero
/// pivot zeroes its column; a negative one is still an error.
pub(crate) fn cholesky_semidefinite(matrix: &Matrix) -> Result<Matrix> {
    factor(matrix, true)
}

fn factor(matrix: &Matrix, semidefinite: bool) -> Result<Matrix> {
    let a = matrix.symmetrized()?;
    let p = a.rows();
    let scale = (0..p).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(p, p);
    for j in 0..p {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= tol {
            if semidefinite && d >= -tol * 1e4 {
                // Remaining entries in this column must vanish too.
                for i in (j + 1)..p {
                    let mut s = a.get(i, j);
                    for k in 0..j {
                        s -= l.get(i, k) * l.get(j, k);
                    }
                    if s.abs() > 1e-7 * scale.sqrt().max(1.0) {
                        return Err(Error::NotPositiveDefinite { pivot: j, value: d });
                    }
                }
                continue;
            }
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..p {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Solves `L·Lᵀ·x = b`.
fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let p = l.rows();
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

fn cholesky_inverse(l: &Matrix) -> Matrix {
    let p = l.rows();
    let mut inv = Matrix::zeros(p, p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        for i in 0..p {
            inv.set(i, j, col[i]);
        }
    }
    inv.symmetrized().expect("square")
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(matrix: &Matrix) -> Vec<f64> {
    let p = matrix.rows();
    let mut a = matrix.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        let diag: f64 = (0..p).map(|i| a.get(i, i).powi(2)).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let aij = a.get(i, j);
                if aij == 0.0 {
                    continue;
                }
                let theta = (a.get(j, j) - a.get(i, i)) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aki = a.get(k, i);
                    let akj = a.get(k, j);
                    a.set(k, i, c * aki - s * akj);
                    a.set(k, j, s * aki + c * akj);
                }
                for k in 0..p {
                    let aik = a.get(i, k);
                    let ajk = a.get(j, k);
                    a.set(i, k, c * aik - s * ajk);
                    a.set(j, k, s * aik + c * ajk);
                }
            }
        }
    }
    (0..p).map(|i| a.get(i, i)).collect()
}

//! Seedable random streams and the handful of distributions the imputer and
//! the data generator need.
//!
//! A stream is ChaCha20 keyed by `seed` with the cipher's 64-bit stream
//! counter set to `stream_id`, so any `(seed, stream_id)` pair is reachable
//! in O(1) and replays the same sequence on every platform. Normals use the
//! Ziggurat sampler from `rand_distr`; χ²(df) is drawn as Gamma(df/2, 2)
//! (Marsaglia–Tsang). These choices are part of the reproducibility
//! contract: changing any of them changes every seeded output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_semidefinite, Matrix};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream derived from this stream's identity and `index`. Does not
    /// depend on how many draws have been taken from `self`.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream::new(self.seed, mix(self.stream_id ^ mix(index.wrapping_add(1))))
    }

    pub fn draw_normal(&mut self, mean: f64, sd: f64) -> Result<f64> {
        if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "normal(mean={mean}, sd={sd})"
            )));
        }
        if sd == 0.0 {
            return Ok(mean);
        }
        Ok(mean + sd * self.standard_normal())
    }

    #[inline]
    pub(crate) fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn draw_bernoulli(&mut self, p: f64) -> Result<u8> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("bernoulli(p={p})")));
        }
        let u: f64 = self.inner.random();
        Ok(u8::from(u < p))
    }

    /// Uniform index in `0..len`.
    pub(crate) fn index(&mut self, len: usize) -> usize {
        self.inner.random_range(0..len)
    }

    /// `df · scale / g` with `g ~ χ²(df)`.
    pub fn draw_scaled_inv_chisq(&mut self, df: u64, scale: f64) -> Result<f64> {
        if df == 0 || !scale.is_finite() || scale < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scaled-inv-chi2(df={df}, scale={scale})"
            )));
        }
        if scale == 0.0 {
            return Ok(0.0);
        }
        let chi2 = Gamma::new(df as f64 / 2.0, 2.0)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let g: f64 = chi2.sample(&mut self.inner);
        Ok(df as f64 * scale / g)
    }

    /// `mean + L·z` where `L` is the (semidefinite) Cholesky factor of the
    /// symmetrized covariance.
    pub fn draw_mvn(&mut self, mean: &[f64], cov: &Matrix) -> Result<Vec<f64>> {
        if cov.rows() != mean.len() || cov.cols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: cov.rows(),
            });
        }
        let l = cholesky_semidefinite(cov)?;
        let z: Vec<f64> = (0..mean.len()).map(|_| self.standard_normal()).collect();
        let lz = l.mul_vec(&z)?;
        Ok(mean.iter().zip(lz).map(|(m, d)| m + d).collect())
    }
}

/// SplitMix64 finalizer.
#[inline]
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream id for replicate `replicate` of cell `cell` in `command`:
/// FNV-1a of the command tag, then SplitMix64-chained with both indices.
pub fn stream_id(command: &str, cell: u64, replicate: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in command.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(mix(h ^ mix(cell)) ^ replicate)
}

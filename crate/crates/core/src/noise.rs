//! Noise models and the probability bounds that go with them.
//!
//! Gaussian-process noise uses a squared-exponential covariance
//! `σ² exp(−Δt² / 2l²)`. A draw is `σ L z`, where `L` is the Cholesky factor
//! of the unit-variance covariance and `z` is standard normal.

use libm::erfc;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{PeriodicTemplate, Warp};

/// Largest grid factorized densely.
pub const MAX_GP_GRID: usize = 5000;
const CLIP_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GPConfig {
    pub sigma: f64,
    pub l: f64,
    pub seed: u64,
}

impl GPConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("σ must be non-negative, got {}", self.sigma)));
        }
        if !(self.l > 0.0) {
            return Err(Error::Config(format!("l must be positive, got {}", self.l)));
        }
        Ok(())
    }
}

/// Cached factor for repeated draws on one grid and length scale.
#[derive(Debug, Clone)]
pub struct GpSampler {
    factor: DMatrix<f64>,
}

impl GpSampler {
    pub fn new(grid: &[f64], l: f64) -> Result<Self> {
        if grid.len() > MAX_GP_GRID {
            return Err(Error::Capacity {
                size: grid.len(),
                limit: MAX_GP_GRID,
            });
        }
        if !(l > 0.0) {
            return Err(Error::Config(format!("l must be positive, got {l}")));
        }
        let n = grid.len();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let dt = grid[i] - grid[j];
            (-dt * dt / (2.0 * l * l)).exp()
        });
        let mut jitter = 1e-10;
        while jitter <= 1e-4 * 1.0001 {
            let mut c = cov.clone();
            for i in 0..n {
                c[(i, i)] += jitter;
            }
            if let Some(ch) = c.cholesky() {
                return Ok(Self { factor: ch.unpack() });
            }
            jitter *= 10.0;
        }
        Err(Error::Numeric(format!(
            "covariance on {n} points is not positive definite even with jitter 1e-4"
        )))
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Vec<f64> {
        let n = self.len();
        if sigma == 0.0 {
            return vec![0.0; n];
        }
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.factor * z).iter().map(|v| sigma * v).collect()
    }

    /// Redraws until the sup-norm is below `eps`, then falls back to clipping.
    pub fn sample_clipped<R: Rng + ?Sized>(&self, sigma: f64, eps: f64, rng: &mut R) -> Vec<f64> {
        let mut draw = Vec::new();
        for _ in 0..CLIP_ATTEMPTS {
            draw = self.sample(sigma, rng);
            if sup_norm(&draw) < eps {
                return draw;
            }
        }
        // keep strictly inside the band
        let edge = eps * (1.0 - f64::EPSILON);
        draw.iter().map(|v| v.clamp(-edge, edge)).collect()
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// One draw of the process on `grid`.
pub fn sample_gp(grid: &[f64], cfg: &GPConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.sigma == 0.0 {
        return Ok(vec![0.0; grid.len()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(GpSampler::new(grid, cfg.l)?.sample(cfg.sigma, &mut rng))
}

/// A draw with sup-norm strictly below `eps`.
pub fn clipped_gp(grid: &[f64], cfg: &GPConfig, eps: f64) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(eps > 0.0) {
        return Err(Error::Config(format!("ε must be positive, got {eps}")));
    }
    if cfg.sigma == 0.0 {
        return Ok(vec![0.0; grid.len()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(GpSampler::new(grid, cfg.l)?.sample_clipped(cfg.sigma, eps, &mut rng))
}

/// Process sampled on a coarse uniform grid over `[start, end]` and linearly
/// interpolated onto arbitrary times. The coarse grid resolves the length
/// scale with about ten points per `l`, which keeps dense signals cheap.
#[derive(Debug, Clone)]
pub struct CoarseGp {
    grid: Vec<f64>,
    sampler: GpSampler,
}

impl CoarseGp {
    pub fn new(start: f64, end: f64, l: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::Domain(format!("empty span [{start}, {end}]")));
        }
        if !(l > 0.0) {
            return Err(Error::Config(format!("l must be positive, got {l}")));
        }
        let points = ((10.0 * (end - start) / l).ceil() as usize + 1).clamp(16, 2000);
        let step = (end - start) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| start + i as f64 * step).collect();
        let sampler = GpSampler::new(&grid, l)?;
        Ok(Self { grid, sampler })
    }

    fn interpolate(&self, coarse: &[f64], times: &[f64]) -> Vec<f64> {
        let (start, end) = (self.grid[0], self.grid[self.grid.len() - 1]);
        let step = (end - start) / (self.grid.len() - 1) as f64;
        times
            .iter()
            .map(|&t| {
                let x = ((t - start) / step).clamp(0.0, (self.grid.len() - 1) as f64);
                let i = (x.floor() as usize).min(self.grid.len() - 2);
                let w = x - i as f64;
                coarse[i] + w * (coarse[i + 1] - coarse[i])
            })
            .collect()
    }

    pub fn sample_onto<R: Rng + ?Sized>(&self, times: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
        self.interpolate(&self.sampler.sample(sigma, rng), times)
    }

    /// Interpolation never leaves the coarse range, so the bound carries over.
    pub fn sample_clipped_onto<R: Rng + ?Sized>(&self, times: &[f64], sigma: f64, eps: f64, rng: &mut R) -> Vec<f64> {
        self.interpolate(&self.sampler.sample_clipped(sigma, eps, rng), times)
    }
}

/// Independent `N(0, σ²)` samples.
pub fn white_noise<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub tau: f64,
    pub sigma: f64,
    pub l: f64,
    /// Samples per unit time.
    pub omega: f64,
    pub c_f_gamma: f64,
}

impl BoundInputs {
    /// `τ / 2σ`.
    pub fn kappa(&self) -> f64 {
        self.tau / (2.0 * self.sigma)
    }

    /// `τ/2 − C / ω²`.
    pub fn alpha(&self) -> f64 {
        self.tau / 2.0 - self.c_f_gamma / (self.omega * self.omega)
    }
}

/// Lower bound on the probability that the ball estimator is exact under
/// Gaussian-process noise. `corrected` replaces the `1/(l²π)` coefficient of
/// the level-crossing term by `1/(2πl)`.
pub fn bound_gaussian_process(b: &BoundInputs, corrected: bool) -> f64 {
    let k = b.kappa();
    let coef = if corrected {
        1.0 / (2.0 * std::f64::consts::PI * b.l)
    } else {
        1.0 / (b.l * b.l * std::f64::consts::PI)
    };
    1.0 - (coef * (-k * k / 2.0).exp() + 2.0 * normal_cdf(-k))
}

/// Lower bound on the same probability under i.i.d. sample noise. The literal
/// form is `(1 − φ(α/σ))^ω`; `corrected` uses the two-sided
/// `(1 − 2φ(−α/σ))^⌊ω⌋`. A non-positive `α` gives no guarantee.
pub fn bound_white_noise(b: &BoundInputs, corrected: bool) -> f64 {
    let alpha = b.alpha();
    if alpha <= 0.0 {
        return 0.0;
    }
    if b.sigma == 0.0 {
        return if corrected { 1.0 } else { 0.0 };
    }
    let z = alpha / b.sigma;
    if corrected {
        (1.0 - 2.0 * normal_cdf(-z)).powi(b.omega.floor() as i32)
    } else {
        (1.0 - normal_cdf(z)).powf(b.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub literal: f64,
    pub corrected: f64,
    pub inputs: BoundInputs,
}

const DERIVATIVE_GRID: f64 = 1e-4;

/// Smoothness constant combining sup-norms of the first three derivatives of
/// `f` and `γ`. Needs a three-times differentiable `γ`.
pub fn c_f_gamma<G: Warp + ?Sized>(f: &PeriodicTemplate, gamma: &G) -> Result<f64> {
    let steps = (1.0 / DERIVATIVE_GRID).round() as usize;
    let mut g = [0.0_f64; 3];
    for i in 0..=steps {
        let d = gamma.derivatives(i as f64 * DERIVATIVE_GRID).ok_or_else(|| {
            Error::Precondition("the reparametrization is not smooth".into())
        })?;
        for k in 0..3 {
            g[k] = g[k].max(d[k].abs());
        }
    }
    let [f1, f2, f3] = [1, 2, 3].map(|k| f.derivative_sup_norm(k));
    let [g1, g2, g3] = g;
    Ok(f2 * g1 * g1 + f1 * g2 + 0.5 * (f3 * g1.powi(3) + 3.0 * f2 * g1 * g2 + f1 * g3))
}

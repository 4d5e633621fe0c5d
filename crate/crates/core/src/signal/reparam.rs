use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An increasing map `γ: [0, 1] → [0, N]`.
pub trait Warp {
    /// `γ(t)`; `t` is clamped to `[0, 1]`.
    fn phase(&self, t: f64) -> f64;

    /// `γ⁻¹(y)`; `y` is clamped to `[0, γ(1)]`.
    fn inverse_phase(&self, y: f64) -> f64;

    /// `γ(1)`.
    fn periods(&self) -> f64;

    /// `(γ'(t), γ''(t), γ'''(t))` when the map is three times differentiable.
    fn derivatives(&self, _t: f64) -> Option<[f64; 3]> {
        None
    }
}

/// Piecewise-linear reparametrization through `(knots[i], images[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reparam {
    knots: Vec<f64>,
    images: Vec<f64>,
}

impl Reparam {
    pub fn new(knots: Vec<f64>, images: Vec<f64>) -> Result<Self> {
        if knots.len() != images.len() {
            return Err(Error::Shape {
                expected: knots.len(),
                got: images.len(),
            });
        }
        if knots.len() < 2 {
            return Err(Error::Domain("a reparametrization needs at least 2 knots".into()));
        }
        if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
            return Err(Error::Domain("knots must start at 0 and end at 1".into()));
        }
        if images[0] != 0.0 {
            return Err(Error::Domain("images must start at 0".into()));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&knots) || !increasing(&images) {
            return Err(Error::Domain("knots and images must be strictly increasing".into()));
        }
        let n = images[images.len() - 1];
        if n.fract() != 0.0 {
            return Err(Error::Domain(format!("γ(1) must be a positive integer, got {n}")));
        }
        Ok(Self { knots, images })
    }

    /// `γ(t) = N t`.
    pub fn identity(n: usize) -> Self {
        Self {
            knots: vec![0.0, 1.0],
            images: vec![0.0, n as f64],
        }
    }

    /// Near-uniform period starts `(l + jitter·(u − ½)) / N`, a vehicle moving
    /// at a roughly constant speed. `jitter` must lie in `[0, 1)`.
    pub fn jittered(n: usize, jitter: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        if !(0.0..1.0).contains(&jitter) {
            return Err(Error::Domain(format!("jitter must lie in [0, 1), got {jitter}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut knots = vec![0.0];
        for l in 1..n {
            let u: f64 = rng.random();
            knots.push((l as f64 + jitter * (u - 0.5)) / n as f64);
        }
        knots.push(1.0);
        let images = (0..=n).map(|i| i as f64).collect();
        Self::new(knots, images)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn images(&self) -> &[f64] {
        &self.images
    }

    pub fn n(&self) -> usize {
        self.images[self.images.len() - 1] as usize
    }

    /// Largest slope over the linear pieces.
    pub fn max_slope(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.images.windows(2))
            .map(|(k, i)| (i[1] - i[0]) / (k[1] - k[0]))
            .fold(0.0, f64::max)
    }

    /// Times `γ⁻¹(j / P)` for `j = 0..=N·P`: a grid on which one period of the
    /// composed signal is always sampled at the same phases.
    pub fn aligned_grid(&self, per_period: usize) -> Vec<f64> {
        let total = self.n() * per_period;
        let mut grid: Vec<f64> = (0..=total)
            .map(|j| self.inverse_phase(j as f64 / per_period as f64))
            .collect();
        grid[0] = 0.0;
        grid[total] = 1.0;
        grid
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let x = x.clamp(xs[0], xs[xs.len() - 1]);
    let j = xs.partition_point(|&k| k <= x);
    if j == xs.len() {
        return ys[ys.len() - 1];
    }
    let w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    ys[j - 1] + w * (ys[j] - ys[j - 1])
}

impl Warp for Reparam {
    fn phase(&self, t: f64) -> f64 {
        interp(&self.knots, &self.images, t)
    }

    fn inverse_phase(&self, y: f64) -> f64 {
        interp(&self.images, &self.knots, y)
    }

    fn periods(&self) -> f64 {
        self.images[self.images.len() - 1]
    }
}

/// Uniform random period starts: `N − 1` sorted uniform draws on `(0, 1)`
/// mapped to `1, ..., N − 1`. For `N = 1` a single interior knot is drawn and
/// mapped to `½` so the map is still non-trivial.
pub fn random_reparam(n: usize, seed: u64) -> Reparam {
    random_reparam_with_min_gap(n, seed, 0.0).expect("zero gap is always attainable")
}

/// As [`random_reparam`], conditioned on every knot spacing being at least
/// `min_gap`. Uniform spacings conditioned that way are `min_gap` plus a
/// rescaled set of uniform spacings, so no rejection is needed.
pub fn random_reparam_with_min_gap(n: usize, seed: u64, min_gap: f64) -> Result<Reparam> {
    if n == 0 {
        return Err(Error::Domain("N must be positive".into()));
    }
    let interior = n.max(2) - 1;
    let free = 1.0 - min_gap * (interior + 1) as f64;
    if !(min_gap >= 0.0) || free <= 0.0 {
        return Err(Error::Config(format!(
            "minimum gap {min_gap} is unattainable with {interior} interior knots"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: Vec<f64> = (0..interior).map(|_| rng.random::<f64>()).collect();
    u.sort_by(f64::total_cmp);
    let mut knots = Vec::with_capacity(interior + 2);
    knots.push(0.0);
    knots.extend(u.iter().enumerate().map(|(i, x)| (i + 1) as f64 * min_gap + free * x));
    knots.push(1.0);
    let images = if n == 1 {
        vec![0.0, 0.5, 1.0]
    } else {
        (0..=n).map(|i| i as f64).collect()
    };
    Reparam::new(knots, images)
}

/// `γ(t) = N t + a sin(2πt)`, smooth and increasing when `2π|a| < N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothReparam {
    n: usize,
    amplitude: f64,
}

impl SmoothReparam {
    pub fn new(n: usize, amplitude: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        if 2.0 * std::f64::consts::PI * amplitude.abs() >= n as f64 {
            return Err(Error::Domain(format!(
                "amplitude {amplitude} breaks monotonicity for N = {n}"
            )));
        }
        Ok(Self { n, amplitude })
    }

    /// Multiplies the whole map by `factor` (γ ↦ c·γ).
    pub fn scaled(&self, factor: usize) -> Result<Self> {
        Self::new(self.n * factor, self.amplitude * factor as f64)
    }
}

impl Warp for SmoothReparam {
    fn phase(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        self.n as f64 * t + self.amplitude * (2.0 * std::f64::consts::PI * t).sin()
    }

    fn inverse_phase(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, self.n as f64);
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.phase(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn periods(&self) -> f64 {
        self.n as f64
    }

    fn derivatives(&self, t: f64) -> Option<[f64; 3]> {
        let w = 2.0 * std::f64::consts::PI;
        let (s, c) = (w * t).sin_cos();
        Some([
            self.n as f64 + self.amplitude * w * c,
            -self.amplitude * w * w * s,
            -self.amplitude * w * w * w * c,
        ])
    }
}

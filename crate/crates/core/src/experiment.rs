//! Synthetic experiments: the success-rate benchmark, the signal simulator
//! and the end-to-end odometry pipeline.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{n_hat_auto, scan_h, zero_crossings_estimate};
use crate::noise::CoarseGp;
use crate::odometry::{odometric_sequences, odometry_metrics, OdometricResult, OdometryMetrics};
use crate::persistence::diagram_interval;
use crate::signal::{
    detrend_median, random_reparam_with_min_gap, PeriodicTemplate, Reparam, Signal,
    Warp, REFERENCE_SAMPLES,
};

/// Counter-based seed derivation (SplitMix64 finalizer over a running hash),
/// so every trial's randomness is independent of execution order.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(seed), |h, &p| mix(h ^ mix(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchEstimator {
    AutoCluster,
    ZeroCrossingsOracle,
}

impl BenchEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            Self::AutoCluster => "auto_cluster",
            Self::ZeroCrossingsOracle => "zero_crossings_oracle",
        }
    }
}

fn default_n_range() -> [usize; 2] {
    [5, 50]
}
fn default_trials() -> usize {
    50
}
fn default_estimators() -> Vec<BenchEstimator> {
    vec![BenchEstimator::AutoCluster, BenchEstimator::ZeroCrossingsOracle]
}
fn default_samples() -> usize {
    20_000
}
fn default_min_period_samples() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub templates: Vec<String>,
    /// Inclusive range the period count is drawn from.
    #[serde(default = "default_n_range")]
    pub n_range: [usize; 2],
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub sigma_grid: Vec<f64>,
    pub l_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<BenchEstimator>,
    /// Samples of each synthetic signal on `[0, 1]`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Shortest period allowed, in samples. Shorter periods cannot be
    /// resolved at all and are redrawn.
    #[serde(default = "default_min_period_samples")]
    pub min_period_samples: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.templates.is_empty() || self.sigma_grid.is_empty() || self.l_grid.is_empty() {
            return fail("templates, sigma_grid and l_grid must be non-empty".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        let [lo, hi] = self.n_range;
        if lo == 0 || lo > hi {
            return fail(format!("invalid n_range [{lo}, {hi}]"));
        }
        if self.sigma_grid.iter().any(|s| !(*s >= 0.0)) {
            return fail("sigma values must be non-negative".into());
        }
        if self.l_grid.iter().any(|l| !(*l > 0.0)) {
            return fail("l values must be positive".into());
        }
        if self.samples < 2 {
            return fail("samples must be at least 2".into());
        }
        if self.estimators.is_empty() {
            return fail("no estimators selected".into());
        }
        if (hi * self.min_period_samples) as f64 >= self.samples as f64 {
            return fail(format!(
                "{hi} periods of at least {} samples do not fit in {} samples",
                self.min_period_samples, self.samples
            ));
        }
        for id in &self.templates {
            PeriodicTemplate::by_id(id)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub template: String,
    pub sigma: f64,
    pub l: f64,
    pub estimator: String,
    pub success_rate: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row).map_err(|e| Error::Input(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Input(e.to_string()))
    }

    pub fn rate(&self, template: &str, sigma: f64, l: f64, estimator: BenchEstimator) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.template == template && r.sigma == sigma && r.l == l && r.estimator == estimator.name())
            .map(|r| r.success_rate)
    }
}

/// Period count and reparametrization of one benchmark trial; shared by every
/// noise cell so that cells differ only in their noise.
fn trial_warp(cfg: &ExperimentConfig, trial: usize) -> Result<(usize, Reparam)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0, trial as u64]));
    let [lo, hi] = cfg.n_range;
    let n = rng.random_range(lo..=hi);
    let gap = cfg.min_period_samples as f64 / (cfg.samples - 1) as f64;
    let gamma = random_reparam_with_min_gap(n, derive_seed(cfg.seed, &[1, trial as u64]), gap)?;
    Ok((n, gamma))
}

/// Success rates of each estimator over every (template, σ, l) cell.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let templates: Vec<PeriodicTemplate> = cfg
        .templates
        .iter()
        .map(|id| PeriodicTemplate::by_id(id))
        .collect::<Result<_>>()?;
    let crossings: Vec<usize> = templates
        .iter()
        .map(|f| f.zero_crossings_per_period(REFERENCE_SAMPLES).max(2))
        .collect();
    let grids: HashMap<u64, CoarseGp> = cfg
        .l_grid
        .par_iter()
        .map(|&l| Ok((l.to_bits(), CoarseGp::new(0.0, 1.0, l)?)))
        .collect::<Result<_>>()?;
    let warps: Vec<(usize, Reparam)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| trial_warp(cfg, t))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = (0..cfg.samples)
        .map(|i| i as f64 / (cfg.samples - 1) as f64)
        .collect();

    let mut jobs = Vec::new();
    for ti in 0..templates.len() {
        for si in 0..cfg.sigma_grid.len() {
            for li in 0..cfg.l_grid.len() {
                for trial in 0..cfg.trials {
                    jobs.push((ti, si, li, trial));
                }
            }
        }
    }
    let outcomes: Vec<Vec<bool>> = jobs
        .par_iter()
        .map(|&(ti, si, li, trial)| {
            let (n, gamma) = &warps[trial];
            let f = &templates[ti];
            let (sigma, l) = (cfg.sigma_grid[si], cfg.l_grid[li]);
            let noise_seed = derive_seed(cfg.seed, &[2, ti as u64, si as u64, li as u64, trial as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let noise = grids[&l.to_bits()].sample_onto(&times, sigma, &mut rng);
            let values = times
                .iter()
                .zip(&noise)
                .map(|(&t, w)| f.eval(gamma.phase(t)) + w)
                .collect();
            let s = Signal::new(times.clone(), values).expect("finite samples");
            cfg.estimators
                .iter()
                .map(|e| match e {
                    BenchEstimator::AutoCluster => n_hat_auto(&diagram_interval(&s)).n_hat == *n,
                    BenchEstimator::ZeroCrossingsOracle => {
                        zero_crossings_estimate(&s, crossings[ti]).is_ok_and(|k| k == *n)
                    }
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (cell, chunk) in outcomes.chunks(cfg.trials).enumerate() {
        let (ti, si, li, _) = jobs[cell * cfg.trials];
        for (ei, e) in cfg.estimators.iter().enumerate() {
            let hits = chunk.iter().filter(|o| o[ei]).count();
            rows.push(BenchRow {
                template: cfg.templates[ti].clone(),
                sigma: cfg.sigma_grid[si],
                l: cfg.l_grid[li],
                estimator: e.name().to_string(),
                success_rate: hits as f64 / cfg.trials as f64,
                trials: cfg.trials,
            });
        }
    }
    Ok(BenchResult { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Uniformly random period boundaries.
    Random,
    /// Near-constant speed, as for a vehicle cruising.
    Drive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub template: String,
    pub n: usize,
    pub sigma: f64,
    /// Noise length scale, in the signal's time units.
    pub l: f64,
    /// Samples per time unit.
    pub omega: f64,
    pub seed: u64,
    /// Recording length; the phase runs from 0 to `n` over `[0, duration]`.
    pub duration: f64,
    pub profile: Profile,
}

/// Ground truth written next to a simulated signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSidecar {
    pub template_id: String,
    pub duration: f64,
    pub knots: Vec<f64>,
    pub images: Vec<f64>,
}

impl GammaSidecar {
    pub fn reparam(&self) -> Result<Reparam> {
        Reparam::new(self.knots.clone(), self.images.clone())
    }

    /// Number of periods completed by time `t`.
    pub fn phase_at(&self, t: f64) -> Result<f64> {
        Ok(self.reparam()?.phase(t / self.duration))
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub signal: Signal,
    pub gamma: Reparam,
    pub sidecar: GammaSidecar,
}

impl Simulation {
    /// Reference displacement `C · γ(t)` sampled on the signal's times.
    pub fn reference(&self, circumference: f64) -> Signal {
        let d = self.sidecar.duration;
        let values = self
            .signal
            .times()
            .iter()
            .map(|&t| circumference * self.gamma.phase(t / d))
            .collect();
        self.signal.with_values(values).expect("same grid")
    }
}

const SIM_MIN_PERIOD_SAMPLES: f64 = 20.0;

/// `f ∘ γ + W` sampled at `ω` over `[0, duration]`.
pub fn simulate(cfg: &SimulateConfig) -> Result<Simulation> {
    if cfg.n == 0 {
        return Err(Error::Config("N must be positive".into()));
    }
    if !(cfg.omega > 0.0) || !(cfg.duration > 0.0) {
        return Err(Error::Config("omega and duration must be positive".into()));
    }
    if !(cfg.sigma >= 0.0) {
        return Err(Error::Config(format!("σ must be non-negative, got {}", cfg.sigma)));
    }
    let f = PeriodicTemplate::by_id(&cfg.template)?;
    let gamma = match cfg.profile {
        Profile::Random => {
            // keep every period resolvable: at least SIM_MIN_PERIOD_SAMPLES
            // samples, relaxed to half the mean period when that is tighter
            let samples = (cfg.omega * cfg.duration).floor().max(1.0);
            let knots = cfg.n.max(2) as f64;
            let gap = (SIM_MIN_PERIOD_SAMPLES / samples).min(0.5 / knots);
            random_reparam_with_min_gap(cfg.n, derive_seed(cfg.seed, &[1]), gap)?
        }
        Profile::Drive => Reparam::jittered(cfg.n, 0.5, derive_seed(cfg.seed, &[1]))?,
    };
    let count = (cfg.omega * cfg.duration).floor() as usize + 1;
    if count < 2 {
        return Err(Error::Config("fewer than 2 samples".into()));
    }
    let step = cfg.duration / (count - 1) as f64;
    let times: Vec<f64> = (0..count).map(|i| i as f64 * step).collect();
    let mut values: Vec<f64> = times
        .iter()
        .map(|&t| f.eval(gamma.phase(t / cfg.duration)))
        .collect();
    if cfg.sigma > 0.0 {
        let gp = CoarseGp::new(0.0, cfg.duration, cfg.l)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2]));
        for (v, w) in values.iter_mut().zip(gp.sample_onto(&times, cfg.sigma, &mut rng)) {
            *v += w;
        }
    }
    let signal = Signal::uniform(0.0, step, values)?;
    let sidecar = GammaSidecar {
        template_id: cfg.template.clone(),
        duration: cfg.duration,
        knots: gamma.knots().to_vec(),
        images: gamma.images().to_vec(),
    };
    Ok(Simulation {
        signal,
        gamma,
        sidecar,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    /// Period count; estimated when absent.
    pub n: Option<usize>,
    /// Scale; chosen from the cluster scan when absent.
    pub tau: Option<f64>,
    /// Running-median window in seconds; no detrending when absent.
    pub detrend_window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub n: usize,
    pub tau: f64,
    pub odometry: OdometricResult,
    /// Times of the default sequence.
    pub sequence: Vec<f64>,
    pub metrics: Option<OdometryMetrics>,
}

/// Detrend, read the diagram, settle `N` and `τ`, and extract the odometric
/// sequences. Metrics are computed when a reference displacement is given.
pub fn odometry_pipeline(
    s: &Signal,
    opts: &PipelineOptions,
    reference: Option<(&Signal, f64)>,
) -> Result<PipelineReport> {
    let detrended = match opts.detrend_window {
        Some(w) => detrend_median(s, w)?,
        None => s.clone(),
    };
    let d = diagram_interval(&detrended);
    let (n, tau) = match (opts.n, opts.tau) {
        (Some(n), Some(tau)) => (n, tau),
        (None, Some(tau)) => (crate::estimators::n_hat_cluster(&d, tau), tau),
        (n, None) => {
            let auto = n_hat_auto(&d);
            let n = n.unwrap_or(auto.n_hat);
            let tau = if auto.n_hat == n && auto.tau_used.is_some() {
                auto.tau_used.unwrap()
            } else {
                // midpoint of the longest scale range where the count is n
                scan_h(&d)
                    .intervals()
                    .into_iter()
                    .filter(|iv| iv.2 == n)
                    .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
                    .map(|(lo, hi, _)| 0.5 * (lo + hi))
                    .ok_or_else(|| {
                        Error::Inconsistent {
                            count: auto.n_hat,
                            n,
                        }
                    })?
            };
            (n, tau)
        }
    };
    let odometry = odometric_sequences(&d, tau, n, &detrended)?;
    let sequence = odometry.best().to_vec();
    let metrics = match reference {
        Some((r, c)) => Some(odometry_metrics(&sequence, r, c)?),
        None => None,
    };
    Ok(PipelineReport {
        n,
        tau,
        odometry,
        sequence,
        metrics,
    })
}

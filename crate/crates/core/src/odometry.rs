//! Odometric sequences: one event per wheel turn.
//!
//! Prominent minima of the signal are read off the diagram. With `K` of them
//! per period, taking every `K`-th one gives a sequence of times that are one
//! period apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::AnnotatedDiagram;
use crate::signal::{Evaluate, PeriodicTemplate, Signal, Warp};

/// Wheel circumference in metres used when none is given.
pub const DEFAULT_CIRCUMFERENCE: f64 = 1.94;

/// Sample indices of the minima whose persistence exceeds `2τ`, ascending.
pub fn prominent_minima(d: &AnnotatedDiagram, tau: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = d
        .points
        .iter()
        .filter(|p| p.persistence() > 2.0 * tau)
        .map(|p| p.birth_index)
        .collect();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdometricResult {
    pub tau: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// `sequences[k][n]` is the time of the `(nK + k)`-th prominent minimum.
    pub sequences: Vec<Vec<f64>>,
    #[serde(skip)]
    pub prominent_minima: Vec<usize>,
    /// The sequence whose minima are deepest on average.
    #[serde(skip)]
    pub default_sequence: usize,
}

impl OdometricResult {
    pub fn best(&self) -> &[f64] {
        &self.sequences[self.default_sequence]
    }
}

/// Splits the prominent minima of `s` into `K = count / N` interleaved
/// sequences of `N` times each.
pub fn odometric_sequences(
    d: &AnnotatedDiagram,
    tau: f64,
    n: usize,
    s: &Signal,
) -> Result<OdometricResult> {
    if n == 0 {
        return Err(Error::Domain("N must be positive".into()));
    }
    let minima = prominent_minima(d, tau);
    let count = minima.len();
    if count == 0 || count % n != 0 {
        return Err(Error::Inconsistent { count, n });
    }
    if let Some(&i) = minima.iter().find(|&&i| i >= s.len()) {
        return Err(Error::Shape {
            expected: s.len(),
            got: i + 1,
        });
    }
    let k = count / n;
    let persistence_at = |i: usize| {
        d.points
            .iter()
            .find(|p| p.birth_index == i)
            .map_or(0.0, |p| p.persistence())
    };
    let mut sequences = Vec::with_capacity(k);
    let mut depth = Vec::with_capacity(k);
    for j in 0..k {
        let picks: Vec<usize> = minima.iter().copied().skip(j).step_by(k).collect();
        depth.push(picks.iter().map(|&i| persistence_at(i)).sum::<f64>() / n as f64);
        sequences.push(picks.iter().map(|&i| s.times()[i]).collect());
    }
    let default_sequence = (0..k)
        .max_by(|&a, &b| depth[a].total_cmp(&depth[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    Ok(OdometricResult {
        tau,
        k,
        n,
        sequences,
        prominent_minima: minima,
        default_sequence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRadius {
    /// `(R⁻, R⁺)` for each local minimum of one period, in period units.
    pub per_min_radii: Vec<(f64, f64)>,
    /// Largest radius; infinite if some side never rises by `ν`.
    pub r: f64,
}

const RADIUS_GRID: f64 = 1e-4;
const RADIUS_TOL: f64 = 1e-7;

/// Local minima of one period of `f`, located on a fine grid and refined by
/// golden-section search.
pub fn template_minima(f: &PeriodicTemplate) -> Vec<f64> {
    let steps = (1.0 / RADIUS_GRID).round() as usize;
    let v: Vec<f64> = (0..steps).map(|i| f.eval(i as f64 * RADIUS_GRID)).collect();
    let mut out = Vec::new();
    for i in 0..steps {
        let prev = v[(i + steps - 1) % steps];
        let next = v[(i + 1) % steps];
        if v[i] < prev && v[i] <= next {
            out.push(golden_min(f, i as f64 * RADIUS_GRID));
        }
    }
    out
}

fn golden_min(f: &PeriodicTemplate, centre: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (centre - RADIUS_GRID, centre + RADIUS_GRID);
    while b - a > 1e-12 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f.eval(c) < f.eval(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Distance from `x` in direction `dir` at which `f` first exceeds `level`,
/// searched over one period.
fn first_exceedance(f: &PeriodicTemplate, x: f64, dir: f64, level: f64) -> f64 {
    let steps = (1.0 / RADIUS_GRID).round() as usize;
    for j in 1..=steps {
        let r = j as f64 * RADIUS_GRID;
        if f.eval(x + dir * r) > level {
            let (mut lo, mut hi) = (r - RADIUS_GRID, r);
            while hi - lo > RADIUS_TOL {
                let mid = 0.5 * (lo + hi);
                if f.eval(x + dir * mid) > level {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
    }
    f64::INFINITY
}

/// For each local minimum `x` of `f`, the distances on either side after
/// which `f` rises above `f(x) + ν`.
pub fn tolerance_radius(f: &PeriodicTemplate, nu: f64) -> ToleranceRadius {
    let per_min_radii: Vec<(f64, f64)> = template_minima(f)
        .into_iter()
        .map(|x| {
            let level = f.eval(x) + nu;
            (
                first_exceedance(f, x, -1.0, level),
                first_exceedance(f, x, 1.0, level),
            )
        })
        .collect();
    let r = per_min_radii
        .iter()
        .map(|&(a, b)| a.max(b))
        .fold(0.0, f64::max);
    ToleranceRadius { per_min_radii, r }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometricCheck {
    /// `max |γ(t_n) − γ(t_{n−1}) − 1|`.
    pub consecutive: f64,
    /// `max |γ(t_n) − γ(t_m) − (n − m)|` over all pairs.
    pub pairwise: f64,
    /// Whether `consecutive` is within the bound.
    pub holds: bool,
}

/// How far a sequence of event times is from advancing `γ` by exactly one
/// period per event.
pub fn check_odometric_property<G: Warp + ?Sized>(seq: &[f64], gamma: &G, bound: f64) -> OdometricCheck {
    let phase: Vec<f64> = seq.iter().map(|&t| gamma.phase(t)).collect();
    let consecutive = phase
        .windows(2)
        .map(|w| (w[1] - w[0] - 1.0).abs())
        .fold(0.0, f64::max);
    let mut pairwise = 0.0_f64;
    for n in 0..phase.len() {
        for m in 0..n {
            pairwise = pairwise.max((phase[n] - phase[m] - (n - m) as f64).abs());
        }
    }
    OdometricCheck {
        consecutive,
        pairwise,
        holds: consecutive <= bound,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdometryMetrics {
    pub d_n: Vec<f64>,
    /// Segments shorter than `0.9 C`.
    #[serde(rename = "TS")]
    pub ts: usize,
    /// Segments longer than `1.1 C`.
    #[serde(rename = "TL")]
    pub tl: usize,
    /// Fraction of segments within 10% of `C`.
    #[serde(rename = "CR")]
    pub cr: f64,
    /// Mean `|d_n − C|`.
    pub dispersion: f64,
    #[serde(rename = "C")]
    pub circumference: f64,
}

/// Compares the reference displacement between consecutive events with the
/// circumference `c`.
pub fn odometry_metrics<R: Evaluate + ?Sized>(seq: &[f64], reference: &R, c: f64) -> Result<OdometryMetrics> {
    if seq.len() < 2 {
        return Err(Error::Precondition(format!(
            "metrics need at least 2 events, got {}",
            seq.len()
        )));
    }
    if !(c > 0.0) {
        return Err(Error::Domain(format!("circumference must be positive, got {c}")));
    }
    let pos: Vec<f64> = seq.iter().map(|&t| reference.evaluate(t)).collect::<Result<_>>()?;
    let d_n: Vec<f64> = pos.windows(2).map(|w| w[1] - w[0]).collect();
    let ts = d_n.iter().filter(|&&d| d < 0.9 * c).count();
    let tl = d_n.iter().filter(|&&d| d > 1.1 * c).count();
    let segments = d_n.len() as f64;
    Ok(OdometryMetrics {
        cr: 1.0 - (ts + tl) as f64 / segments,
        dispersion: d_n.iter().map(|d| (d - c).abs()).sum::<f64>() / segments,
        ts,
        tl,
        d_n,
        circumference: c,
    })
}

/// `C · #{t_n ≤ t}` for an ascending event sequence.
pub fn displacement_at(seq: &[f64], c: f64, t: f64) -> f64 {
    c * seq.partition_point(|&s| s <= t) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementSpeed {
    pub times: Vec<f64>,
    pub displacement: Vec<f64>,
    pub speed: Vec<f64>,
}

/// Step displacement and its average slope over the trailing `window` on the
/// given output times.
pub fn displacement_and_speed(seq: &[f64], c: f64, window: f64, times: &[f64]) -> Result<DisplacementSpeed> {
    if !(window > 0.0) {
        return Err(Error::Domain(format!("window must be positive, got {window}")));
    }
    if seq.is_empty() {
        return Err(Error::Precondition("no events".into()));
    }
    let displacement: Vec<f64> = times.iter().map(|&t| displacement_at(seq, c, t)).collect();
    let speed = times
        .iter()
        .zip(&displacement)
        .map(|(&t, &d)| (d - displacement_at(seq, c, t - window)) / window)
        .collect();
    Ok(DisplacementSpeed {
        times: times.to_vec(),
        displacement,
        speed,
    })
}

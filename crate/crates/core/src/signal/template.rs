use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{Reparam, Signal};
use crate::diagram::{separation_delta, to_measure, PersistenceMeasure};
use crate::error::{Error, Result};
use crate::estimators::count_sign_changes;
use crate::persistence::{diagram_circle, AnnotatedDiagram};

/// Identifiers of the built-in templates.
pub const BUILTIN_TEMPLATE_IDS: [&str; 5] = ["f0", "f1", "f2", "f3", "f4"];

/// Resolution used for template properties computed by sampling.
pub const REFERENCE_SAMPLES: usize = 10_000;

const FD_STEP: f64 = 1e-4;

/// A continuous one-periodic function.
#[derive(Clone)]
pub struct PeriodicTemplate {
    id: String,
    kind: Kind,
}

#[derive(Clone)]
enum Kind {
    Trig(TrigSeries),
    /// `sin(4πx)` on `[0, ½]`, `(1 + r) sin(4πx)` on `(½, 1]`.
    Split { r: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PeriodicTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicTemplate").field("id", &self.id).finish()
    }
}

/// A trigonometric polynomial `g`, shifted so that a period starts at its
/// global maximum and rescaled to the range `[-1, 1]`.
#[derive(Debug, Clone)]
struct TrigSeries {
    /// `(k, a_k, b_k)` for `a_k cos(2πkx) + b_k sin(2πkx)`.
    harmonics: Vec<(u32, f64, f64)>,
    shift: f64,
    lo: f64,
    hi: f64,
}

impl TrigSeries {
    fn new(harmonics: Vec<(u32, f64, f64)>) -> Self {
        let mut series = Self {
            harmonics,
            shift: 0.0,
            lo: 0.0,
            hi: 0.0,
        };
        let raw = |x: f64| series.raw(x, 0);
        let (x_max, _) = refine_extremum(&|x| -raw(x));
        let (_, lo) = refine_extremum(&raw);
        let hi = raw(x_max);
        series.shift = x_max;
        series.lo = lo;
        series.hi = hi;
        series
    }

    fn raw(&self, x: f64, order: u32) -> f64 {
        let phase = order as f64 * PI / 2.0;
        self.harmonics
            .iter()
            .map(|&(k, a, b)| {
                let w = 2.0 * PI * k as f64;
                let arg = w * x + phase;
                w.powi(order as i32) * (a * arg.cos() + b * arg.sin())
            })
            .sum()
    }

    fn scale(&self) -> f64 {
        2.0 / (self.hi - self.lo)
    }

    fn eval(&self, x: f64) -> f64 {
        // written so that the maximum maps to exactly 1
        1.0 - (self.hi - self.raw(x + self.shift, 0)) * self.scale()
    }

    fn derivative(&self, order: u32, x: f64) -> f64 {
        self.raw(x + self.shift, order) * self.scale()
    }
}

/// Location and value of the minimum of a one-periodic `g`: dense scan then
/// golden-section refinement around the best grid point.
fn refine_extremum(g: &dyn Fn(f64) -> f64) -> (f64, f64) {
    const GRID: usize = 1 << 14;
    let h = 1.0 / GRID as f64;
    let best = (0..GRID)
        .map(|i| i as f64 * h)
        .min_by(|a, b| g(*a).total_cmp(&g(*b)))
        .unwrap_or(0.0);
    let (mut a, mut b) = (best - h, best + h);
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = (0.5 * (a + b)).rem_euclid(1.0);
    (x, g(x))
}

/// Modified Bessel function of the first kind by its power series.
fn bessel_i(n: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = 0.0;
    for k in 0..60 {
        sum += term;
        let k = k as f64;
        term *= half * half / ((k + 1.0) * (k + 1.0 + n as f64));
    }
    sum
}

fn fract(x: f64) -> f64 {
    x - x.floor()
}

impl PeriodicTemplate {
    /// The built-in templates. `f0`, `f3` and `f4` have one extremum pair per
    /// period, `f1` two and `f2` three.
    pub fn builtin(id: &str) -> Result<Self> {
        let harmonics: Vec<(u32, f64, f64)> = match id {
            // sin(2πx)
            "f0" => vec![(1, 0.0, 1.0)],
            // sin(2πx) + sin(4πx)
            "f1" => vec![(1, 0.0, 1.0), (2, 0.0, 1.0)],
            // sin(2πx) + 0.6 sin(4πx + 2π/3) + 0.9 sin(6πx)
            "f2" => {
                let p = 2.0 * PI / 3.0;
                vec![(1, 0.0, 1.0), (2, 0.6 * p.sin(), 0.6 * p.cos()), (3, 0.0, 0.9)]
            }
            // smoothed sawtooth Σ 0.6ⁿ sin(2πnx) / n
            "f3" => (1..=11)
                .map(|n| (n, 0.0, 0.6_f64.powi(n as i32) / n as f64))
                .collect(),
            // smoothed pulse: von Mises bump with κ = 2, eight harmonics
            "f4" => (1..=8).map(|n| (n, bessel_i(n, 2.0), 0.0)).collect(),
            _ => return Err(Error::Domain(format!("unknown template `{id}`"))),
        };
        Ok(Self {
            id: id.to_string(),
            kind: Kind::Trig(TrigSeries::new(harmonics)),
        })
    }

    /// Built-in ids plus `fr:<r>` for the split family.
    pub fn by_id(id: &str) -> Result<Self> {
        match id.strip_prefix("fr:") {
            Some(r) => {
                let r: f64 = r
                    .parse()
                    .map_err(|_| Error::Domain(format!("bad parameter in `{id}`")))?;
                if !(r >= 0.0) {
                    return Err(Error::Domain(format!("r must be non-negative in `{id}`")));
                }
                Ok(Self::f_r(r))
            }
            None => Self::builtin(id),
        }
    }

    /// The two-bump family `f_r`: `sin(4πx)` on `[0, ½]` and `(1 + r) sin(4πx)`
    /// on `(½, 1]`; degenerate (half-periodic) at `r = 0`.
    pub fn f_r(r: f64) -> Self {
        Self {
            id: format!("fr:{r}"),
            kind: Kind::Split { r },
        }
    }

    /// Wraps an arbitrary function; the caller guarantees period 1.
    pub fn from_fn<F>(id: &str, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            id: id.to_string(),
            kind: Kind::Custom(Arc::new(f)),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Trig(series) => series.eval(fract(x)),
            Kind::Split { r } => {
                let x = fract(x);
                let s = (4.0 * PI * x).sin();
                if x <= 0.5 {
                    s
                } else {
                    (1.0 + r) * s
                }
            }
            Kind::Custom(f) => f(x),
        }
    }

    /// `order`-th derivative, `order` in `1..=3`. Analytic for the built-in
    /// families, central finite differences with step `1e-4` otherwise.
    pub fn derivative(&self, order: u32, x: f64) -> f64 {
        assert!((1..=3).contains(&order), "derivative order must be 1, 2 or 3");
        match &self.kind {
            Kind::Trig(series) => series.derivative(order, fract(x)),
            Kind::Split { r } => {
                let x = fract(x);
                let w = 4.0 * PI;
                let d = w.powi(order as i32) * (w * x + order as f64 * PI / 2.0).sin();
                if x <= 0.5 {
                    d
                } else {
                    (1.0 + r) * d
                }
            }
            Kind::Custom(_) => {
                let h = FD_STEP;
                let f = |y: f64| self.eval(y);
                match order {
                    1 => (f(x + h) - f(x - h)) / (2.0 * h),
                    2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
                    _ => {
                        (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h))
                            / (2.0 * h * h * h)
                    }
                }
            }
        }
    }

    /// `‖f⁽ᵒʳᵈᵉʳ⁾‖∞` over one period on a `1e-4` grid.
    pub fn derivative_sup_norm(&self, order: u32) -> f64 {
        let steps = (1.0 / FD_STEP).round() as usize;
        (0..steps)
            .map(|i| self.derivative(order, i as f64 * FD_STEP).abs())
            .fold(0.0, f64::max)
    }

    /// `max |f(x + 1) − f(x)|` over a grid of `samples` points in `[0, 1)`.
    pub fn periodicity_defect(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let x = i as f64 / samples as f64;
                (self.eval(x + 1.0) - self.eval(x)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `f(j / P)` for `j = 0..=P`, with the last value copied from the first so
    /// the sequence closes exactly.
    pub fn one_period_values(&self, per_period: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..per_period)
            .map(|j| self.eval(j as f64 / per_period as f64))
            .collect();
        v.push(v[0]);
        v
    }

    /// `N` concatenated periods sampled at `P` points each on `[0, 1]`; every
    /// period carries bit-identical values.
    pub fn sampled_periods(&self, n: usize, per_period: usize) -> Signal {
        let one = self.one_period_values(per_period);
        let total = n * per_period;
        let values = (0..=total).map(|j| one[j % per_period]).collect();
        Signal::uniform(0.0, 1.0 / total as f64, values).expect("valid uniform grid")
    }

    /// `f ∘ γ` on the grid `γ⁻¹(j / P)`, with the values taken from one
    /// sampled period so that the samples are exactly periodic in phase.
    pub fn composed_aligned(&self, gamma: &Reparam, per_period: usize) -> Result<Signal> {
        let one = self.one_period_values(per_period);
        let grid = gamma.aligned_grid(per_period);
        let values = (0..grid.len()).map(|j| one[j % per_period]).collect();
        Signal::new(grid, values)
    }

    /// Circle diagram of one period sampled at `P` points.
    pub fn circle_diagram(&self, per_period: usize) -> AnnotatedDiagram {
        let one = self.one_period_values(per_period);
        let signal = Signal::uniform(0.0, 1.0 / per_period as f64, one).expect("valid grid");
        diagram_circle(&signal).expect("closed by construction")
    }

    /// Persistence measure of one period (points merged at `1e-9`).
    pub fn measure(&self, per_period: usize) -> PersistenceMeasure {
        to_measure(&self.circle_diagram(per_period), 1e-9)
    }

    /// Separation of the one-period measure.
    pub fn separation(&self, per_period: usize) -> f64 {
        separation_delta(&self.measure(per_period)).expect("a circle diagram is never empty")
    }

    /// Number of local minima in one period.
    pub fn minima_per_period(&self, per_period: usize) -> usize {
        self.circle_diagram(per_period).len()
    }

    /// Sign changes in one period, counted cyclically.
    pub fn zero_crossings_per_period(&self, per_period: usize) -> usize {
        let one = self.one_period_values(per_period);
        let Some(start) = one.iter().position(|v| *v != 0.0) else {
            return 0;
        };
        let cyclic: Vec<f64> = (0..=per_period)
            .map(|j| one[(start + j) % per_period])
            .collect();
        count_sign_changes(&cyclic)
    }
}

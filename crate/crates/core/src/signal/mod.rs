//! Piecewise-linear signals and the operators that produce them.

mod reparam;
mod template;

pub use reparam::{random_reparam, random_reparam_with_min_gap, Reparam, SmoothReparam, Warp};
pub use template::{PeriodicTemplate, BUILTIN_TEMPLATE_IDS, REFERENCE_SAMPLES};

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// A finite sequence of `(time, value)` samples, read as the piecewise-linear
/// function through them.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    times: Vec<f64>,
    values: Vec<f64>,
}

/// Anything that can be evaluated at a time.
pub trait Evaluate {
    fn evaluate(&self, t: f64) -> Result<f64>;
}

impl<F: Fn(f64) -> f64> Evaluate for F {
    fn evaluate(&self, t: f64) -> Result<f64> {
        Ok(self(t))
    }
}

impl Evaluate for Signal {
    fn evaluate(&self, t: f64) -> Result<f64> {
        self.eval(t)
    }
}

impl Signal {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Shape {
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::Domain(format!(
                "a signal needs at least 2 samples, got {}",
                times.len()
            )));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "times must be strictly increasing (index {})",
                i + 1
            )));
        }
        if let Some(i) = times
            .iter()
            .chain(values.iter())
            .position(|v| !v.is_finite())
        {
            return Err(Error::Domain(format!("non-finite sample at position {i}")));
        }
        Ok(Self { times, values })
    }

    /// Signal sampled at integer times `0, 1, 2, ...`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len()).map(|i| i as f64).collect();
        Self::new(times, values)
    }

    /// Uniformly sampled signal starting at `start` with spacing `step`.
    pub fn uniform(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Domain(format!("sampling step must be positive, got {step}")));
        }
        let times = (0..values.len()).map(|i| start + i as f64 * step).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same times, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.times.clone(), values)
    }

    /// Linear interpolation between samples. Times outside the sampled range
    /// are a domain error.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (t0, t1) = (self.start(), self.end());
        if !(t >= t0 && t <= t1) {
            return Err(Error::Domain(format!(
                "t = {t} outside the signal range [{t0}, {t1}]"
            )));
        }
        let j = self.times.partition_point(|&s| s <= t);
        if j == self.times.len() {
            return Ok(self.values[j - 1]);
        }
        let (ta, tb) = (self.times[j - 1], self.times[j]);
        let (va, vb) = (self.values[j - 1], self.values[j]);
        let w = (t - ta) / (tb - ta);
        Ok(va + w * (vb - va))
    }

    /// Mean sample spacing, if the spacing is uniform up to `rel_tol`.
    pub fn uniform_step(&self, rel_tol: f64) -> Option<f64> {
        let step = (self.end() - self.start()) / (self.len() - 1) as f64;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= rel_tol * step)
            .then_some(step)
    }

    /// Reads the `t,value` CSV format. Errors name the offending line.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Input(format!("line 1: {e}")))?
            .clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
            return Err(Error::Input(format!(
                "line 1: expected header `t,value`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| Error::Input(format!("line {line}: {e}")))?;
            if record.len() != 2 {
                return Err(Error::Input(format!(
                    "line {line}: expected 2 fields, got {}",
                    record.len()
                )));
            }
            let parse = |field: &str| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Input(format!("line {line}: `{field}` is not a number")))
            };
            times.push(parse(&record[0])?);
            values.push(parse(&record[1])?);
        }
        if times.is_empty() {
            return Err(Error::Input("signal file contains no samples".into()));
        }
        Self::new(times, values).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io_err = |e: std::io::Error| Error::Input(e.to_string());
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "t,value").map_err(io_err)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}").map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }
}

/// Sampling frequency `ω` on `[0, 1]`; `M = ⌊ω⌋` so there are `M + 1` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    omega: f64,
}

impl SamplingConfig {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega >= 1.0) || !omega.is_finite() {
            return Err(Error::Config(format!(
                "sampling frequency must be at least 1, got {omega}"
            )));
        }
        Ok(Self { omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn m(&self) -> usize {
        self.omega.floor() as usize
    }
}

/// `values[i] = f(γ(grid[i]))`.
pub fn eval_template_composed<G: Warp + ?Sized>(
    f: &PeriodicTemplate,
    gamma: &G,
    grid: &[f64],
) -> Result<Signal> {
    if let Some(&t) = grid.iter().find(|t| !(**t >= 0.0 && **t <= 1.0)) {
        return Err(Error::Domain(format!("grid point {t} outside [0, 1]")));
    }
    let values = grid.iter().map(|&t| f.eval(gamma.phase(t))).collect();
    Signal::new(grid.to_vec(), values)
}

/// The sampling operator: `(h(m / ω))` for `m = 0..=M`.
pub fn sample_l<H: Evaluate + ?Sized>(h: &H, cfg: SamplingConfig) -> Result<Vec<f64>> {
    (0..=cfg.m())
        .map(|m| h.evaluate(m as f64 / cfg.omega()))
        .collect()
}

/// The interpolation operator: the piecewise-linear function on `[0, M/ω]`
/// with knots `(m / ω, a[m])`.
pub fn interpolate_f(a: &[f64], cfg: SamplingConfig) -> Result<Signal> {
    let expected = cfg.m() + 1;
    if a.len() != expected {
        return Err(Error::Shape {
            expected,
            got: a.len(),
        });
    }
    let times = (0..expected).map(|m| m as f64 / cfg.omega()).collect();
    Signal::new(times, a.to_vec())
}

/// Subtracts a centred running median. The window holds every sample within
/// `window_seconds / 2` of the centre and shrinks at the boundaries.
pub fn detrend_median(s: &Signal, window_seconds: f64) -> Result<Signal> {
    let step = s
        .uniform_step(1e-6)
        .ok_or_else(|| Error::Precondition("median detrending needs uniform sampling".into()))?;
    if !(window_seconds > 0.0) {
        return Err(Error::Precondition(format!(
            "window must be positive, got {window_seconds}"
        )));
    }
    let half = ((window_seconds / 2.0) / step + 1e-9).floor() as usize;
    if half == 0 {
        return Err(Error::Precondition(format!(
            "a {window_seconds} s window covers fewer than 3 samples"
        )));
    }
    let values = s.values();
    let n = values.len();
    let mut scratch = Vec::with_capacity(2 * half + 1);
    let detrended = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            scratch.clear();
            scratch.extend_from_slice(&values[lo..hi]);
            values[i] - median_in_place(&mut scratch)
        })
        .collect();
    s.with_values(detrended)
}

pub(crate) fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(t: f64) -> f64 {
        (2.0 * PI * t).sin()
    }

    #[test]
    fn signal_rejects_bad_inputs() {
        assert!(Signal::new(vec![0.0], vec![1.0]).is_err());
        assert!(Signal::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Signal::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(Signal::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn eval_interpolates_and_rejects_outside() {
        let s = Signal::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(s.eval(0.5).unwrap(), 1.0);
        assert_eq!(s.eval(2.0).unwrap(), 1.0);
        assert_eq!(s.eval(3.0).unwrap(), 0.0);
        assert!(s.eval(-0.1).is_err());
        assert!(s.eval(3.1).is_err());
    }

    #[test]
    fn composed_sine_on_quarter_grid() {
        let f = PeriodicTemplate::from_fn("sine", sine);
        let gamma = Reparam::identity(1);
        let s = eval_template_composed(&f, &gamma, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0];
        for (v, e) in s.values().iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "{v} vs {e}");
        }
        assert!(eval_template_composed(&f, &gamma, &[0.0, 1.5]).is_err());
        assert!(eval_template_composed(&f, &gamma, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn split_template_quarter_point() {
        let f = PeriodicTemplate::f_r(0.5);
        assert!((f.eval(0.625) - 1.5).abs() < 1e-12);
        assert!((f.eval(0.875) + 1.5).abs() < 1e-12);
        assert!((f.eval(0.125) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composed_extrema_match_dense_brute_force() {
        for id in BUILTIN_TEMPLATE_IDS {
            let f = PeriodicTemplate::builtin(id).unwrap();
            let gamma = random_reparam(3, 17);
            let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
            let s = eval_template_composed(&f, &gamma, &grid).unwrap();
            // brute-force extrema of f over [0, 3] on a much finer grid
            let fine: Vec<f64> = (0..=300_000).map(|i| f.eval(3.0 * i as f64 / 300_000.0)).collect();
            let fmin = fine.iter().copied().fold(f64::INFINITY, f64::min);
            let fmax = fine.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // grid resolution in phase is bounded by the steepest knot slope
            let slope = gamma.max_slope();
            let tol = f.derivative_sup_norm(1) * slope / 999.0;
            assert!(s.max_value() <= fmax + 1e-12 && s.max_value() >= fmax - tol, "{id}");
            assert!(s.min_value() >= fmin - 1e-12 && s.min_value() <= fmin + tol, "{id}");
        }
    }

    #[test]
    fn sample_l_examples() {
        let a = sample_l(&|t: f64| t, SamplingConfig::new(4.0).unwrap()).unwrap();
        assert_eq!(a, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let b = sample_l(&sine, SamplingConfig::new(2.0).unwrap()).unwrap();
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|v| v.abs() < 1e-12));
        assert!(SamplingConfig::new(0.5).is_err());
    }

    #[test]
    fn sample_l_matches_pointwise_evaluation() {
        let f = PeriodicTemplate::builtin("f2").unwrap();
        let gamma = random_reparam(4, 3);
        let composed = |t: f64| f.eval(gamma.phase(t));
        let cfg = SamplingConfig::new(125.0).unwrap();
        let a = sample_l(&composed, cfg).unwrap();
        assert_eq!(a.len(), 126);
        for (m, v) in a.iter().enumerate() {
            assert_eq!(*v, f.eval(gamma.phase(m as f64 / 125.0)));
        }
        // a Signal is evaluable too
        let s = interpolate_f(&a, cfg).unwrap();
        assert_eq!(sample_l(&s, cfg).unwrap(), a);
    }

    #[test]
    fn interpolate_f_examples() {
        let cfg = SamplingConfig::new(2.0).unwrap();
        let s = interpolate_f(&[0.0, 1.0, 0.0], cfg).unwrap();
        assert_eq!(s.eval(0.5).unwrap(), 1.0);
        assert_eq!(s.eval(0.25).unwrap(), 0.5);
        assert!(matches!(
            interpolate_f(&[0.0, 1.0], cfg),
            Err(Error::Shape { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn interpolation_is_a_fixed_point_on_grid_linear_functions() {
        let cfg = SamplingConfig::new(10.0).unwrap();
        let a: Vec<f64> = (0..=10).map(|m| ((m * 7) % 5) as f64 - 2.0).collect();
        let g = interpolate_f(&a, cfg).unwrap();
        let again = interpolate_f(&sample_l(&g, cfg).unwrap(), cfg).unwrap();
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            assert!((g.eval(t).unwrap() - again.eval(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_error_within_second_order_bound() {
        let f = PeriodicTemplate::from_fn("sine", sine);
        let gamma = SmoothReparam::new(1, 0.1).unwrap();
        let omega = 100.0;
        let cfg = SamplingConfig::new(omega).unwrap();
        let composed = |t: f64| f.eval(gamma.phase(t));
        let t_op = interpolate_f(&sample_l(&composed, cfg).unwrap(), cfg).unwrap();
        let err = (0..=100_000)
            .map(|i| {
                let t = i as f64 / 100_000.0;
                (t_op.eval(t).unwrap() - composed(t)).abs()
            })
            .fold(0.0, f64::max);
        let (g1, g2) = (1.0 + 0.2 * PI, 0.1 * 4.0 * PI * PI);
        let bound = 2.0 / (omega * omega) * (4.0 * PI * PI * g1 * g1 + 2.0 * PI * g2);
        assert!(err <= 1.5 * bound, "{err} > 1.5 * {bound}");
    }

    #[test]
    fn detrend_constant_and_ramp() {
        let s = Signal::uniform(0.0, 0.1, vec![5.0; 30]).unwrap();
        assert!(detrend_median(&s, 1.0).unwrap().values().iter().all(|v| *v == 0.0));

        let ramp: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let s = Signal::uniform(0.0, 0.1, ramp).unwrap();
        let d = detrend_median(&s, 1.0).unwrap();
        assert!(d.values()[5].abs() < 1e-12);
    }

    #[test]
    fn detrend_rejects_irregular_sampling_and_tiny_windows() {
        let s = Signal::new(vec![0.0, 0.1, 0.3, 0.4], vec![1.0; 4]).unwrap();
        assert!(matches!(detrend_median(&s, 1.0), Err(Error::Precondition(_))));
        let s = Signal::uniform(0.0, 1.0, vec![1.0; 10]).unwrap();
        assert!(matches!(detrend_median(&s, 1.0), Err(Error::Precondition(_))));
    }

    fn brute_rolling_median(v: &[f64], half: usize) -> Vec<f64> {
        (0..v.len())
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(v.len());
                let mut w = v[lo..hi].to_vec();
                w.sort_by(f64::total_cmp);
                let k = w.len();
                if k % 2 == 1 {
                    w[k / 2]
                } else {
                    (w[k / 2 - 1] + w[k / 2]) / 2.0
                }
            })
            .collect()
    }

    #[test]
    fn detrend_offset_sine() {
        let omega = 125.0;
        let values: Vec<f64> = (0..1250).map(|i| sine(i as f64 / omega) + 3.0).collect();
        let s = Signal::uniform(0.0, 1.0 / omega, values.clone()).unwrap();
        let d = detrend_median(&s, 5.0).unwrap();
        let brute = brute_rolling_median(&values, 312);
        for ((out, v), m) in d.values().iter().zip(&values).zip(&brute) {
            assert!((out - (v - m)).abs() < 1e-12);
        }
        // away from the truncated edge windows the median is the offset
        let interior = &d.values()[312..938];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        let (lo, hi) = interior
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let amp = (hi - lo) / 2.0;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((amp - 1.0).abs() < 0.05, "amplitude {amp}");
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let s = Signal::new(vec![0.0, 0.5, 1.25], vec![-1.0, 2.5, 0.125]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("t,value\n"));
        assert_eq!(Signal::read_csv(buf.as_slice()).unwrap(), s);

        let bad = "t,value\n0,1\n1,abc\n";
        let err = Signal::read_csv(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(Signal::read_csv("t,value\n".as_bytes()).is_err());
        assert!(Signal::read_csv("time,v\n0,1\n1,2\n".as_bytes()).is_err());
    }
}

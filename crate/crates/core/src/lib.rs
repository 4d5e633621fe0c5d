//! Period counting and phase recovery for reparametrized periodic signals.
//!
//! A signal `S(t) = f(γ(t)) + W(t)` is observed, where `f` is one-periodic,
//! `γ: [0, 1] → [0, N]` is an unknown increasing map and `W` is noise. The
//! crate recovers `N` from the 0-dimensional sublevel-set persistence diagram
//! of `S` and extracts odometric sequences (one event per period) from its
//! prominent minima.
//!
//! Modules:
//!
//! * [`signal`]: piecewise-linear signals, periodic templates, reparametrizations,
//!   sampling/interpolation operators and median detrending.
//! * [`persistence`]: annotated persistence diagrams on an interval or a circle.
//! * [`diagram`]: persistence measures, separation, ball counts, bottleneck
//!   distance and diagram realization.
//! * [`estimators`]: the gcd-of-multiplicity estimators and the zero-crossings
//!   baseline.
//! * [`odometry`]: odometric sequences, tolerance radius and quality metrics.
//! * [`noise`]: Gaussian-process noise and probability bounds.
//! * [`experiment`]: synthetic benchmark and simulation harness used by the CLI.

pub mod diagram;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod noise;
pub mod odometry;
pub mod persistence;
pub mod signal;

pub use error::{Error, Result};

//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p periodica --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use periodica::diagram::{
    bottleneck, realize_diagram, separation_delta, to_measure, PersistenceMeasure, Point,
};
use periodica::estimators::{n_exact, n_hat_auto, n_hat_ball, n_hat_cluster, scan_h};
use periodica::experiment::{
    odometry_pipeline, run_bench, simulate, BenchEstimator, ExperimentConfig, PipelineOptions,
    Profile, SimulateConfig,
};
use periodica::noise::{
    bound_gaussian_process, bound_white_noise, sup_norm, white_noise, BoundInputs, CoarseGp,
};
use periodica::odometry::{
    check_odometric_property, odometric_sequences, prominent_minima, tolerance_radius,
    DEFAULT_CIRCUMFERENCE,
};
use periodica::persistence::{brute_force_diagram, diagram_circle, diagram_interval};
use periodica::signal::{
    interpolate_f, random_reparam, sample_l, PeriodicTemplate, SamplingConfig, Signal,
    SmoothReparam, Warp, BUILTIN_TEMPLATE_IDS,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn builtins() -> Vec<PeriodicTemplate> {
    BUILTIN_TEMPLATE_IDS
        .iter()
        .map(|id| PeriodicTemplate::builtin(id).unwrap())
        .collect()
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

fn persistence_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for i in 0..1000 {
        let len = rng.random_range(2..=50);
        // half the signals use a small value set to force ties and plateaus
        let values: Vec<f64> = if i % 2 == 0 {
            (0..len).map(|_| rng.random_range(-3..=3) as f64).collect()
        } else {
            (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let s = Signal::from_values(values).unwrap();
        if diagram_interval(&s).sorted_pairs() != brute_force_diagram(&s).sorted_pairs() {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        mismatches == 0 && within(t, 10),
        format!("{mismatches} mismatches in 1000 signals, {t:.2?}"),
    )
}

fn circle_homogeneity() -> Outcome {
    let start = Instant::now();
    let per_period = 1000;
    let mut failures = Vec::new();
    for f in builtins() {
        let one = to_measure(&f.circle_diagram(per_period), 0.0);
        for n in 1..=10 {
            let many = diagram_circle(&f.sampled_periods(n, per_period)).unwrap();
            if to_measure(&many, 0.0) != one.scaled(n) {
                failures.push(format!("{} N={n}", f.id()));
            }
        }
    }
    let t = start.elapsed();
    outcome(
        failures.is_empty() && within(t, 5),
        format!("50 cases, failures {failures:?}, {t:.2?}"),
    )
}

fn bottleneck_stability() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..200 {
        let len = rng.random_range(10..=300);
        let mut x = 0.0;
        let values: Vec<f64> = (0..len)
            .map(|_| {
                x += rng.random_range(-0.5..0.5);
                x
            })
            .collect();
        let amp = rng.random_range(0.0..=0.1);
        let w: Vec<f64> = (0..len).map(|_| rng.random_range(-amp..=amp)).collect();
        let s = Signal::from_values(values.clone()).unwrap();
        let t = Signal::from_values(values.iter().zip(&w).map(|(a, b)| a + b).collect()).unwrap();
        let db = bottleneck(&diagram_interval(&s), &diagram_interval(&t)).unwrap();
        worst_excess = worst_excess.max(db - sup_norm(&w));
    }
    let t = start.elapsed();
    outcome(
        worst_excess <= 1e-9 && within(t, 30),
        format!("max d_B − ‖w‖∞ = {worst_excess:.3e}, {t:.2?}"),
    )
}

fn noiseless_exactness() -> Outcome {
    let per_period = 200;
    let templates = builtins();
    let degenerate: Vec<&str> = templates
        .iter()
        .filter(|f| n_exact(&f.measure(per_period)) != 1)
        .map(|f| f.id())
        .collect();
    if !degenerate.is_empty() {
        return outcome(false, format!("degenerate templates {degenerate:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut wrong = 0;
    let mut total = 0;
    for f in &templates {
        for _ in 0..100 {
            let n = rng.random_range(5..=50);
            let gamma = random_reparam(n, rng.random());
            let s = f.composed_aligned(&gamma, per_period).unwrap();
            total += 1;
            if n_exact(&to_measure(&diagram_interval(&s), 0.0)) != n {
                wrong += 1;
            }
        }
    }
    outcome(wrong == 0, format!("{wrong}/{total} wrong (100 trials per template)"))
}

/// One bounded-noise trial: aligned samples of `f ∘ γ` plus noise with
/// sup-norm below `δ/6`, and `τ` drawn from `(2ε, δ/3)`.
struct NoisyTrial {
    n: usize,
    gamma: periodica::signal::Reparam,
    signal: Signal,
    eps: f64,
    tau: f64,
}

fn noisy_trial(f: &PeriodicTemplate, delta: f64, per_period: usize, n_max: usize, rng: &mut ChaCha8Rng) -> NoisyTrial {
    let n = rng.random_range(5..=n_max);
    let gamma = random_reparam(n, rng.random());
    let clean = f.composed_aligned(&gamma, per_period).unwrap();
    let eps = rng.random_range(0.1..1.0) * (delta / 6.0 - 1e-6);
    let l = rng.random_range(0.01..0.4);
    let sigma = rng.random_range(0.2..2.0) * eps;
    let gp = CoarseGp::new(0.0, 1.0, l).unwrap();
    let w = gp.sample_clipped_onto(clean.times(), sigma, eps, rng);
    let values = clean.values().iter().zip(&w).map(|(a, b)| a + b).collect();
    let signal = clean.with_values(values).unwrap();
    let tau = rng.random_range(2.0 * eps..delta / 3.0);
    NoisyTrial {
        n,
        gamma,
        signal,
        eps,
        tau,
    }
}

fn n_stability() -> Outcome {
    let per_period = 100;
    let templates = builtins();
    let deltas: Vec<f64> = templates.iter().map(|f| f.separation(per_period)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut ball_ok, mut cluster_ok) = (0, 0);
    for trial in 0..200 {
        let k = trial % templates.len();
        let t = noisy_trial(&templates[k], deltas[k], per_period, 50, &mut rng);
        let d = diagram_interval(&t.signal);
        ball_ok += usize::from(n_hat_ball(&d, t.tau) == t.n);
        cluster_ok += usize::from(n_hat_cluster(&d, t.tau) == t.n);
    }
    outcome(
        ball_ok == 200 && cluster_ok == 200,
        format!("ball {ball_ok}/200, cluster {cluster_ok}/200"),
    )
}

fn realization_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = 0;
    for _ in 0..100 {
        let b0 = rng.random_range(-2.0..0.0);
        let d0 = rng.random_range(0.5..3.0);
        let mut points: Vec<Point> = vec![(b0, d0)];
        for _ in 0..rng.random_range(0..12) {
            let b = rng.random_range(b0..d0);
            let d = rng.random_range(b..d0);
            if d > b && d - b < d0 - b0 {
                let copies = rng.random_range(1..=3);
                points.extend(std::iter::repeat_n((b, d), copies));
            }
        }
        let m = PersistenceMeasure::from_points(&points);
        let ok = realize_diagram(&m)
            .and_then(|s| diagram_circle(&s))
            .map(|d| to_measure(&d, 0.0) == m)
            .unwrap_or(false);
        failures += usize::from(!ok);
    }
    outcome(failures == 0, format!("{failures}/100 measures not reproduced"))
}

fn interpolation_bound() -> Outcome {
    let f = PeriodicTemplate::from_fn("sine", |x| (2.0 * PI * x).sin());
    let (f1, f2) = (2.0 * PI, 4.0 * PI * PI);
    let mut worst_ratio = 0.0_f64;
    let mut report = Vec::new();
    for n in [1, 3] {
        let gamma = SmoothReparam::new(n, 0.1).unwrap();
        let (mut g1, mut g2) = (0.0_f64, 0.0_f64);
        for i in 0..=10_000 {
            let d = gamma.derivatives(i as f64 * 1e-4).unwrap();
            g1 = g1.max(d[0].abs());
            g2 = g2.max(d[1].abs());
        }
        let h = |t: f64| f.eval(gamma.phase(t));
        for omega in [100.0, 200.0] {
            let cfg = SamplingConfig::new(omega).unwrap();
            let pl = interpolate_f(&sample_l(&h, cfg).unwrap(), cfg).unwrap();
            let err = (0..=100_000)
                .map(|i| i as f64 / 100_000.0 * pl.end())
                .map(|t| (pl.eval(t).unwrap() - h(t)).abs())
                .fold(0.0, f64::max);
            let bound = 2.0 / (omega * omega) * (f2 * g1 * g1 + f1 * g2);
            worst_ratio = worst_ratio.max(err / bound);
            report.push(format!("N={n} ω={omega}: {err:.2e}/{bound:.2e}"));
        }
    }
    outcome(
        worst_ratio <= 1.5,
        format!("worst error/bound {worst_ratio:.3}; {}", report.join(", ")),
    )
}

fn odometry_bound() -> Outcome {
    let per_period = 100;
    let templates = builtins();
    let deltas: Vec<f64> = templates.iter().map(|f| f.separation(per_period)).collect();
    let minima: Vec<usize> = templates.iter().map(|f| f.minima_per_period(per_period)).collect();
    let slack = 2.0 / per_period as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut count_fail, mut bound_fail) = (0, 0);
    let mut worst = 0.0_f64;
    for trial in 0..100 {
        let k = trial % templates.len();
        let t = noisy_trial(&templates[k], deltas[k], per_period, 30, &mut rng);
        let d = diagram_interval(&t.signal);
        if prominent_minima(&d, t.tau).len() != t.n * minima[k] {
            count_fail += 1;
            continue;
        }
        let r = tolerance_radius(&templates[k], t.tau + 2.0 * t.eps).r;
        let bound = 2.0 * r + slack;
        let seqs = odometric_sequences(&d, t.tau, t.n, &t.signal).unwrap();
        for seq in &seqs.sequences {
            let c = check_odometric_property(seq, &t.gamma, bound);
            worst = worst.max(c.consecutive / bound);
            bound_fail += usize::from(!c.holds);
        }
    }
    outcome(
        count_fail == 0 && bound_fail == 0,
        format!("count failures {count_fail}, bound violations {bound_fail}, worst deviation/bound {worst:.3}"),
    )
}

fn split_family() -> Outcome {
    let expected = [(0.2, 2), (0.5, 2), (0.9, 2), (1.1, 1), (1.5, 1)];
    let mut pass = true;
    let mut report = Vec::new();
    for (r, want) in expected {
        let d = PeriodicTemplate::f_r(r).circle_diagram(2000);
        let got = n_hat_auto(&d).n_hat;
        let plateaus: Vec<String> = scan_h(&d)
            .intervals()
            .iter()
            .map(|(lo, hi, v)| format!("{v}:{:.3}", hi - lo))
            .collect();
        pass &= got == want;
        report.push(format!("r={r} → {got} [{}]", plateaus.join(" ")));
    }
    outcome(pass, report.join("; "))
}

fn benchmark_trend() -> Outcome {
    let cfg = ExperimentConfig {
        templates: vec!["f0".into(), "f2".into()],
        n_range: [5, 50],
        trials: 50,
        sigma_grid: vec![0.05, 0.3],
        l_grid: vec![0.2],
        seed: 10,
        estimators: vec![BenchEstimator::AutoCluster, BenchEstimator::ZeroCrossingsOracle],
        samples: 20_000,
        min_period_samples: 40,
    };
    let result = run_bench(&cfg).unwrap();
    let mut pass = true;
    let mut report = Vec::new();
    for id in ["f0", "f2"] {
        for sigma in [0.05, 0.3] {
            let auto = result.rate(id, sigma, 0.2, BenchEstimator::AutoCluster).unwrap();
            let zc = result.rate(id, sigma, 0.2, BenchEstimator::ZeroCrossingsOracle).unwrap();
            pass &= auto >= zc - 0.05;
            if id == "f0" && sigma == 0.05 {
                pass &= auto >= 0.95;
            }
            report.push(format!("{id} σ={sigma}: auto {auto:.2} zc {zc:.2}"));
        }
    }
    outcome(pass, report.join("; "))
}

fn simulated_odometry() -> Outcome {
    let start = Instant::now();
    let cfg = SimulateConfig {
        template: "f0".into(),
        n: 40,
        sigma: 0.1,
        l: 0.5,
        omega: 125.0,
        seed: 11,
        duration: 20.0,
        profile: Profile::Drive,
    };
    let sim = simulate(&cfg).unwrap();
    let c = DEFAULT_CIRCUMFERENCE;
    let reference = sim.reference(c);
    let opts = PipelineOptions {
        n: None,
        tau: None,
        detrend_window: Some(5.0),
    };
    let t = start.elapsed();
    match odometry_pipeline(&sim.signal, &opts, Some((&reference, c))) {
        Ok(report) => {
            let m = report.metrics.unwrap();
            let t = t.max(start.elapsed());
            outcome(
                m.cr >= 0.95 && m.dispersion <= 0.1 * c && within(t, 30),
                format!(
                    "N̂ = {}, CR = {:.3}, dispersion = {:.4} m (limit {:.3}), {t:.2?}",
                    report.n,
                    m.cr,
                    m.dispersion,
                    0.1 * c
                ),
            )
        }
        Err(e) => outcome(false, format!("pipeline failed: {e}")),
    }
}

fn bound_evaluators() -> Outcome {
    // 40-digit evaluations of 1 − (e^{−κ²/2}/(l²π) + 2φ(−κ))
    let reference = [
        (3.0, 1.0, 0.993_764_100_513_035_777_791_657_701_685_751),
        (1.5, 0.5, 0.453_025_237_725_791_393_462_932_675_287_677),
        (4.0, 0.2, 0.997_267_130_743_669_663_849_196_626_569_204),
        (2.25, 2.0, 0.969_219_910_148_676_254_897_640_788_581_866),
    ];
    let mut worst_rel = 0.0_f64;
    for (kappa, l, want) in reference {
        let b = BoundInputs {
            tau: 2.0 * kappa,
            sigma: 1.0,
            l,
            omega: 1.0,
            c_f_gamma: 0.0,
        };
        worst_rel = worst_rel.max((bound_gaussian_process(&b, false) / want - 1.0).abs());
    }

    let (alpha, sigma, m) = (0.6, 0.3, 25);
    let b = BoundInputs {
        tau: 2.0 * alpha,
        sigma,
        l: 1.0,
        omega: m as f64,
        c_f_gamma: 0.0,
    };
    let p = bound_white_noise(&b, true);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 100_000;
    let hits = (0..draws)
        .filter(|_| sup_norm(&white_noise(m, sigma, &mut rng)) <= alpha)
        .count();
    let freq = hits as f64 / draws as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    let z = (freq - p).abs() / se;
    outcome(
        worst_rel <= 1e-12 && z <= 3.0,
        format!("gp literal max rel err {worst_rel:.1e}; white corrected {p:.5} vs MC {freq:.5} ({z:.2} SE)"),
    )
}

fn min_max_min() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut violations = 0;
    for _ in 0..500 {
        let len = rng.random_range(3..=80);
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = Signal::from_values(values.clone()).unwrap();
        let d = diagram_interval(&s);
        let delta = separation_delta(&to_measure(&d, 0.0)).unwrap();
        let mut minima: Vec<usize> = d.points.iter().map(|p| p.birth_index).collect();
        minima.sort_unstable();
        for w in minima.windows(2) {
            let peak = values[w[0]..=w[1]].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if peak < values[w[0]].max(values[w[1]]) + 2.0 * delta - 1e-9 {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violating pairs in 500 signals"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("persistence oracle equivalence", persistence_oracle),
        ("circle homogeneity", circle_homogeneity),
        ("bottleneck stability", bottleneck_stability),
        ("noiseless estimator exactness", noiseless_exactness),
        ("bounded-noise estimator stability", n_stability),
        ("diagram realization round trip", realization_round_trip),
        ("interpolation error bound", interpolation_bound),
        ("odometric deviation bound", odometry_bound),
        ("split family auto estimate", split_family),
        ("benchmark trend", benchmark_trend),
        ("simulated odometry", simulated_odometry),
        ("bound evaluators", bound_evaluators),
        ("min-max-min separation", min_max_min),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {}: {} — {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
    }
    println!("{}/13 criteria passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

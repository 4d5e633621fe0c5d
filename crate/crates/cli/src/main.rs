use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use periodica::diagram::to_measure;
use periodica::estimators::{
    n_exact, n_hat_auto, n_hat_ball, n_hat_cluster, zero_crossings_estimate, EstimatorReport,
    Method,
};
use periodica::experiment::{
    odometry_pipeline, run_bench, simulate, ExperimentConfig, PipelineOptions, Profile,
    SimulateConfig,
};
use periodica::noise::{bound_gaussian_process, bound_white_noise, BoundInputs, BoundReport};
use periodica::odometry::DEFAULT_CIRCUMFERENCE;
use periodica::persistence::{diagram_circle, diagram_interval};
use periodica::signal::{detrend_median, Signal};
use periodica::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_INCONSISTENT: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Default median-filter window for detrending, in seconds.
const DETREND_WINDOW: f64 = 5.0;

#[derive(Parser, Debug)]
#[command(name = "periodica", version, about = "Period counting and odometry from persistence diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the persistence diagram of a signal.
    Persistence(PersistenceArgs),
    /// Estimate the number of periods in a signal.
    EstimateN(EstimateArgs),
    /// Extract one event per period and, given a reference, score it.
    Odometry(OdometryArgs),
    /// Run the synthetic benchmark described by a JSON config.
    Bench(BenchArgs),
    /// Evaluate the probability bounds for the ball estimator.
    Bound(BoundArgs),
    /// Write a synthetic noisy signal with its ground-truth reparametrization.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DomainArg {
    Interval,
    Circle,
}

#[derive(Args, Debug)]
struct PersistenceArgs {
    /// Signal CSV with header `t,value`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = DomainArg::Interval)]
    domain: DomainArg,
    /// Diagram JSON; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug)]
enum MethodArg {
    Auto,
    Exact,
    Ball(f64),
    Cluster(f64),
    ZeroCrossings(usize),
}

impl FromStr for MethodArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let tau = |p: Option<&str>| -> Result<f64, String> {
            let p = p.ok_or_else(|| format!("method `{name}` needs a scale, e.g. `{name}:0.1`"))?;
            match p.parse::<f64>() {
                Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
                _ => Err(format!("`{p}` is not a positive scale")),
            }
        };
        match name {
            "auto" | "exact" if param.is_some() => Err(format!("method `{name}` takes no parameter")),
            "auto" => Ok(Self::Auto),
            "exact" => Ok(Self::Exact),
            "ball" => tau(param).map(Self::Ball),
            "cluster" => tau(param).map(Self::Cluster),
            "zc" => {
                let p = param.ok_or("method `zc` needs crossings per period, e.g. `zc:2`")?;
                match p.parse::<usize>() {
                    Ok(k) if k > 0 => Ok(Self::ZeroCrossings(k)),
                    _ => Err(format!("`{p}` is not a positive integer")),
                }
            }
            _ => Err(format!(
                "unknown method `{name}`; expected auto, exact, ball:τ, cluster:τ or zc:k"
            )),
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// auto | exact | ball:τ | cluster:τ | zc:k
    #[arg(long, default_value = "auto")]
    method: MethodArg,
    /// Subtract a running median first; the window defaults to 5 s.
    #[arg(long, value_name = "SECONDS", num_args = 0..=1, default_missing_value = "5")]
    detrend: Option<f64>,
}

/// `auto` or a number.
#[derive(Clone, Copy, Debug)]
struct AutoOr<T>(Option<T>);

impl<T: FromStr> FromStr for AutoOr<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self(None));
        }
        s.parse()
            .map(|v| Self(Some(v)))
            .map_err(|_| format!("expected `auto` or a number, got `{s}`"))
    }
}

#[derive(Args, Debug)]
struct OdometryArgs {
    #[arg(long)]
    input: PathBuf,
    /// Period count, or `auto`.
    #[arg(long, default_value = "auto")]
    n: AutoOr<usize>,
    /// Prominence scale, or `auto`.
    #[arg(long, default_value = "auto")]
    tau: AutoOr<f64>,
    /// Distance travelled per period, in meters.
    #[arg(long, default_value_t = DEFAULT_CIRCUMFERENCE)]
    circumference: f64,
    /// Ground-truth displacement CSV (`t,value`, meters).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Median-filter window in seconds; 0 disables detrending.
    #[arg(long, default_value_t = DETREND_WINDOW)]
    detrend: f64,
    /// Report JSON; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Results CSV.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoundKind {
    Gp,
    White,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundKind,
    /// Shortcut for `τ / 2σ` (gp only); implies σ = 1.
    #[arg(long, conflicts_with_all = ["tau", "alpha"])]
    kappa: Option<f64>,
    /// Shortcut for `τ/2 − C/ω²` (white only).
    #[arg(long, conflicts_with_all = ["tau", "kappa", "c_f_gamma"])]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Noise length scale (gp).
    #[arg(long)]
    l: Option<f64>,
    /// Samples per unit time (white).
    #[arg(long)]
    omega: Option<f64>,
    /// Smoothness constant of the signal (white).
    #[arg(long, default_value_t = 0.0)]
    c_f_gamma: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Template id: f0..f4 or fr:<r>.
    #[arg(long, default_value = "f0")]
    template: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Noise length scale in seconds.
    #[arg(long, default_value_t = 0.05)]
    l: f64,
    /// Samples per second.
    #[arg(long, default_value_t = 1000.0)]
    omega: f64,
    /// Overridden by PERIODICA_SEED when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recording length in seconds.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    #[arg(long, value_enum, default_value_t = ProfileArg::Random)]
    profile: ProfileArg,
    /// Signal CSV; the reparametrization goes to `<stem>.gamma.json` beside it.
    #[arg(long)]
    output: PathBuf,
    /// Also write the displacement `C·γ` as a CSV.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CIRCUMFERENCE)]
    circumference: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Random,
    Drive,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Lib(Error::Input(format!("{}: {e}", path.display())))
}

fn read_signal(path: &Path) -> Result<Signal, Failure> {
    let f = File::open(path).map_err(|e| io_error(path, e))?;
    Signal::read_csv(f).map_err(|e| match e {
        Error::Input(m) => Failure::Lib(Error::Input(format!("{}: {m}", path.display()))),
        other => Failure::Lib(other),
    })
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| io_error(path, e))
}

fn emit_json<T: serde::Serialize>(value: &T, output: Option<&Path>) -> CmdResult {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    match output {
        Some(p) => {
            let mut f = create(p)?;
            writeln!(f, "{text}").map_err(|e| io_error(p, e))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("PERIODICA_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("PERIODICA_SEED=`{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn cmd_persistence(a: PersistenceArgs) -> CmdResult {
    let s = read_signal(&a.input)?;
    let d = match a.domain {
        DomainArg::Interval => diagram_interval(&s),
        DomainArg::Circle => diagram_circle(&s)?,
    };
    emit_json(&d, a.output.as_deref())
}

fn cmd_estimate_n(a: EstimateArgs) -> CmdResult {
    let mut s = read_signal(&a.input)?;
    if let Some(w) = a.detrend {
        s = detrend_median(&s, w)?;
    }
    let d = diagram_interval(&s);
    let report = match a.method {
        MethodArg::Auto => n_hat_auto(&d),
        MethodArg::Exact => EstimatorReport::plain(n_exact(&to_measure(&d, 0.0)), Method::Exact, None),
        MethodArg::Ball(t) => EstimatorReport::plain(n_hat_ball(&d, t), Method::Ball, Some(t)),
        MethodArg::Cluster(t) => EstimatorReport::plain(n_hat_cluster(&d, t), Method::Cluster, Some(t)),
        MethodArg::ZeroCrossings(k) => {
            EstimatorReport::plain(zero_crossings_estimate(&s, k)?, Method::ZeroCrossings, None)
        }
    };
    emit_json(&report, None)
}

fn cmd_odometry(a: OdometryArgs) -> CmdResult {
    let s = read_signal(&a.input)?;
    if !(a.circumference > 0.0) {
        return Err(usage("--circumference must be positive"));
    }
    if a.n.0 == Some(0) || a.tau.0.is_some_and(|t| !(t > 0.0)) {
        return Err(usage("--n and --tau must be positive"));
    }
    let reference = a.reference.as_deref().map(read_signal).transpose()?;
    let opts = PipelineOptions {
        n: a.n.0,
        tau: a.tau.0,
        detrend_window: (a.detrend > 0.0).then_some(a.detrend),
    };
    let report = odometry_pipeline(&s, &opts, reference.as_ref().map(|r| (r, a.circumference)))?;
    emit_json(&report, a.output.as_deref())
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.config).map_err(|e| io_error(&a.config, e))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Lib(Error::Input(format!("{}: {e}", a.config.display()))))?;
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    let result = run_bench(&cfg)?;
    result.write_csv(create(&a.output)?)?;
    Ok(())
}

fn cmd_bound(a: BoundArgs) -> CmdResult {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| usage(format!("missing required flag --{flag}")));
    let inputs = match a.kind {
        BoundKind::Gp => {
            if a.alpha.is_some() {
                return Err(usage("--alpha applies to --kind white"));
            }
            let l = need(a.l, "l")?;
            let (tau, sigma) = match a.kappa {
                Some(k) => (2.0 * k, 1.0),
                None => (need(a.tau, "tau (or --kappa)")?, need(a.sigma, "sigma")?),
            };
            BoundInputs {
                tau,
                sigma,
                l,
                omega: a.omega.unwrap_or(1.0),
                c_f_gamma: a.c_f_gamma,
            }
        }
        BoundKind::White => {
            if a.kappa.is_some() {
                return Err(usage("--kappa applies to --kind gp"));
            }
            let sigma = need(a.sigma, "sigma")?;
            let omega = need(a.omega, "omega")?;
            // with --alpha, fold it into τ so that τ/2 − C/ω² = α
            let (tau, c) = match a.alpha {
                Some(alpha) => (2.0 * alpha, 0.0),
                None => (need(a.tau, "tau (or --alpha)")?, a.c_f_gamma),
            };
            BoundInputs {
                tau,
                sigma,
                l: a.l.unwrap_or(1.0),
                omega,
                c_f_gamma: c,
            }
        }
    };
    if !(inputs.sigma >= 0.0 && inputs.l > 0.0 && inputs.omega > 0.0) {
        return Err(usage("sigma must be non-negative; l and omega positive"));
    }
    let eval = |corrected| match a.kind {
        BoundKind::Gp => bound_gaussian_process(&inputs, corrected),
        BoundKind::White => bound_white_noise(&inputs, corrected),
    };
    let report = BoundReport {
        literal: eval(false),
        corrected: eval(true),
        inputs,
    };
    emit_json(&report, None)
}

fn sidecar_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().unwrap_or_default().to_string_lossy();
    output.with_file_name(format!("{stem}.gamma.json"))
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let cfg = SimulateConfig {
        template: a.template,
        n: a.n,
        sigma: a.sigma,
        l: a.l,
        omega: a.omega,
        seed: env_seed()?.unwrap_or(a.seed),
        duration: a.duration,
        profile: match a.profile {
            ProfileArg::Random => Profile::Random,
            ProfileArg::Drive => Profile::Drive,
        },
    };
    let sim = simulate(&cfg)?;
    sim.signal.write_csv(create(&a.output)?)?;
    emit_json(&sim.sidecar, Some(&sidecar_path(&a.output)))?;
    if let Some(r) = &a.reference {
        sim.reference(a.circumference).write_csv(create(r)?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Persistence(a) => cmd_persistence(a),
        Command::EstimateN(a) => cmd_estimate_n(a),
        Command::Odometry(a) => cmd_odometry(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Inconsistent { .. } => EXIT_INCONSISTENT,
                _ => EXIT_INPUT,
            })
        }
    }
}

//! Command-line front end: argument parsing into a validated [`RunConfig`],
//! grid dispatch over a worker pool, and CSV reports.
//!
//! Exit codes: 0 all cases pass, 1 some case fails, 2 usage error,
//! 3 untestable cases under `--strict`, 4 output could not be written.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{
    sharpness_decay, verify_generalized, verify_kernel_lemma, verify_theorem, CaseStatus, VerificationReport,
};
use crate::kernel::{kernel_entry, Observable, QueueParams};
use crate::oracle::{rational_from_f64, uniformized_kernel, ExactConvolution};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_UNTESTABLE: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MMINF_OUT_DIR";

/// Version tag of the CSV layouts, echoed in the first comment line.
pub const CSV_SCHEMA: &str = "mminf-csv/1";

const DEFAULT_RHO: &str = "0.25,0.5,1,2,5,10";
const DEFAULT_P: &str = "0.05:0.95:0.05";

#[derive(Parser, Debug)]
#[command(name = "mminf", version, about = "M/M/inf kernel verification campaigns", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Subcommand, Debug)]
enum CommandArgs {
    /// Lower bound on the discrete Laplacian of log A_t f.
    VerifyTheorem {
        #[command(flatten)]
        grid: GridArgs,
        /// Observable: `table:0=1,4=2`, `indicator:0..3` (inclusive) or `const:1`. Repeatable.
        #[arg(long = "f")]
        f: Vec<String>,
        /// Add this many random finite-support observables drawn from `--seed`.
        #[arg(long)]
        random: Option<usize>,
        /// Largest support point of random observables.
        #[arg(long, default_value_t = 40)]
        random_max_point: u64,
    },
    /// Semi-ultra-log-convexity of the kernel rows.
    VerifyLemma {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Semi-ultra-log-convexity of B(k, a) * Poisson(b).
    VerifyGeneralized {
        #[arg(long, default_value = "0,0.25,0.5,0.75,0.9")]
        a: String,
        #[arg(long, default_value = "0,0.5,1,2,5")]
        b: String,
        #[arg(long, default_value_t = 20)]
        kmax: u64,
        #[arg(long, default_value_t = 40)]
        nmax: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Mehler kernel against the exact rational and uniformization oracles.
    OracleCheck {
        #[arg(long, default_value = "0.5,1,2,5")]
        rho: String,
        #[arg(long, default_value = "0.1,0.5,0.9")]
        p: String,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 10)]
        kmax: u64,
        #[arg(long, default_value_t = 20)]
        nmax: u64,
        /// Truncation level N of the uniformized generator.
        #[arg(long, default_value_t = 80)]
        truncation: usize,
        /// Absolute tolerance against uniformization.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Relative tolerance against the exact oracle.
        #[arg(long, default_value_t = 1e-12)]
        rel_tol: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Both sides of the bound as t grows.
    Sharpness {
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long = "f", default_value = "indicator:0..1")]
        f: String,
        #[arg(long, default_value_t = 1)]
        n: u64,
        #[arg(long, default_value = "1,2,4,8,16")]
        t: String,
        /// Both magnitudes must be below this at the last time.
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Lemma and theorem checks over one grid, in one CSV.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long = "f")]
        f: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Traffic intensities: `0.5,1,2` or `start:stop:step`.
    #[arg(long, default_value = DEFAULT_RHO)]
    rho: String,
    /// Survival probabilities p = exp(-mu t), each in (0, 1).
    #[arg(long, default_value = DEFAULT_P)]
    p: String,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 30)]
    kmax: u64,
    #[arg(long, default_value_t = 60)]
    nmax: u64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Certified tail mass discarded by windows, in (0, 1).
    #[arg(long, default_value_t = 1e-14)]
    deficit: f64,
    /// Output CSV path; defaults to `$MMINF_OUT_DIR/<command>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Exit 3 when any case is untestable at double precision.
    #[arg(long)]
    strict: bool,
}

/// `(rho, p)` pairs at a common service rate.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueGrid {
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: f64,
}

impl QueueGrid {
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.rho.iter().flat_map(|&r| self.p.iter().map(move |&p| (r, p))).collect()
    }
}

/// An observable with the spec string it was parsed from.
#[derive(Debug, Clone)]
pub struct NamedObservable {
    pub label: String,
    pub observable: Observable,
}

#[derive(Debug, Clone)]
pub enum Command {
    VerifyTheorem { grid: QueueGrid, observables: Vec<NamedObservable>, n_max: u64 },
    VerifyLemma { grid: QueueGrid, k_max: u64, n_max: u64 },
    VerifyGeneralized { a: Vec<f64>, b: Vec<f64>, k_max: u64, n_max: u64 },
    OracleCheck { grid: QueueGrid, k_max: u64, n_max: u64, truncation: usize, tol: f64, rel_tol: f64 },
    Sharpness { rho: f64, mu: f64, observable: NamedObservable, n: u64, times: Vec<f64>, delta: f64 },
    Sweep { grid: QueueGrid, observables: Vec<NamedObservable>, k_max: u64, n_max: u64 },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyTheorem { .. } => "verify-theorem",
            Command::VerifyLemma { .. } => "verify-lemma",
            Command::VerifyGeneralized { .. } => "verify-generalized",
            Command::OracleCheck { .. } => "oracle-check",
            Command::Sharpness { .. } => "sharpness",
            Command::Sweep { .. } => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub deficit: f64,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub strict: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Usage(_) => EXIT_USAGE as i32,
        }
    }

    pub fn print(&self) -> std::io::Result<()> {
        match self {
            CliError::Clap(e) => e.print(),
            CliError::Usage(msg) => {
                eprintln!("error: {msg}\n\nFor more information, try '--help'.");
                Ok(())
            }
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses a list `x,y,z` or an inclusive range `start:stop:step`.
pub fn parse_list(name: &str, spec: &str) -> Result<Vec<f64>, CliError> {
    let spec = spec.trim();
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(usage(format!("--{name}: range must be start:stop:step, got '{spec}'")));
        };
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| usage(format!("--{name}: '{s}' is not a number")))
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
            return Err(usage(format!("--{name}: malformed range '{spec}'")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as u64 + 1;
        if count > 1_000_000 {
            return Err(usage(format!("--{name}: range '{spec}' has too many points")));
        }
        // Snap to 12 decimals so 0.05:0.95:0.05 yields 0.15, not 0.15000000000000002.
        (0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("--{name}: '{s}' is not a number"))))
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(usage(format!("--{name}: grid must be a non-empty set of finite numbers")));
    }
    Ok(values)
}

/// Parses `table:0=1,4=2`, `indicator:lo..hi` (inclusive) or `const:c`.
pub fn parse_observable(spec: &str) -> Result<NamedObservable, CliError> {
    let bad = |why: String| usage(format!("--f '{spec}': {why}"));
    let (kind, body) = spec.split_once(':').ok_or_else(|| bad("expected <kind>:<body>".into()))?;
    let observable = match kind {
        "table" => {
            let mut points = Vec::new();
            for item in body.split(',') {
                let (n, v) = item.split_once('=').ok_or_else(|| bad(format!("entry '{item}' is not n=value")))?;
                let n = n.trim().parse::<u64>().map_err(|_| bad(format!("'{n}' is not a state")))?;
                let v = v.trim().parse::<f64>().map_err(|_| bad(format!("'{v}' is not a number")))?;
                points.push((n, v));
            }
            Observable::table(points)
        }
        "indicator" => {
            let (lo, hi) = body.split_once("..").ok_or_else(|| bad("expected lo..hi".into()))?;
            let lo = lo.trim().parse::<u64>().map_err(|_| bad(format!("'{lo}' is not a state")))?;
            let hi = hi.trim().parse::<u64>().map_err(|_| bad(format!("'{hi}' is not a state")))?;
            Observable::indicator(lo, hi)
        }
        "const" => {
            let c = body.trim().parse::<f64>().map_err(|_| bad(format!("'{body}' is not a number")))?;
            Observable::constant(c)
        }
        other => return Err(bad(format!("unknown kind '{other}'"))),
    }
    .map_err(|e| bad(e.to_string()))?;
    Ok(NamedObservable { label: spec.to_owned(), observable })
}

/// Random finite-support observables: support size uniform in `1..=6` over
/// `0..=max_point`, values uniform in `(0, 1]`, drawn from
/// `ChaCha8Rng::seed_from_u64(seed)`.
pub fn random_observables(count: usize, seed: u64, max_point: u64) -> Vec<NamedObservable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let size = rng.random_range(1..=6usize).min(max_point as usize + 1);
            let mut support: Vec<u64> = Vec::with_capacity(size);
            while support.len() < size {
                let n = rng.random_range(0..=max_point);
                if !support.contains(&n) {
                    support.push(n);
                }
            }
            support.sort_unstable();
            let mut label = String::from("table:");
            for (i, n) in support.iter().enumerate() {
                let v = 1.0 - rng.random::<f64>();
                if i > 0 {
                    label.push(',');
                }
                write!(label, "{n}={v}").expect("write to string");
            }
            parse_observable(&label).expect("generated observable parses")
        })
        .collect()
}

fn check_rho(values: &[f64]) -> Result<(), CliError> {
    match values.iter().find(|&&r| !(r > 0.0)) {
        Some(r) => Err(usage(format!("--rho: {r} is not positive"))),
        None => Ok(()),
    }
}

fn check_open_unit(name: &str, values: &[f64]) -> Result<(), CliError> {
    match values.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        Some(p) => Err(usage(format!("--{name}: {p} is outside (0, 1)"))),
        None => Ok(()),
    }
}

fn check_mu(mu: f64) -> Result<(), CliError> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(usage(format!("--mu: {mu} is not positive")));
    }
    Ok(())
}

fn queue_grid(args: &GridArgs) -> Result<QueueGrid, CliError> {
    let rho = parse_list("rho", &args.rho)?;
    let p = parse_list("p", &args.p)?;
    check_rho(&rho)?;
    check_open_unit("p", &p)?;
    check_mu(args.mu)?;
    Ok(QueueGrid { rho, p, mu: args.mu })
}

fn observables(specs: &[String]) -> Result<Vec<NamedObservable>, CliError> {
    specs.iter().map(|s| parse_observable(s)).collect()
}

fn with_common(command: Command, common: &CommonArgs) -> Result<RunConfig, CliError> {
    if !(common.deficit > 0.0 && common.deficit < 1.0) {
        return Err(usage(format!("--deficit: {} is outside (0, 1)", common.deficit)));
    }
    if common.jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    Ok(RunConfig {
        command,
        deficit: common.deficit,
        output: common.out.clone(),
        seed: common.seed,
        jobs: common.jobs,
        strict: common.strict,
    })
}

/// Parses and validates `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    match cli.command {
        CommandArgs::VerifyTheorem { grid, f, random, random_max_point } => {
            let queue = queue_grid(&grid)?;
            let mut obs = observables(&f)?;
            if let Some(count) = random {
                obs.extend(random_observables(count, grid.common.seed, random_max_point));
            }
            if obs.is_empty() {
                return Err(usage("verify-theorem needs at least one --f or --random"));
            }
            with_common(Command::VerifyTheorem { grid: queue, observables: obs, n_max: grid.nmax }, &grid.common)
        }
        CommandArgs::VerifyLemma { grid } => {
            let queue = queue_grid(&grid)?;
            with_common(Command::VerifyLemma { grid: queue, k_max: grid.kmax, n_max: grid.nmax }, &grid.common)
        }
        CommandArgs::VerifyGeneralized { a, b, kmax, nmax, common } => {
            let a = parse_list("a", &a)?;
            let b = parse_list("b", &b)?;
            if let Some(x) = a.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(usage(format!("--a: {x} is outside [0, 1]")));
            }
            if let Some(x) = b.iter().find(|x| !(**x >= 0.0)) {
                return Err(usage(format!("--b: {x} is negative")));
            }
            with_common(Command::VerifyGeneralized { a, b, k_max: kmax, n_max: nmax }, &common)
        }
        CommandArgs::OracleCheck { rho, p, mu, kmax, nmax, truncation, tol, rel_tol, common } => {
            let rho = parse_list("rho", &rho)?;
            let p = parse_list("p", &p)?;
            check_rho(&rho)?;
            check_open_unit("p", &p)?;
            check_mu(mu)?;
            if truncation < 1 {
                return Err(usage("--truncation must be at least 1"));
            }
            check_open_unit("tol", &[tol])?;
            check_open_unit("rel-tol", &[rel_tol])?;
            let grid = QueueGrid { rho, p, mu };
            with_common(Command::OracleCheck { grid, k_max: kmax, n_max: nmax, truncation, tol, rel_tol }, &common)
        }
        CommandArgs::Sharpness { rho, mu, f, n, t, delta, common } => {
            check_rho(&[rho])?;
            check_mu(mu)?;
            let times = parse_list("t", &t)?;
            if times.iter().any(|&x| !(x > 0.0)) || times.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(usage("--t must be positive and strictly increasing"));
            }
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            if !(delta > 0.0) {
                return Err(usage("--delta must be positive"));
            }
            let observable = parse_observable(&f)?;
            with_common(Command::Sharpness { rho, mu, observable, n, times, delta }, &common)
        }
        CommandArgs::Sweep { grid, f } => {
            let queue = queue_grid(&grid)?;
            let mut obs = observables(&f)?;
            if obs.is_empty() {
                obs.push(parse_observable("indicator:0..1")?);
            }
            with_common(
                Command::Sweep { grid: queue, observables: obs, k_max: grid.kmax, n_max: grid.nmax },
                &grid.common,
            )
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Compute(#[from] crate::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Rendered CSV plus its exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub csv: String,
    pub exit_code: u8,
    pub summary: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: u8,
    pub output: PathBuf,
    pub summary: String,
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn echo_list(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Deterministic description of a config; `--jobs` and `--out` are left out
/// because they do not affect the rows.
fn echo(config: &RunConfig) -> String {
    let mut s = format!("command={}", config.command.name());
    match &config.command {
        Command::VerifyTheorem { grid, observables, n_max } | Command::Sweep { grid, observables, n_max, .. } => {
            write!(s, " rho={} p={} mu={} nmax={n_max}", echo_list(&grid.rho), echo_list(&grid.p), grid.mu).ok();
            if let Command::Sweep { k_max, .. } = &config.command {
                write!(s, " kmax={k_max}").ok();
            }
            write!(s, " observables={}", observables.len()).ok();
        }
        Command::VerifyLemma { grid, k_max, n_max } => {
            write!(s, " rho={} p={} mu={} kmax={k_max} nmax={n_max}", echo_list(&grid.rho), echo_list(&grid.p), grid.mu)
                .ok();
        }
        Command::VerifyGeneralized { a, b, k_max, n_max } => {
            write!(s, " a={} b={} kmax={k_max} nmax={n_max}", echo_list(a), echo_list(b)).ok();
        }
        Command::OracleCheck { grid, k_max, n_max, truncation, tol, rel_tol } => {
            write!(
                s,
                " rho={} p={} mu={} kmax={k_max} nmax={n_max} truncation={truncation} tol={tol} rel_tol={rel_tol}",
                echo_list(&grid.rho),
                echo_list(&grid.p),
                grid.mu
            )
            .ok();
        }
        Command::Sharpness { rho, mu, observable, n, times, delta } => {
            write!(s, " rho={rho} mu={mu} f={} n={n} t={} delta={delta}", observable.label, echo_list(times)).ok();
        }
    }
    write!(s, " deficit={} seed={} strict={}", config.deficit, config.seed, config.strict).ok();
    s
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(header_line: String, writer: csv::Writer<Vec<u8>>) -> Result<String, RunError> {
    let body = writer.into_inner().map_err(|e| RunError::Csv(e.into_error().into()))?;
    Ok(header_line + &String::from_utf8(body).expect("csv output is utf-8"))
}

const VERIFY_HEADER: [&str; 11] =
    ["check", "rho", "p", "a", "b", "k", "n", "observable", "margin", "error_budget", "verdict"];

fn write_report(w: &mut csv::Writer<Vec<u8>>, check: &str, report: &VerificationReport) -> Result<(), RunError> {
    for c in &report.cases {
        w.write_record([
            check.to_owned(),
            fmt_opt(c.id.rho),
            fmt_opt(c.id.p),
            fmt_opt(c.id.a),
            fmt_opt(c.id.b),
            fmt_opt(c.id.k),
            c.id.n.to_string(),
            c.id.observable.clone().unwrap_or_default(),
            c.margin.to_string(),
            c.budget.to_string(),
            c.status.to_string(),
        ])?;
    }
    Ok(())
}

fn report_exit(reports: &[&VerificationReport], strict: bool) -> u8 {
    let fail = reports.iter().any(|r| r.count(CaseStatus::Fail) > 0);
    let untestable = reports.iter().any(|r| r.count(CaseStatus::Untestable) > 0);
    if fail {
        EXIT_FAIL
    } else if strict && untestable {
        EXIT_UNTESTABLE
    } else {
        EXIT_PASS
    }
}

fn summarize(label: &str, reports: &[&VerificationReport]) -> String {
    let count = |s| reports.iter().map(|r| r.count(s)).sum::<usize>();
    let worst = reports
        .iter()
        .filter_map(|r| r.worst_case())
        .min_by(|x, y| x.margin.total_cmp(&y.margin))
        .map(|c| format!("{:e} at {:?}", c.margin, c.id))
        .unwrap_or_else(|| "none".into());
    format!(
        "{label}: {} pass, {} fail, {} untestable; worst margin {worst}",
        count(CaseStatus::Pass),
        count(CaseStatus::Fail),
        count(CaseStatus::Untestable)
    )
}

fn params_for(rho: f64, mu: f64, p: f64) -> Result<(QueueParams, f64), crate::Error> {
    let params = QueueParams::from_rho(rho, mu)?;
    let t = params.time_for_p(p)?;
    Ok((params, t))
}

fn lemma_reports(config: &RunConfig, grid: &QueueGrid, k_max: u64, n_max: u64) -> Result<Vec<VerificationReport>, RunError> {
    grid.cells()
        .par_iter()
        .map(|&(rho, p)| {
            let (params, t) = params_for(rho, grid.mu, p)?;
            let mut report = verify_kernel_lemma(&params, t, k_max, n_max, config.deficit)?;
            // Label with the grid value rather than the recomputed e^{-mu t}.
            report.cases.iter_mut().for_each(|c| c.id.p = Some(p));
            Ok(report)
        })
        .collect()
}

fn theorem_reports(
    config: &RunConfig,
    grid: &QueueGrid,
    observables: &[NamedObservable],
    n_max: u64,
) -> Result<Vec<VerificationReport>, RunError> {
    let jobs: Vec<(f64, f64, &NamedObservable)> = grid
        .cells()
        .into_iter()
        .flat_map(|(rho, p)| observables.iter().map(move |o| (rho, p, o)))
        .collect();
    jobs.par_iter()
        .map(|&(rho, p, named)| {
            let (params, t) = params_for(rho, grid.mu, p)?;
            let mut report = verify_theorem(&params, t, &named.observable, n_max, config.deficit)?
                .with_observable_label(&named.label);
            report.cases.iter_mut().for_each(|c| c.id.p = Some(p));
            Ok(report)
        })
        .collect()
}

/// Maximum discrepancies of the Mehler row `k` against both oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub rho: f64,
    pub p: f64,
    pub k: u64,
    pub max_rel_exact: f64,
    pub max_abs_uniform: f64,
}

/// Compares Mehler entries for `k <= k_max`, `n <= n_max` at one grid cell.
pub fn oracle_rows(
    rho: f64,
    mu: f64,
    p: f64,
    k_max: u64,
    n_max: u64,
    truncation: usize,
    tol: f64,
) -> Result<Vec<OracleRow>, crate::Error> {
    let (params, t) = params_for(rho, mu, p)?;
    let uniform = uniformized_kernel(&params, t, truncation, tol)?;
    let a = rational_from_f64(params.p(t));
    let b = rational_from_f64(params.rho() * params.q(t));
    (0..=k_max)
        .map(|k| {
            let exact = ExactConvolution::new(k, &a, &b, n_max);
            let mut max_rel_exact = 0.0f64;
            let mut max_abs_uniform = 0.0f64;
            for n in 0..=n_max {
                let g = kernel_entry(&params, t, k, n)?;
                max_rel_exact = max_rel_exact.max((g.ln - exact.ln_mass(n)).exp_m1().abs());
                if (k as usize) < uniform.size() && (n as usize) < uniform.size() {
                    max_abs_uniform = max_abs_uniform.max((g.value() - uniform.get(k as usize, n as usize)).abs());
                }
            }
            Ok(OracleRow { rho, p, k, max_rel_exact, max_abs_uniform })
        })
        .collect()
}

/// Produces the CSV text and exit status without touching the filesystem.
pub fn render(config: &RunConfig) -> Result<Rendered, RunError> {
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(jobs) = config.jobs {
            builder = builder.num_threads(jobs);
        }
        builder.build().map_err(|e| RunError::Pool(e.to_string()))?
    };
    pool.install(|| render_in_pool(config))
}

fn render_in_pool(config: &RunConfig) -> Result<Rendered, RunError> {
    let header_line = format!("# {CSV_SCHEMA} mminf {} {}\n", env!("CARGO_PKG_VERSION"), echo(config));
    let mut w = csv_writer();
    let (exit_code, summary) = match &config.command {
        Command::VerifyLemma { grid, k_max, n_max } => {
            let reports = lemma_reports(config, grid, *k_max, *n_max)?;
            w.write_record(VERIFY_HEADER)?;
            for r in &reports {
                write_report(&mut w, "lemma", r)?;
            }
            let refs: Vec<&VerificationReport> = reports.iter().collect();
            (report_exit(&refs, config.strict), summarize("lemma", &refs))
        }
        Command::VerifyTheorem { grid, observables, n_max } => {
            let reports = theorem_reports(config, grid, observables, *n_max)?;
            w.write_record(VERIFY_HEADER)?;
            for r in &reports {
                write_report(&mut w, "theorem", r)?;
            }
            let refs: Vec<&VerificationReport> = reports.iter().collect();
            (report_exit(&refs, config.strict), summarize("theorem", &refs))
        }
        Command::Sweep { grid, observables, k_max, n_max } => {
            let lemma = lemma_reports(config, grid, *k_max, *n_max)?;
            let theorem = theorem_reports(config, grid, observables, *n_max)?;
            w.write_record(VERIFY_HEADER)?;
            for r in &lemma {
                write_report(&mut w, "lemma", r)?;
            }
            for r in &theorem {
                write_report(&mut w, "theorem", r)?;
            }
            let refs: Vec<&VerificationReport> = lemma.iter().chain(&theorem).collect();
            let summary = format!(
                "{}\n{}",
                summarize("lemma", &lemma.iter().collect::<Vec<_>>()),
                summarize("theorem", &theorem.iter().collect::<Vec<_>>())
            );
            (report_exit(&refs, config.strict), summary)
        }
        Command::VerifyGeneralized { a, b, k_max, n_max } => {
            let cells: Vec<(f64, f64)> = a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect();
            let results: Vec<Result<VerificationReport, crate::Error>> = cells
                .par_iter()
                .map(|&(x, y)| verify_generalized(x, y, *k_max, *n_max, config.deficit))
                .collect();
            w.write_record(VERIFY_HEADER)?;
            let mut reports = Vec::new();
            let mut degenerate = Vec::new();
            for ((x, y), result) in cells.iter().zip(results) {
                match result {
                    Ok(r) => {
                        write_report(&mut w, "generalized", &r)?;
                        reports.push(r);
                    }
                    Err(crate::Error::Degenerate(_)) => {
                        w.write_record([
                            "generalized", "", "", &x.to_string(), &y.to_string(), "", "", "", "", "", "degenerate",
                        ])?;
                        degenerate.push(format!("(a={x}, b={y})"));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let refs: Vec<&VerificationReport> = reports.iter().collect();
            let mut summary = summarize("generalized", &refs);
            if !degenerate.is_empty() {
                write!(summary, "; degenerate cells skipped: {}", degenerate.join(" ")).ok();
            }
            (report_exit(&refs, config.strict), summary)
        }
        Command::OracleCheck { grid, k_max, n_max, truncation, tol, rel_tol } => {
            let rows: Vec<Vec<OracleRow>> = grid
                .cells()
                .par_iter()
                .map(|&(rho, p)| oracle_rows(rho, grid.mu, p, *k_max, *n_max, *truncation, *tol * 0.1))
                .collect::<Result<_, _>>()?;
            w.write_record(["rho", "p", "k", "max_rel_exact", "max_abs_uniform", "rel_tol", "tol", "verdict"])?;
            let mut failures = 0usize;
            let (mut worst_rel, mut worst_abs) = (0.0f64, 0.0f64);
            for row in rows.iter().flatten() {
                let ok = row.max_rel_exact <= *rel_tol && row.max_abs_uniform <= *tol;
                failures += usize::from(!ok);
                worst_rel = worst_rel.max(row.max_rel_exact);
                worst_abs = worst_abs.max(row.max_abs_uniform);
                w.write_record([
                    row.rho.to_string(),
                    row.p.to_string(),
                    row.k.to_string(),
                    row.max_rel_exact.to_string(),
                    row.max_abs_uniform.to_string(),
                    rel_tol.to_string(),
                    tol.to_string(),
                    if ok { "pass" } else { "fail" }.to_owned(),
                ])?;
            }
            let summary = format!(
                "oracle-check: {failures} failing rows; max relative vs exact {worst_rel:e}, max absolute vs uniformization {worst_abs:e}"
            );
            (if failures > 0 { EXIT_FAIL } else { EXIT_PASS }, summary)
        }
        Command::Sharpness { rho, mu, observable, n, times, delta } => {
            let params = QueueParams::from_rho(*rho, *mu)?;
            let points = sharpness_decay(&params, &observable.observable, *n, times, config.deficit)?;
            w.write_record(["rho", "mu", "n", "observable", "t", "laplacian_abs", "bound_abs"])?;
            for pt in &points {
                w.write_record([
                    rho.to_string(),
                    mu.to_string(),
                    n.to_string(),
                    observable.label.clone(),
                    pt.t.to_string(),
                    pt.laplacian.to_string(),
                    pt.bound.to_string(),
                ])?;
            }
            let last = points.last().expect("non-empty time list");
            let ok = last.laplacian < *delta && last.bound < *delta;
            let summary = format!(
                "sharpness: at t={} |laplacian|={:e} |bound|={:e} (delta {delta:e})",
                last.t, last.laplacian, last.bound
            );
            (if ok { EXIT_PASS } else { EXIT_FAIL }, summary)
        }
    };
    Ok(Rendered { csv: finish(header_line, w)?, exit_code, summary })
}

/// Resolved output path: `--out`, else `$MMINF_OUT_DIR/<command>.csv`, else `./<command>.csv`.
pub fn output_path(config: &RunConfig) -> PathBuf {
    if let Some(path) = &config.output {
        return path.clone();
    }
    let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    dir.join(format!("{}.csv", config.command.name()))
}

pub fn run(config: &RunConfig) -> Result<Outcome, RunError> {
    let rendered = render(config)?;
    let path = output_path(config);
    std::fs::write(&path, rendered.csv.as_bytes()).map_err(|source| RunError::Io { path: path.clone(), source })?;
    Ok(Outcome { exit_code: rendered.exit_code, output: path, summary: rendered.summary })
}

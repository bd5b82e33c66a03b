//! Command-line front end. Every subcommand writes data only: CSV tables with
//! 17 significant digits, or JSON reports.
//!
//! Exit codes: 0 on success, 2 for invalid usage or parameters, 3 for a
//! numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite::nash_equilibrium;
use crate::infinite::{self, InfiniteParams};
use crate::model::{DecayKernel, GameParams, TimeGrid, VarianceFunction};
use crate::simulation;
use crate::threshold::{self, Which, SWEEP_COLUMNS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const THREADS_ENV: &str = "IMPACT_GAME_THREADS";

#[derive(Debug, Parser)]
#[command(name = "impact-game", version, about = "Equilibrium liquidation in the n-agent transient impact game")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-horizon equilibrium on the equidistant grid of [0, 1]; CSV with
    /// columns t, v, w, xi_1..xi_n.
    Equilibrium(EquilibriumArgs),
    /// Critical transaction-cost levels over a parameter grid; CSV.
    Thresholds(ThresholdArgs),
    /// Infinite-horizon equilibrium on the integer grid; JSON to stdout and
    /// the sequences as CSV to --out.
    Infinite(InfiniteArgs),
    /// Monte Carlo check of cost moments and the CARA identity for the
    /// equilibrium strategies; JSON.
    Montecarlo(MonteCarloArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    /// G(t) = exp(-rho t)
    Exp,
    /// G(t) = (1 + t)^(-p)
    Power,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Decay kernel
    #[arg(long, value_enum, default_value_t = KernelKind::Exp)]
    pub kernel: KernelKind,
    /// Impact decay rate of the exponential kernel, per unit time
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub rho: f64,
    /// Exponent of the power-law kernel (dimensionless)
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub p: f64,
}

impl KernelArgs {
    fn kernel(&self) -> Result<DecayKernel> {
        match self.kernel {
            KernelKind::Exp => DecayKernel::exponential(self.rho),
            KernelKind::Power => DecayKernel::power_law(self.p),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EquilibriumArgs {
    /// Number of agents
    #[arg(long = "n", default_value_t = 2)]
    pub agents: usize,
    /// Number of trading intervals; the grid has N + 1 trading times
    #[arg(long = "N", default_value_t = 100)]
    pub intervals: usize,
    /// Risk aversion, per unit of cost
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Quadratic transaction cost, cost per squared share
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Bachelier volatility, price per square-root time
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    /// Initial unaffected price
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub s0: f64,
    /// Comma-separated initial inventories in shares, one per agent [default: all 1]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub inventories: Option<Vec<f64>>,
    /// Output CSV file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    /// Numbers of agents: comma list and/or inclusive ranges a:b:step
    #[arg(long = "n", default_value = "2")]
    pub agents: String,
    /// Numbers of trading intervals: comma list and/or ranges a:b:step
    #[arg(long = "N", default_value = "500")]
    pub intervals: String,
    /// Risk aversions, per unit of cost: comma list and/or ranges a:b:step
    #[arg(long, default_value = "0")]
    pub gamma: String,
    /// Base vector whose oscillation is tracked
    #[arg(long, value_enum, default_value_t = WhichArg::V)]
    pub which: WhichArg,
    /// Bisection resolution in theta, cost per squared share
    #[arg(long, default_value_t = threshold::DEFAULT_RESOLUTION)]
    pub resolution: f64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Bachelier volatility, price per square-root time
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    /// Output CSV file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WhichArg {
    V,
    W,
}

impl From<WhichArg> for Which {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::V => Which::V,
            WhichArg::W => Which::W,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InfiniteArgs {
    /// Number of agents
    #[arg(long = "n", default_value_t = 2)]
    pub agents: usize,
    /// Risk aversion, per unit of cost; must be positive
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Bachelier volatility per unit time step; must be positive
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    /// Impact decay rate per unit time step
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub rho: f64,
    /// Quadratic transaction cost, cost per squared share [default: (n-1)/4]
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Comma-separated initial inventories in shares, one per agent [default: all 1]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub inventories: Option<Vec<f64>>,
    /// Largest discarded tail mass of each base sequence
    #[arg(long, default_value_t = infinite::DEFAULT_TAIL_BOUND)]
    pub eps: f64,
    /// Output CSV file for the sequences (k, v, w, xi_1..xi_n)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    /// Number of agents
    #[arg(long = "n", default_value_t = 2)]
    pub agents: usize,
    /// Number of trading intervals on [0, 1]
    #[arg(long = "N", default_value_t = 10)]
    pub intervals: usize,
    /// Risk aversion, per unit of cost
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Quadratic transaction cost, cost per squared share
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Bachelier volatility, price per square-root time
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    /// Initial unaffected price
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub s0: f64,
    /// Comma-separated initial inventories in shares, one per agent [default: all 1]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub inventories: Option<Vec<f64>>,
    /// Number of simulated price paths
    #[arg(long, default_value_t = 100_000)]
    pub count: u64,
    /// Generator seed; path k uses stream k
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Model(Error),
    Io(io::Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.into())
    }
}

/// Round-trip representation of a double.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses `a,b,c` where each item is a number or an inclusive range `a:b:step`.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("invalid number {t:?} in {s:?}"));
        match parts.as_slice() {
            [x] => out.push(num(x)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                    return Err(format!("range {item:?} needs a <= b and a positive step"));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|k| a + k as f64 * step));
            }
            _ => return Err(format!("cannot parse {item:?}; expected a number or a:b:step")),
        }
    }
    if out.is_empty() {
        return Err(format!("empty list {s:?}"));
    }
    Ok(out)
}

fn parse_counts(name: &str, s: &str) -> std::result::Result<Vec<usize>, String> {
    parse_list(s)?
        .into_iter()
        .map(|x| {
            if x >= 0.0 && x.fract() == 0.0 && x < 1e9 {
                Ok(x as usize)
            } else {
                Err(format!("--{name} expects nonnegative integers, got {x}"))
            }
        })
        .collect()
}

fn inventories_or_ones(inventories: &Option<Vec<f64>>, n: usize) -> Vec<f64> {
    inventories.clone().unwrap_or_else(|| vec![1.0; n])
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> io::Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn cmd_equilibrium(a: &EquilibriumArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let params = GameParams::new(
        a.agents,
        a.gamma,
        a.theta,
        a.kernel.kernel()?,
        VarianceFunction::bachelier(a.sigma)?,
        TimeGrid::equidistant(a.intervals, 1.0)?,
    )?
    .with_s0(a.s0)?;
    let inventories = inventories_or_ones(&a.inventories, a.agents);
    let eq = nash_equilibrium(&params, &inventories)?;
    writeln!(
        stderr,
        "foc_residual={:e} condition_v={:e} condition_w={:e}",
        eq.foc_residual, eq.condition_v, eq.condition_w
    )?;
    if eq.ill_conditioned() {
        writeln!(stderr, "warning: ill-conditioned system, results may be inaccurate")?;
    }

    let mut out = csv::Writer::from_writer(open_out(&a.out, stdout)?);
    let mut header = vec!["t".to_string(), "v".into(), "w".into()];
    header.extend((1..=a.agents).map(|i| format!("xi_{i}")));
    out.write_record(&header)?;
    for (k, t) in params.grid().times().iter().enumerate() {
        let mut row = vec![format_number(*t), format_number(eq.v[k]), format_number(eq.w[k])];
        row.extend(eq.strategies.iter().map(|s| format_number(s.trades[k])));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_thresholds(a: &ThresholdArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let ns = parse_counts("n", &a.agents).map_err(Failure::Usage)?;
    let intervals = parse_counts("N", &a.intervals).map_err(Failure::Usage)?;
    let gammas = parse_list(&a.gamma).map_err(Failure::Usage)?;
    if !(a.resolution > 0.0) {
        return Err(Error::invalid("resolution", "must be positive").into());
    }
    let kernel = a.kernel.kernel()?;
    let variance = VarianceFunction::bachelier(a.sigma)?;
    let points = threshold::grid(&ns, &intervals, &gammas);
    for p in &points {
        threshold::ThresholdProblem::new(p.n, p.intervals, p.gamma, kernel, variance.clone())?;
    }
    let rows = threshold::sweep(&points, a.which.into(), kernel, &variance, a.resolution);

    let mut out = csv::Writer::from_writer(open_out(&a.out, stdout)?);
    out.write_record(SWEEP_COLUMNS)?;
    let mut failed = None;
    for row in &rows {
        let p = row.point;
        let mut record = vec![p.n.to_string(), p.intervals.to_string(), format_number(p.gamma), row.which.to_string()];
        match &row.result {
            Ok(r) => {
                record.extend([
                    format_number(r.theta_star),
                    format_number(r.bracket.0),
                    format_number(r.bracket.1),
                    r.evaluations.to_string(),
                    r.converged.to_string(),
                ]);
                if !r.monotone {
                    writeln!(stderr, "warning: non-monotone bracket at n={} N={} gamma={}", p.n, p.intervals, p.gamma)?;
                }
            }
            Err(e) => {
                record.extend(["NaN".to_string(), "NaN".into(), "NaN".into(), "0".into(), "false".into()]);
                writeln!(stderr, "error at n={} N={} gamma={}: {e}", p.n, p.intervals, p.gamma)?;
                failed.get_or_insert_with(|| e.clone());
            }
        }
        out.write_record(&record)?;
    }
    out.flush()?;
    match failed {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct InfiniteReport<'a> {
    n: usize,
    rho: f64,
    gamma: f64,
    sigma: f64,
    theta: f64,
    theta_defaulted: bool,
    inventories: &'a [f64],
    alpha: f64,
    alpha_residual: f64,
    beta: f64,
    beta_residual: f64,
    truncation_len: usize,
    tail_mass_v: f64,
    tail_mass_w: f64,
    tail_bounds: &'a [f64],
}

fn cmd_infinite(a: &InfiniteArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    if !(a.gamma > 0.0) {
        return Err(Error::invalid("gamma", "the infinite-horizon game needs risk aversion gamma > 0").into());
    }
    let params = InfiniteParams::new(a.agents, a.rho, a.gamma, a.sigma)?;
    let theta = a.theta.unwrap_or_else(|| params.critical_theta());
    if a.theta.is_none() {
        writeln!(stderr, "theta set to (n-1)/4 = {theta}")?;
    }
    let inventories = inventories_or_ones(&a.inventories, a.agents);
    let eq = infinite::infinite_nash(&params, theta, &inventories, a.eps)?;

    let report = InfiniteReport {
        n: params.n,
        rho: params.rho,
        gamma: params.gamma,
        sigma: params.sigma,
        theta,
        theta_defaulted: a.theta.is_none(),
        inventories: &inventories,
        alpha: eq.alpha.value,
        alpha_residual: eq.alpha.residual,
        beta: eq.beta.value,
        beta_residual: eq.beta.residual,
        truncation_len: eq.len(),
        tail_mass_v: eq.v.tail_mass,
        tail_mass_w: eq.w.tail_mass,
        tail_bounds: &eq.tail_bounds,
    };
    serde_json::to_writer_pretty(&mut *stdout, &report)?;
    writeln!(stdout)?;

    if let Some(path) = &a.out {
        let mut out = csv::Writer::from_writer(io::BufWriter::new(File::create(path)?));
        let mut header = vec!["k".to_string(), "v".into(), "w".into()];
        header.extend((1..=a.agents).map(|i| format!("xi_{i}")));
        out.write_record(&header)?;
        for k in 0..eq.len() {
            let mut row = vec![k.to_string(), format_number(eq.v.values[k]), format_number(eq.w.values[k])];
            row.extend(eq.strategies.iter().map(|s| format_number(s[k])));
            out.write_record(&row)?;
        }
        out.flush()?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MonteCarloOutput<'a> {
    n: usize,
    intervals: usize,
    gamma: f64,
    theta: f64,
    kernel: DecayKernel,
    sigma: f64,
    s0: f64,
    inventories: &'a [f64],
    #[serde(flatten)]
    report: simulation::MonteCarloReport,
}

fn cmd_montecarlo(a: &MonteCarloArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<(), Failure> {
    if a.count == 0 {
        return Err(Error::invalid("count", "need at least one path").into());
    }
    let kernel = a.kernel.kernel()?;
    let params = GameParams::new(
        a.agents,
        a.gamma,
        a.theta,
        kernel,
        VarianceFunction::bachelier(a.sigma)?,
        TimeGrid::equidistant(a.intervals, 1.0)?,
    )?
    .with_s0(a.s0)?;
    let inventories = inventories_or_ones(&a.inventories, a.agents);
    let eq = nash_equilibrium(&params, &inventories)?;
    let report = simulation::validate(&params, &eq.strategies, a.count, a.seed)?;
    let output = MonteCarloOutput {
        n: a.agents,
        intervals: a.intervals,
        gamma: a.gamma,
        theta: a.theta,
        kernel,
        sigma: a.sigma,
        s0: a.s0,
        inventories: &inventories,
        report,
    };
    let mut out = open_out(&a.out, stdout)?;
    serde_json::to_writer_pretty(&mut out, &output)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn thread_pool() -> std::result::Result<Option<rayon::ThreadPool>, String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map(Some).map_err(|e| e.to_string())
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Equilibrium(a) => cmd_equilibrium(a, stdout, stderr),
        Command::Thresholds(a) => cmd_thresholds(a, stdout, stderr),
        Command::Infinite(a) => cmd_infinite(a, stdout, stderr),
        Command::Montecarlo(a) => cmd_montecarlo(a, stdout, stderr),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(pool) => pool,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let result = match &pool {
        Some(pool) => pool.install(|| dispatch(&cli, stdout, stderr)),
        None => dispatch(&cli, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Model(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

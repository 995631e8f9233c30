//! `entropic`: option pricing, path simulation, density evolution and
//! maxent fitting from the command line.
//!
//! Time is in years; rates and volatilities are annualized. Every command
//! prints one JSON line on stdout. Exit codes: 0 success, 2 invalid input,
//! 3 numerical failure, 4 unwritable output.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use entropic_core::dynamics::{sample_paths, terminal_distribution, MarketParams};
use entropic_core::fokker_planck::{evolve_forward, CoefficientField, DensityGrid, Grid};
use entropic_core::maxent::{fit_market, multipliers_from_market, DEFAULT_DUAL_TOL};
use entropic_core::pricing::{parity_check, price, Numerics, OptionSpec, PdeGridSpec};
use entropic_core::Error;
use serde_json::json;

pub mod config;

use config::{default_to, overlay, Checks, MethodArg, RunConfig, StyleArg};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_OUTPUT: i32 = 4;

/// Why a command stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Output(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Output(_) => EXIT_OUTPUT,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Output(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Argument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "entropic",
    version,
    about = "Maximum-entropy stock dynamics and European option pricing",
    long_about = "Maximum-entropy stock dynamics and European option pricing.\n\n\
        Time is measured in years; rates and volatilities are annualized.\n\
        Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 unwritable output."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price a European option and print a JSON record
    Price(PriceArgs),
    /// Price both legs with one method and report the put-call parity gap
    Parity(ParityArgs),
    /// Simulate log-price paths to a CSV file
    Simulate(SimulateArgs),
    /// Evolve a log-price density forward and write CSV snapshots
    Fpe(FpeArgs),
    /// Maxent multipliers for a return model over one step
    Maxent(MaxentArgs),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Echo the merged configuration to stderr
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ContractArgs {
    #[arg(long)]
    spot: Option<f64>,
    #[arg(long)]
    strike: Option<f64>,
    /// Annual risk-free rate
    #[arg(long)]
    rate: Option<f64>,
    /// Annual volatility
    #[arg(long)]
    vol: Option<f64>,
    /// Years to expiry
    #[arg(long)]
    expiry: Option<f64>,
    /// Physical drift; premiums do not depend on it
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Monte Carlo paths
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// PDE space points
    #[arg(long)]
    grid: Option<usize>,
    /// PDE time steps
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PriceArgs {
    #[arg(long, value_enum)]
    style: Option<StyleArg>,
    #[command(flatten)]
    contract: ContractArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ParityArgs {
    #[command(flatten)]
    contract: ContractArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[arg(long)]
    spot: Option<f64>,
    /// Annual drift of the price
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    vol: Option<f64>,
    /// Years simulated
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV file
    #[arg(long)]
    out: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FpeArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    vol: Option<f64>,
    #[arg(long)]
    spot: Option<f64>,
    /// Years to evolve
    #[arg(long)]
    t_final: Option<f64>,
    /// Space points
    #[arg(long)]
    grid: Option<usize>,
    /// Time steps; a multiple of the snapshot count
    #[arg(long)]
    steps: Option<usize>,
    /// Intermediate snapshots; k writes k + 1 files, 0 writes the terminal one
    #[arg(long)]
    snapshots: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct MaxentArgs {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    vol: Option<f64>,
    /// Step length in years
    #[arg(long)]
    dt: Option<f64>,
    /// Solve the dual numerically instead of using the closed form
    #[arg(long)]
    numeric: bool,
    /// Dual solver tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.exit_code()
        }
    }
}

fn dispatch(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let (common, cfg) = match &command {
        Command::Price(a) => (&a.common, resolve_price(a)?),
        Command::Parity(a) => (&a.common, resolve_contract(&a.contract, &a.common)?),
        Command::Simulate(a) => (&a.common, resolve_simulate(a)?),
        Command::Fpe(a) => (&a.common, resolve_fpe(a)?),
        Command::Maxent(a) => (&a.common, resolve_maxent(a)?),
    };
    if common.verbose {
        let text = serde_json::to_string(&cfg).expect("config serializes");
        let _ = writeln!(stderr, "config: {text}");
    }
    let line = match command {
        Command::Price(_) => cmd_price(&cfg)?,
        Command::Parity(_) => cmd_parity(&cfg)?,
        Command::Simulate(_) => cmd_simulate(&cfg)?,
        Command::Fpe(_) => cmd_fpe(&cfg)?,
        Command::Maxent(_) => cmd_maxent(&cfg)?,
    };
    writeln!(stdout, "{line}").map_err(|e| Failure::Output(format!("stdout: {e}")))
}

fn resolve_contract(a: &ContractArgs, common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    overlay(&mut cfg.spot, a.spot);
    overlay(&mut cfg.option.strike, a.strike);
    overlay(&mut cfg.option.expiry, a.expiry);
    overlay(&mut cfg.market.risk_free_rate, a.rate);
    overlay(&mut cfg.market.sigma, a.vol);
    overlay(&mut cfg.market.mu, a.mu);
    overlay(&mut cfg.method, a.method);
    overlay(&mut cfg.numerics.paths, a.paths);
    overlay(&mut cfg.numerics.seed, a.seed);
    overlay(&mut cfg.numerics.grid, a.grid);
    overlay(&mut cfg.numerics.steps, a.steps);
    if let Some(r) = cfg.market.risk_free_rate {
        default_to(&mut cfg.market.mu, r);
    }
    default_to(&mut cfg.method, MethodArg::Closed);
    let defaults = Numerics::default();
    match cfg.method {
        Some(MethodArg::Mc) => {
            default_to(&mut cfg.numerics.paths, defaults.mc_paths);
            default_to(&mut cfg.numerics.seed, defaults.seed);
        }
        Some(MethodArg::Pde) => {
            default_to(&mut cfg.numerics.grid, defaults.pde.n_space);
            default_to(&mut cfg.numerics.steps, defaults.pde.n_time);
        }
        _ => {}
    }
    Ok(cfg)
}

fn resolve_price(a: &PriceArgs) -> Result<RunConfig, Failure> {
    let mut cfg = resolve_contract(&a.contract, &a.common)?;
    overlay(&mut cfg.option.style, a.style);
    Ok(cfg)
}

fn resolve_simulate(a: &SimulateArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    overlay(&mut cfg.spot, a.spot);
    overlay(&mut cfg.market.mu, a.mu);
    overlay(&mut cfg.market.sigma, a.vol);
    overlay(&mut cfg.numerics.horizon, a.horizon);
    overlay(&mut cfg.numerics.steps, a.steps);
    overlay(&mut cfg.numerics.paths, a.paths);
    overlay(&mut cfg.numerics.seed, a.seed);
    if a.out.is_some() {
        cfg.output_path = a.out.clone();
    }
    default_to(&mut cfg.numerics.seed, Numerics::default().seed);
    Ok(cfg)
}

fn resolve_fpe(a: &FpeArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    overlay(&mut cfg.market.mu, a.mu);
    overlay(&mut cfg.market.sigma, a.vol);
    overlay(&mut cfg.spot, a.spot);
    overlay(&mut cfg.numerics.t_final, a.t_final);
    overlay(&mut cfg.numerics.grid, a.grid);
    overlay(&mut cfg.numerics.steps, a.steps);
    overlay(&mut cfg.numerics.snapshots, a.snapshots);
    if a.out.is_some() {
        cfg.output_path = a.out.clone();
    }
    default_to(&mut cfg.numerics.grid, 400);
    default_to(&mut cfg.numerics.steps, 2000);
    default_to(&mut cfg.numerics.snapshots, 4);
    Ok(cfg)
}

fn resolve_maxent(a: &MaxentArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    overlay(&mut cfg.market.mu, a.mu);
    overlay(&mut cfg.market.sigma, a.vol);
    overlay(&mut cfg.numerics.dt, a.dt);
    overlay(&mut cfg.numerics.tol, a.tol);
    if a.numeric {
        cfg.numerics.numeric = Some(true);
    }
    default_to(&mut cfg.numerics.numeric, false);
    if cfg.numerics.numeric == Some(true) {
        default_to(&mut cfg.numerics.tol, 1e-14);
    }
    Ok(cfg)
}

struct Contract {
    spot: f64,
    spec: OptionSpec,
    params: MarketParams,
    numerics: Numerics,
}

fn validate_contract(cfg: &RunConfig, style: StyleArg) -> Result<Contract, Failure> {
    let mut c = Checks::default();
    let spot = c.positive(cfg.spot, "--spot");
    let strike = c.non_negative(cfg.option.strike, "--strike");
    let expiry = c.positive(cfg.option.expiry, "--expiry");
    let rate = c.finite(cfg.market.risk_free_rate, "--rate");
    let sigma = c.positive(cfg.market.sigma, "--vol");
    let mu = c.finite(cfg.market.mu, "--mu");
    let mut numerics = Numerics::default();
    match cfg.method {
        Some(MethodArg::Mc) => {
            numerics.mc_paths = c.at_least(cfg.numerics.paths, 100, "--paths");
            numerics.seed = c.required(cfg.numerics.seed, "--seed").unwrap_or(0);
        }
        Some(MethodArg::Pde) => {
            numerics.pde = PdeGridSpec {
                n_space: c.at_least(cfg.numerics.grid, 16, "--grid"),
                n_time: c.at_least(cfg.numerics.steps, 1, "--steps"),
                ..PdeGridSpec::default()
            };
        }
        _ => {}
    }
    c.finish()?;
    Ok(Contract {
        spot,
        spec: OptionSpec::new(style.into(), strike, expiry)?,
        params: MarketParams::new(mu, sigma, rate)?,
        numerics,
    })
}

fn cmd_price(cfg: &RunConfig) -> Result<String, Failure> {
    let mut c = Checks::default();
    let style = c.required(cfg.option.style, "--style");
    let contract = validate_contract(cfg, style.unwrap_or(StyleArg::Call));
    c.finish()?;
    let k = contract?;
    let method = cfg.method.expect("defaulted").into();
    let r = price(method, k.spot, &k.spec, &k.params, &k.numerics)?;
    Ok(r.to_json_line())
}

fn cmd_parity(cfg: &RunConfig) -> Result<String, Failure> {
    let k = validate_contract(cfg, StyleArg::Call)?;
    let method = cfg.method.expect("defaulted").into();
    let r = parity_check(method, k.spot, &k.spec, &k.params, &k.numerics)?;
    Ok(json!({
        "method": r.method,
        "call": r.call.premium,
        "put": r.put.premium,
        "reference_spot": r.reference_spot,
        "gap": r.gap,
        "params": {
            "spot": k.spot,
            "strike": k.spec.strike,
            "expiry": k.spec.expiry,
            "risk_free_rate": k.params.risk_free_rate,
            "sigma": k.params.sigma,
            "mu": k.params.mu,
        },
    })
    .to_string())
}

fn create_file(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))
}

fn write_failed(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Output(format!("cannot write {}: {e}", path.display()))
}

fn cmd_simulate(cfg: &RunConfig) -> Result<String, Failure> {
    let mut c = Checks::default();
    let spot = c.positive(cfg.spot, "--spot");
    let mu = c.finite(cfg.market.mu, "--mu");
    let sigma = c.positive(cfg.market.sigma, "--vol");
    let horizon = c.positive(cfg.numerics.horizon, "--horizon");
    let steps = c.at_least(cfg.numerics.steps, 1, "--steps");
    let paths = c.at_least(cfg.numerics.paths, 1, "--paths");
    let seed = c.required(cfg.numerics.seed, "--seed").unwrap_or(0);
    let out = c.required(cfg.output_path.as_deref(), "--out");
    c.finish()?;
    let out = Path::new(out.expect("checked"));
    let params = MarketParams::new(mu, sigma, 0.0)?;
    let ensemble = sample_paths(&params, spot, horizon, steps, paths, seed)?;
    let file = create_file(out)?;
    ensemble.write_csv(file).map_err(write_failed(out))?;
    Ok(json!({
        "out": out.display().to_string(),
        "paths": paths,
        "steps": steps,
        "seed": seed,
    })
    .to_string())
}

/// Log-price domain holding the drifted density with 8 terminal standard
/// deviations to spare on each side.
fn fpe_grid(spot: f64, mu: f64, sigma: f64, t: f64, n: usize) -> Result<Grid, Error> {
    let x0 = spot.ln();
    let shift = (mu - 0.5 * sigma * sigma) * t;
    let half = 8.0 * sigma * t.sqrt();
    Grid::new(x0 + shift.min(0.0) - half, x0 + shift.max(0.0) + half, n)
}

fn cmd_fpe(cfg: &RunConfig) -> Result<String, Failure> {
    let mut c = Checks::default();
    let mu = c.finite(cfg.market.mu, "--mu");
    let sigma = c.positive(cfg.market.sigma, "--vol");
    let spot = c.positive(cfg.spot, "--spot");
    let t_final = c.positive(cfg.numerics.t_final, "--t-final");
    let n = c.at_least(cfg.numerics.grid, 16, "--grid");
    let steps = c.at_least(cfg.numerics.steps, 1, "--steps");
    let k = c
        .required(cfg.numerics.snapshots, "--snapshots")
        .unwrap_or(0);
    if k > 0 && steps % k != 0 {
        c.fail(
            "--steps",
            format!("must be a multiple of --snapshots ({steps} % {k} != 0)"),
        );
    }
    let out = c.required(cfg.output_path.as_deref(), "--out");
    c.finish()?;
    let dir = Path::new(out.expect("checked"));

    let grid = fpe_grid(spot, mu, sigma, t_final, n)?;
    let coeffs = CoefficientField::constant(mu, sigma);
    let mut density = DensityGrid::near_delta(grid, 0.0, spot.ln())?;
    let mut snapshots = Vec::new();
    if k > 0 {
        snapshots.push(density.clone());
        for i in 1..=k {
            let t = t_final * i as f64 / k as f64;
            density = evolve_forward(&density, &coeffs, t, steps / k)?;
            snapshots.push(density.clone());
        }
    } else {
        density = evolve_forward(&density, &coeffs, t_final, steps)?;
        snapshots.push(density.clone());
    }

    fs::create_dir_all(dir).map_err(write_failed(dir))?;
    let mut records = Vec::new();
    for (i, d) in snapshots.iter().enumerate() {
        let path = dir.join(format!("density_{i:03}.csv"));
        let file = create_file(&path)?;
        d.write_csv(file).map_err(write_failed(&path))?;
        records.push(json!({
            "file": path.display().to_string(),
            "time": d.time,
            "mass": d.mass(),
            "mean": d.mean(),
            "variance": d.variance(),
        }));
    }
    let law = terminal_distribution(&MarketParams::new(mu, sigma, 0.0)?, spot, t_final)?;
    let last = snapshots.last().expect("at least one snapshot");
    Ok(json!({
        "snapshots": records,
        "final": {
            "time": last.time,
            "mass": last.mass(),
            "min_value": last.min_value(),
            "l1_to_lognormal": last.l1_distance(|x| law.log_pdf(x)),
        },
    })
    .to_string())
}

fn cmd_maxent(cfg: &RunConfig) -> Result<String, Failure> {
    let mut c = Checks::default();
    let mu = c.finite(cfg.market.mu, "--mu");
    let sigma = c.positive(cfg.market.sigma, "--vol");
    let dt = c.positive(cfg.numerics.dt, "--dt");
    let numeric = cfg.numerics.numeric == Some(true);
    let tol = if numeric {
        c.positive(cfg.numerics.tol, "--tol")
    } else {
        DEFAULT_DUAL_TOL
    };
    c.finish()?;
    let params = MarketParams::new(mu, sigma, 0.0)?;
    if !numeric {
        let s = multipliers_from_market(&params, dt)?;
        return Ok(json!({
            "method": "closed_form",
            "alpha": s.alpha,
            "beta": s.beta,
            "mean_shift": s.mean_shift(),
            "variance": s.variance(),
        })
        .to_string());
    }
    let fit = fit_market(&params, dt, tol)?;
    let s = fit.solution;
    Ok(json!({
        "method": "numeric",
        "alpha": s.alpha,
        "beta": s.beta,
        "mean_shift": s.mean_shift(),
        "variance": s.variance(),
        "iterations": fit.iterations,
        "residual": fit.residual,
    })
    .to_string())
}

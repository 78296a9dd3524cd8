//! Command-line front end for the one-bit metasurface receiver simulator.
//!
//! Subcommands either sweep one axis (`sweep-snr`, `sweep-microstrips`,
//! `sweep-elements`) and emit CSV, evaluate a single operating point
//! (`single`), or print the front-end power model (`power`). Every option can
//! also come from a `key=value` config file; explicit flags win over the
//! file, which wins over the built-in defaults.
//!
//! Exit codes: 0 on success (including `--help`), 1 for invalid arguments or
//! configuration, 2 for runtime failures.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dma_rx::optimizer::{OptimizerConfig, SolverKind};
use dma_rx::power::PowerModelParams;
use dma_rx::signal::{SystemDims, DEFAULT_BETA_DE};
use dma_rx::sweep::{emit_csv, run_sweep, Arm, SweepAxis, SweepRow, SweepSpec};

#[derive(Parser)]
#[command(
    name = "dma-rx",
    version,
    about = "Simulate multi-user uplinks through a one-bit metasurface receiver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the SNR axis and emit CSV.
    SweepSnr(CommonOpts),
    /// Sweep the number of microstrips and emit CSV.
    SweepMicrostrips(CommonOpts),
    /// Sweep the elements per microstrip and emit CSV.
    SweepElements(CommonOpts),
    /// Evaluate one operating point and print a per-arm summary.
    Single(CommonOpts),
    /// Print the front-end power model for a configuration.
    Power(CommonOpts),
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Number of users.
    #[arg(long = "k")]
    users: Option<usize>,
    /// Number of microstrips.
    #[arg(long = "nd")]
    microstrips: Option<usize>,
    /// Elements per microstrip.
    #[arg(long = "ne")]
    elements: Option<usize>,
    /// SNR in dB.
    #[arg(long = "rho-db", allow_hyphen_values = true)]
    rho_db: Option<f64>,
    /// Trials per point and arm.
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed for all trial streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Phase solver for metasurface arms: sdr, closed-form, or random.
    #[arg(long)]
    solver: Option<String>,
    /// Comma-separated arms: dma-sdr, dma-closed-form, dma-random,
    /// fd-baseline, dma (shorthand for the selected solver), or all.
    #[arg(long)]
    arms: Option<String>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Electrical length per element spacing (radians).
    #[arg(long = "beta-de")]
    beta_de: Option<f64>,
    /// One-bit quantizer output power.
    #[arg(long)]
    eta: Option<f64>,
    /// Comma-separated axis values overriding the default grid.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Worker threads for the sweep (default: one per CPU).
    #[arg(long)]
    workers: Option<usize>,
    /// key=value config file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    /// Bad flags or configuration: exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Failure while running: exit code 2.
    #[error("{0}")]
    Runtime(String),
}

impl From<dma_rx::DmaError> for CliError {
    fn from(err: dma_rx::DmaError) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

/// Fully resolved options after merging flags, config file, and defaults.
struct Settings {
    users: usize,
    microstrips: usize,
    elements: usize,
    rho_db: f64,
    trials: usize,
    seed: u64,
    arms: Vec<Arm>,
    out: Option<PathBuf>,
    beta_de: f64,
    eta: f64,
    grid: Option<Vec<f64>>,
    workers: Option<usize>,
}

fn parse_config_file(path: &PathBuf) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config {} line {}: expected key=value, got {line:?}",
                path.display(),
                lineno + 1
            )));
        };
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

fn file_value<'a>(file: &'a [(String, String)], key: &str) -> Option<&'a str> {
    // Last occurrence wins, like flags repeated on a command line.
    file.iter()
        .rev()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

fn parsed<T: std::str::FromStr>(
    file: &[(String, String)],
    key: &str,
) -> Result<Option<T>, CliError> {
    match file_value(file, key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("config value {key}={raw} cannot be parsed"))),
    }
}

fn parse_solver(name: &str) -> Result<SolverKind, CliError> {
    match name {
        "sdr" => Ok(SolverKind::Sdr),
        "closed-form" => Ok(SolverKind::ClosedForm),
        "random" => Ok(SolverKind::Random),
        other => Err(CliError::Usage(format!(
            "unknown solver {other:?}; expected sdr, closed-form, or random"
        ))),
    }
}

fn solver_arm(solver: SolverKind) -> Arm {
    match solver {
        SolverKind::Sdr => Arm::DmaSdr,
        SolverKind::ClosedForm => Arm::DmaClosedForm,
        SolverKind::Random => Arm::DmaRandom,
    }
}

fn parse_arms(list: &str, solver: SolverKind) -> Result<Vec<Arm>, CliError> {
    let mut arms = Vec::new();
    for token in list.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        match token {
            "all" => arms.extend(Arm::ALL),
            "dma" => arms.push(solver_arm(solver)),
            other => match Arm::from_label(other) {
                Some(arm) => arms.push(arm),
                None => {
                    return Err(CliError::Usage(format!(
                        "unknown arm {other:?}; expected dma-sdr, dma-closed-form, \
                         dma-random, fd-baseline, dma, or all"
                    )))
                }
            },
        }
    }
    if arms.is_empty() {
        return Err(CliError::Usage("no arms selected".into()));
    }
    Ok(arms)
}

fn parse_grid(raw: &str) -> Result<Vec<f64>, CliError> {
    let mut values = Vec::new();
    for token in raw.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        let value: f64 = token
            .parse()
            .map_err(|_| CliError::Usage(format!("grid value {token:?} is not a number")))?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliError::Usage("grid has no values".into()));
    }
    Ok(values)
}

fn resolve(opts: &CommonOpts) -> Result<Settings, CliError> {
    let file = match &opts.config {
        Some(path) => parse_config_file(path)?,
        None => Vec::new(),
    };

    let users = opts.users.or(parsed(&file, "k")?).unwrap_or(2);
    let microstrips = opts.microstrips.or(parsed(&file, "nd")?).unwrap_or(5);
    let elements = opts.elements.or(parsed(&file, "ne")?).unwrap_or(10);
    let rho_db = opts.rho_db.or(parsed(&file, "rho-db")?).unwrap_or(10.0);
    let trials = opts.trials.or(parsed(&file, "trials")?).unwrap_or(200);
    let seed = opts.seed.or(parsed(&file, "seed")?).unwrap_or(1);
    let beta_de = opts
        .beta_de
        .or(parsed(&file, "beta-de")?)
        .unwrap_or(DEFAULT_BETA_DE);
    let eta = opts.eta.or(parsed(&file, "eta")?).unwrap_or(1.0);
    let workers = opts.workers.or(parsed(&file, "workers")?);

    let solver_name: Option<String> = opts.solver.clone().or(parsed::<String>(&file, "solver")?);
    let solver = match solver_name {
        Some(name) => parse_solver(&name)?,
        None => SolverKind::Sdr,
    };

    let arms_raw: Option<String> = opts.arms.clone().or(parsed::<String>(&file, "arms")?);
    let arms = match arms_raw {
        Some(list) => parse_arms(&list, solver)?,
        None => Arm::ALL.to_vec(),
    };

    let grid_raw: Option<String> = opts.grid.clone().or(parsed::<String>(&file, "grid")?);
    let grid = match grid_raw {
        Some(raw) => Some(parse_grid(&raw)?),
        None => None,
    };

    let out: Option<PathBuf> = opts.out.clone().or(parsed::<PathBuf>(&file, "out")?);

    if users == 0 || microstrips == 0 || elements == 0 {
        return Err(CliError::Usage(
            "k, nd, and ne must all be at least 1".into(),
        ));
    }
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    if let Some(0) = workers {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }

    Ok(Settings {
        users,
        microstrips,
        elements,
        rho_db,
        trials,
        seed,
        arms,
        out,
        beta_de,
        eta,
        grid,
        workers,
    })
}

fn default_grid(axis: SweepAxis, settings: &Settings) -> Vec<f64> {
    match axis {
        SweepAxis::SnrDb => (-2..=5).map(|step| (step * 5) as f64).collect(),
        SweepAxis::Microstrips => (1..=5)
            .map(|multiple| (multiple * settings.users) as f64)
            .collect(),
        SweepAxis::ElementsPerStrip => (0..7).map(|step| (20 + 40 * step) as f64).collect(),
    }
}

fn build_spec(axis: SweepAxis, settings: &Settings) -> Result<SweepSpec<f64>, CliError> {
    let values = settings
        .grid
        .clone()
        .unwrap_or_else(|| default_grid(axis, settings));
    if matches!(axis, SweepAxis::Microstrips | SweepAxis::ElementsPerStrip) {
        for &value in &values {
            if !value.is_finite() || value < 1.0 || value.fract() != 0.0 {
                return Err(CliError::Usage(format!(
                    "grid value {value} is not a positive integer"
                )));
            }
        }
    }
    let mut spec = SweepSpec::new(axis, values);
    spec.users = settings.users;
    spec.microstrips = settings.microstrips;
    spec.elements_per_strip = settings.elements;
    spec.snr_db = settings.rho_db;
    spec.eta = settings.eta;
    spec.beta_de = settings.beta_de;
    spec.trials = settings.trials;
    spec.master_seed = settings.seed;
    spec.arms = settings.arms.clone();
    spec.optimizer = OptimizerConfig::default();
    spec.power = PowerModelParams::default();
    Ok(spec)
}

fn run_spec(spec: &SweepSpec<f64>, workers: Option<usize>) -> Result<Vec<SweepRow<f64>>, CliError> {
    match workers {
        None => Ok(run_sweep(spec)?),
        Some(count) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(count)
                .build()
                .map_err(|e| CliError::Runtime(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(|| run_sweep(spec))?)
        }
    }
}

fn write_csv(
    spec: &SweepSpec<f64>,
    rows: &[SweepRow<f64>],
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file = fs::File::create(path)?;
            let mut writer = std::io::BufWriter::new(file);
            emit_csv(spec, rows, &mut writer)?;
            writer.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit_csv(spec, rows, &mut lock)?;
        }
    }
    Ok(())
}

fn cmd_sweep(axis: SweepAxis, opts: &CommonOpts) -> Result<(), CliError> {
    let settings = resolve(opts)?;
    let spec = build_spec(axis, &settings)?;
    let rows = run_spec(&spec, settings.workers)?;
    write_csv(&spec, &rows, &settings.out)
}

fn cmd_single(opts: &CommonOpts) -> Result<(), CliError> {
    let mut settings = resolve(opts)?;
    settings.grid = Some(vec![settings.rho_db]);
    let workers = settings.workers;
    let out = settings.out.clone();
    let spec = build_spec(SweepAxis::SnrDb, &settings)?;
    let rows = run_spec(&spec, workers)?;
    println!(
        "operating point: k={} nd={} ne={} rho_db={} trials={} seed={}",
        spec.users,
        spec.microstrips,
        spec.elements_per_strip,
        spec.snr_db,
        spec.trials,
        spec.master_seed
    );
    println!(
        "{:<16} {:>7} {:>12} {:>12} {:>10} {:>14} {:>11} {:>9}",
        "arm",
        "trials",
        "mean_rate",
        "std_rate",
        "power_w",
        "rate_per_watt",
        "mean_iters",
        "failures"
    );
    for row in &rows {
        println!(
            "{:<16} {:>7} {:>12.6} {:>12.6} {:>10.4} {:>14.4} {:>11.2} {:>9}",
            row.arm.label(),
            row.trials,
            row.mean_rate,
            row.std_rate,
            row.power_w,
            row.rate_per_watt,
            row.mean_iterations,
            row.failures
        );
    }
    if out.is_some() {
        write_csv(&spec, &rows, &out)?;
    }
    Ok(())
}

fn cmd_power(opts: &CommonOpts) -> Result<(), CliError> {
    let settings = resolve(opts)?;
    let dims = SystemDims::new(settings.users, settings.microstrips, settings.elements)?;
    let params = PowerModelParams::<f64>::default();
    let dma = params.dma_front_end_power_w(&dims);
    let fd = params.fully_digital_power_w(dims.rf_chains);
    println!(
        "configuration: k={} nd={} ne={} elements={}",
        dims.users,
        dims.microstrips,
        dims.elements_per_strip,
        dims.elements()
    );
    println!("dma_front_end_w: {dma:.6}");
    println!("fully_digital_w: {fd:.6}");
    println!("fd_over_dma: {:.4}", fd / dma);
    println!("dma_fraction: {:.6}", dma / fd);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::SweepSnr(opts) => cmd_sweep(SweepAxis::SnrDb, opts),
        Command::SweepMicrostrips(opts) => cmd_sweep(SweepAxis::Microstrips, opts),
        Command::SweepElements(opts) => cmd_sweep(SweepAxis::ElementsPerStrip, opts),
        Command::Single(opts) => cmd_single(opts),
        Command::Power(opts) => cmd_power(opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

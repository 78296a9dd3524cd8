//! Monte-Carlo sweeps over operating points with reproducible seeding and
//! worker-count-independent output.
//!
//! A sweep fixes a base configuration, varies one axis (SNR, microstrip
//! count, or elements per strip), and runs several independent trials of each
//! receiver arm at every point. Every trial derives its own seed from the
//! master seed and its `(point, arm, trial)` coordinates, so results do not
//! depend on scheduling: trials run in parallel but are collected
//! positionally and reduced in a fixed order, making the emitted CSV
//! byte-identical for any number of worker threads.

use crate::combining::fd_baseline_rate;
use crate::error::DmaError;
use crate::optimizer::{optimize_analog, OptimizerConfig, SolverKind};
use crate::power::PowerModelParams;
use crate::scalar::RealScalar;
use crate::signal::{generate_channel, MicrostripGeometry, Scenario, SystemDims, DEFAULT_BETA_DE};
use crate::Result;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// Column header of the emitted CSV.
pub const CSV_HEADER: &str = "axis_name,axis_value,arm,trials,mean_rate_bpshz,\
std_rate_bpshz,power_w,rate_per_watt,mean_iters,failures";

/// Receiver arm evaluated at each operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arm {
    /// Metasurface receiver tuned by the relaxation solver.
    DmaSdr,
    /// Metasurface receiver tuned by the eigenvector heuristic.
    DmaClosedForm,
    /// Metasurface receiver left at its random initialization.
    DmaRandom,
    /// Fully digital unquantized baseline with one chain per user.
    FdBaseline,
}

impl Arm {
    /// Every arm, in output order.
    pub const ALL: [Arm; 4] = [
        Arm::DmaSdr,
        Arm::DmaClosedForm,
        Arm::DmaRandom,
        Arm::FdBaseline,
    ];

    /// Stable label used in CSV output and on the command line.
    pub fn label(self) -> &'static str {
        match self {
            Arm::DmaSdr => "dma-sdr",
            Arm::DmaClosedForm => "dma-closed-form",
            Arm::DmaRandom => "dma-random",
            Arm::FdBaseline => "fd-baseline",
        }
    }

    /// Parses a label produced by [`Arm::label`].
    pub fn from_label(label: &str) -> Option<Arm> {
        Arm::ALL.into_iter().find(|arm| arm.label() == label)
    }

    /// Phase solver behind a metasurface arm; `None` for the baseline.
    fn solver(self) -> Option<SolverKind> {
        match self {
            Arm::DmaSdr => Some(SolverKind::Sdr),
            Arm::DmaClosedForm => Some(SolverKind::ClosedForm),
            Arm::DmaRandom => Some(SolverKind::Random),
            Arm::FdBaseline => None,
        }
    }
}

/// Which base parameter the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Signal-to-noise ratio in decibels.
    SnrDb,
    /// Number of microstrips.
    Microstrips,
    /// Number of elements per microstrip.
    ElementsPerStrip,
}

impl SweepAxis {
    /// Name written to the CSV's `axis_name` column.
    pub fn column_name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "rho_db",
            SweepAxis::Microstrips => "n_d",
            SweepAxis::ElementsPerStrip => "n_e",
        }
    }
}

/// Full description of one sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec<T: RealScalar> {
    /// The varied parameter.
    pub axis: SweepAxis,
    /// Axis values, evaluated in the given order. Count axes require
    /// positive integers.
    pub values: Vec<f64>,
    /// Number of users.
    pub users: usize,
    /// Base microstrip count (overridden on the `Microstrips` axis).
    pub microstrips: usize,
    /// Base elements per strip (overridden on the `ElementsPerStrip` axis).
    pub elements_per_strip: usize,
    /// Base SNR in dB (overridden on the `SnrDb` axis).
    pub snr_db: f64,
    /// One-bit quantizer output power.
    pub eta: f64,
    /// Electrical length per element spacing.
    pub beta_de: f64,
    /// Trials per point and arm.
    pub trials: usize,
    /// Master seed all trial seeds derive from.
    pub master_seed: u64,
    /// Arms to evaluate; duplicates are dropped and output order is fixed.
    pub arms: Vec<Arm>,
    /// Optimizer settings shared by the metasurface arms (the per-arm solver
    /// and per-trial seed are filled in by the sweep).
    pub optimizer: OptimizerConfig<T>,
    /// Power model used for the efficiency columns.
    pub power: PowerModelParams<T>,
}

impl<T: RealScalar> SweepSpec<T> {
    /// A spec with library defaults: two users, five strips of ten elements,
    /// 10 dB SNR, 200 trials, every arm.
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Self {
        Self {
            axis,
            values,
            users: 2,
            microstrips: 5,
            elements_per_strip: 10,
            snr_db: 10.0,
            eta: 1.0,
            beta_de: DEFAULT_BETA_DE,
            trials: 200,
            master_seed: 1,
            arms: Arm::ALL.to_vec(),
            optimizer: OptimizerConfig::default(),
            power: PowerModelParams::default(),
        }
    }

    fn count_value(value: f64) -> Result<usize> {
        if !value.is_finite() || value < 1.0 || value.fract() != 0.0 {
            return Err(DmaError::InvalidConfig(format!(
                "count axis values must be positive integers, got {value}"
            )));
        }
        Ok(value as usize)
    }

    /// Scenario at one axis value.
    pub fn scenario_at(&self, axis_value: f64) -> Result<Scenario<T>> {
        let users = self.users;
        let mut microstrips = self.microstrips;
        let mut elements = self.elements_per_strip;
        let mut snr_db = self.snr_db;
        match self.axis {
            SweepAxis::SnrDb => {
                if !axis_value.is_finite() {
                    return Err(DmaError::InvalidConfig(format!(
                        "SNR values must be finite, got {axis_value}"
                    )));
                }
                snr_db = axis_value;
            }
            SweepAxis::Microstrips => microstrips = Self::count_value(axis_value)?,
            SweepAxis::ElementsPerStrip => elements = Self::count_value(axis_value)?,
        }
        let dims = SystemDims::new(users, microstrips, elements)?;
        let geometry = MicrostripGeometry::uniform(&dims, T::of(self.beta_de))?;
        Scenario::from_snr_db(dims, snr_db)?
            .with_eta(T::of(self.eta))?
            .with_geometry(geometry)
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(DmaError::InvalidConfig("sweep has no axis values".into()));
        }
        if self.trials == 0 {
            return Err(DmaError::InvalidConfig(
                "at least one trial per point is required".into(),
            ));
        }
        if self.arms.is_empty() {
            return Err(DmaError::InvalidConfig("no arms selected".into()));
        }
        for &value in &self.values {
            self.scenario_at(value)?;
        }
        Ok(())
    }
}

/// One Monte-Carlo trial's results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome<T: RealScalar> {
    /// Achieved sum rate in bit/s/Hz.
    pub rate: T,
    /// Outer iterations spent (zero for the baseline and the random arm).
    pub iterations: usize,
}

/// SplitMix64 finalizer used to decorrelate derived seeds.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of one trial, derived from the master seed and the trial's
/// coordinates. Part of the reproducibility contract: the same master seed
/// and coordinates always map to the same trial.
pub fn derive_seed(master_seed: u64, point: usize, arm: Arm, trial: usize) -> u64 {
    let mut s = splitmix64(master_seed ^ 0xd6e8_feb8_6659_fd93);
    s = splitmix64(s ^ (point as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    s = splitmix64(s ^ ((arm as u64) + 1).wrapping_mul(0xbf58_476d_1ce4_e5b9));
    s = splitmix64(s ^ (trial as u64).wrapping_mul(0x94d0_49bb_1331_11eb));
    s
}

/// Runs one trial: draws the channel (or baseline channel) from the trial
/// seed and evaluates the arm. Metasurface arms consume one extra word from
/// the trial stream to seed the optimizer's initialization.
pub fn run_trial<T: RealScalar>(
    spec: &SweepSpec<T>,
    axis_value: f64,
    arm: Arm,
    seed: u64,
) -> Result<TrialOutcome<T>> {
    let scenario = spec.scenario_at(axis_value)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match arm.solver() {
        None => {
            let rate = fd_baseline_rate::<T, _>(scenario.dims.users, scenario.rho, &mut rng);
            Ok(TrialOutcome {
                rate,
                iterations: 0,
            })
        }
        Some(solver) => {
            let h = generate_channel::<T, _>(&scenario.dims, &mut rng);
            let mut config = spec.optimizer.clone();
            config.solver = solver;
            config.seed = rng.next_u64();
            let outcome = optimize_analog(&h, &scenario, &config)?;
            Ok(TrialOutcome {
                rate: outcome.report.sum_rate,
                iterations: outcome.outer_iterations,
            })
        }
    }
}

/// Aggregated results of one `(point, arm)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T: RealScalar> {
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub arm: Arm,
    /// Successful trials behind the statistics.
    pub trials: usize,
    pub mean_rate: T,
    /// Sample standard deviation across successful trials (zero when fewer
    /// than two).
    pub std_rate: T,
    /// Front-end power of this arm at this point, in watts.
    pub power_w: T,
    /// Mean rate per watt of front-end power.
    pub rate_per_watt: T,
    /// Mean outer iterations across successful trials.
    pub mean_iterations: f64,
    /// Trials that returned an error instead of a rate.
    pub failures: usize,
}

/// Runs the whole sweep. Trials execute in the current rayon pool; the
/// output is identical for any pool size.
pub fn run_sweep<T: RealScalar + Send + Sync>(spec: &SweepSpec<T>) -> Result<Vec<SweepRow<T>>> {
    spec.validate()?;
    let mut arms = spec.arms.clone();
    arms.sort_unstable();
    arms.dedup();

    let mut tasks = Vec::with_capacity(spec.values.len() * arms.len() * spec.trials);
    for (point, &value) in spec.values.iter().enumerate() {
        for &arm in &arms {
            for trial in 0..spec.trials {
                let seed = derive_seed(spec.master_seed, point, arm, trial);
                tasks.push((value, arm, seed));
            }
        }
    }

    let outcomes: Vec<Result<TrialOutcome<T>>> = tasks
        .par_iter()
        .map(|&(value, arm, seed)| run_trial(spec, value, arm, seed))
        .collect();

    let mut rows = Vec::with_capacity(spec.values.len() * arms.len());
    let mut cursor = 0;
    for &value in &spec.values {
        let scenario = spec.scenario_at(value)?;
        for &arm in &arms {
            let cell = &outcomes[cursor..cursor + spec.trials];
            cursor += spec.trials;

            let mut successes = 0usize;
            let mut failures = 0usize;
            let mut sum = T::zero();
            let mut sum_sq = T::zero();
            let mut iter_sum = 0usize;
            for outcome in cell {
                match outcome {
                    Ok(trial) => {
                        successes += 1;
                        sum += trial.rate;
                        sum_sq += trial.rate * trial.rate;
                        iter_sum += trial.iterations;
                    }
                    Err(_) => failures += 1,
                }
            }

            let (mean, std) = if successes == 0 {
                (T::zero(), T::zero())
            } else {
                let n = T::of(successes as f64);
                let mean = sum / n;
                let std = if successes < 2 {
                    T::zero()
                } else {
                    let var = (sum_sq - n * mean * mean) / (n - T::one());
                    var.max(T::zero()).sqrt()
                };
                (mean, std)
            };
            let power_w = match arm {
                Arm::FdBaseline => spec.power.fully_digital_power_w(scenario.dims.rf_chains),
                _ => spec.power.dma_front_end_power_w(&scenario.dims),
            };
            let rate_per_watt = if power_w > T::zero() {
                mean / power_w
            } else {
                T::zero()
            };
            let mean_iterations = if successes == 0 {
                0.0
            } else {
                iter_sum as f64 / successes as f64
            };

            rows.push(SweepRow {
                axis: spec.axis,
                axis_value: value,
                arm,
                trials: successes,
                mean_rate: mean,
                std_rate: std,
                power_w,
                rate_per_watt,
                mean_iterations,
                failures,
            });
        }
    }
    Ok(rows)
}

/// Writes the sweep as CSV: one `#`-prefixed configuration echo line, the
/// header, then one row per `(point, arm)` cell with floats in scientific
/// notation at nine significant digits.
pub fn emit_csv<T: RealScalar, W: Write>(
    spec: &SweepSpec<T>,
    rows: &[SweepRow<T>],
    out: &mut W,
) -> Result<()> {
    let mut arm_labels: Vec<&str> = {
        let mut arms = spec.arms.clone();
        arms.sort_unstable();
        arms.dedup();
        arms.into_iter().map(Arm::label).collect()
    };
    if arm_labels.is_empty() {
        arm_labels.push("none");
    }
    writeln!(
        out,
        "# axis={} users={} microstrips={} elements_per_strip={} snr_db={} eta={} \
         beta_de={} trials={} master_seed={} arms={}",
        spec.axis.column_name(),
        spec.users,
        spec.microstrips,
        spec.elements_per_strip,
        spec.snr_db,
        spec.eta,
        spec.beta_de,
        spec.trials,
        spec.master_seed,
        arm_labels.join("+"),
    )?;
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{}",
            row.axis.column_name(),
            row.axis_value,
            row.arm.label(),
            row.trials,
            row.mean_rate.to64(),
            row.std_rate.to64(),
            row.power_w.to64(),
            row.rate_per_watt.to64(),
            row.mean_iterations,
            row.failures,
        )?;
    }
    Ok(())
}

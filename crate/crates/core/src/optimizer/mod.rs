//! Alternating optimization of the analog configuration for maximum sum rate.
//!
//! Each outer iteration freezes the analog weights, refreshes the auxiliary
//! variables of the fractional-programming surrogate (SINDR targets, then
//! combining directions), collapses the surrogate to a quadratic form in the
//! stacked Lorentzian weights, and hands the homogenized quadratic to a phase
//! solver: either the low-rank semidefinite relaxation or the cheaper
//! principal-eigenvector heuristic. The auxiliary updates run on the
//! large-array scalar statistics by default, which is what makes the
//! quadratic collapse exact. The loop traces, selects, and stops on the
//! closed-form rate under those same scalar statistics, so the convergence
//! metric is the objective the phase step actually maximizes; an exact
//! Bussgang report of the returned configuration is attached for reference.
//! The best configuration seen, including the random initialization, is the
//! one returned.

pub mod quadratic;
pub mod sdr;

pub use quadratic::{
    assemble_xi_psi, objective_q, reformulated_rate, update_gamma, update_y, AuxiliaryVariables,
    QuadraticForm,
};
pub use sdr::{
    build_sdr_matrix, closed_form_phases, homogeneous_objective, phases_from_p, solve_sdr,
    PowerSettings, SdrProblem, SdrSettings, SolverOutcome,
};

use crate::combining::{approx_report, effective_map, exact_report, SindrReport};
use crate::error::DmaError;
use crate::quantization::{approx_large_k_stats, exact_stats};
use crate::scalar::RealScalar;
use crate::signal::{build_propagation_matrix, AnalogCombiner, Scenario};
use crate::{CMat, Cplx, RVec, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which phase solver drives the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// Low-rank factorized semidefinite relaxation with exact coordinate
    /// ascent.
    Sdr,
    /// Shifted power iteration on the coupling matrix (principal
    /// eigenvector heuristic).
    ClosedForm,
    /// No optimization: keep the random initialization (baseline).
    Random,
}

/// Outer-loop configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<T: RealScalar> {
    pub solver: SolverKind,
    /// Hard cap on outer iterations.
    pub max_outer_iterations: usize,
    /// Relative change of the scalar-statistics sum rate that counts as
    /// converged.
    pub rate_tolerance: T,
    /// Settings for the relaxation solver (used when `solver` is `Sdr`).
    pub sdr: SdrSettings<T>,
    /// Settings for the eigenvector heuristic (used when `solver` is
    /// `ClosedForm`).
    pub power: PowerSettings<T>,
    /// Use exact per-configuration Bussgang statistics inside the auxiliary
    /// updates instead of the scalar large-array ones. The quadratic phase
    /// step always uses the scalar gain, so enabling this mixes models and
    /// voids the per-step monotonicity diagnostics; it is occasionally useful
    /// at small array sizes.
    pub exact_update_stats: bool,
    /// Seed for the random initialization (and the relaxation factor init).
    pub seed: u64,
}

impl<T: RealScalar> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            solver: SolverKind::Sdr,
            max_outer_iterations: 50,
            rate_tolerance: T::of(1e-4),
            sdr: SdrSettings::default(),
            power: PowerSettings::default(),
            exact_update_stats: false,
            seed: 0,
        }
    }
}

/// Natural-log surrogate values around one outer iteration, recorded only in
/// the default scalar-statistics mode where each update is an exact block
/// maximization: within an entry, `after_direction_step` must not fall below
/// `after_phase_step`, nor `after_target_step` below `after_direction_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSteps<T: RealScalar> {
    /// Surrogate at the newly adopted phases, previous auxiliaries.
    pub after_phase_step: T,
    /// Surrogate after refreshing the combining directions.
    pub after_direction_step: T,
    /// Surrogate after refreshing the SINDR targets.
    pub after_target_step: T,
}

/// Result of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome<T: RealScalar> {
    /// Best analog configuration encountered (the initialization counts).
    pub combiner: AnalogCombiner<T>,
    /// SINDRs and sum rate of that configuration under the large-array
    /// scalar statistics, the metric the loop maximizes.
    pub report: SindrReport<T>,
    /// Exact Bussgang SINDRs and sum rate of the same configuration.
    pub exact_report: SindrReport<T>,
    /// Scalar-statistics sum rate after initialization and after each outer
    /// iteration.
    pub rate_trace: Vec<T>,
    /// Per-iteration surrogate diagnostics (empty for the random solver and
    /// in exact-statistics mode; starts at the second iteration).
    pub surrogate_steps: Vec<SurrogateSteps<T>>,
    /// Inner sweeps or power steps spent by each outer iteration.
    pub solver_iterations: Vec<usize>,
    /// Outer iterations actually performed.
    pub outer_iterations: usize,
    /// Whether the rate-change stopping rule fired before the cap.
    pub converged: bool,
}

/// Runs the alternating optimization for one channel realization.
pub fn optimize_analog<T: RealScalar>(
    h: &CMat<T>,
    scenario: &Scenario<T>,
    config: &OptimizerConfig<T>,
) -> Result<OptimizeOutcome<T>> {
    let dims = &scenario.dims;
    if h.nrows() != dims.elements() || h.ncols() != dims.users {
        return Err(DmaError::DimensionMismatch(format!(
            "channel is {}x{}, expected {}x{}",
            h.nrows(),
            h.ncols(),
            dims.elements(),
            dims.users
        )));
    }
    let rho = scenario.rho;
    let eta = scenario.eta;
    let a = build_propagation_matrix(&scenario.geometry);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let q0 = AnalogCombiner::random(dims, &mut rng);
    let report0 = approx_report(h, &q0, &a, rho, eta)?;
    let mut rate_trace = vec![report0.sum_rate];
    let mut best_q = q0.clone();
    let mut best_report = report0.clone();

    if config.solver == SolverKind::Random {
        let exact = exact_report(h, &best_q, &a, rho, eta)?;
        return Ok(OptimizeOutcome {
            combiner: best_q,
            report: best_report,
            exact_report: exact,
            rate_trace,
            surrogate_steps: Vec::new(),
            solver_iterations: Vec::new(),
            outer_iterations: 0,
            converged: true,
        });
    }

    let approx = approx_large_k_stats(dims.users, dims.elements_per_strip, rho, eta);
    let gain_vec = RVec::from_element(dims.microstrips, approx.gain);
    let cd_approx =
        CMat::identity(dims.microstrips, dims.microstrips) * Cplx::from(approx.distortion);

    let mut q = q0;
    let mut prev_rate = best_report.sum_rate;
    let mut aux_prev: Option<AuxiliaryVariables<T>> = None;
    let mut warm: Option<CMat<T>> = None;
    let mut surrogate_steps = Vec::new();
    let mut solver_iterations = Vec::new();
    let mut outer_iterations = 0;
    let mut converged = false;

    let mut sdr_settings = config.sdr.clone();
    sdr_settings.seed = config.seed ^ 0x51d8_27ab_cafe_f00d;

    for _ in 0..config.max_outer_iterations {
        let k_surr = effective_map(&gain_vec, &q, &a)?;
        let aux = if config.exact_update_stats {
            let stats = exact_stats(h, &q, &a, rho, eta)?;
            let k_exact = effective_map(&stats.gain, &q, &a)?;
            AuxiliaryVariables {
                gamma: update_gamma(&k_exact, h, &stats.cd, rho)?,
                y: update_y(&k_exact, h, &stats.cd, rho)?,
            }
        } else {
            let y = update_y(&k_surr, h, &cd_approx, rho)?;
            let gamma = update_gamma(&k_surr, h, &cd_approx, rho)?;
            if let Some(prev) = &aux_prev {
                let after_phase =
                    quadratic::surrogate_with_map(&k_surr, prev, h, &cd_approx, rho, true)?;
                let mid = AuxiliaryVariables {
                    gamma: prev.gamma.clone(),
                    y: y.clone(),
                };
                let after_direction =
                    quadratic::surrogate_with_map(&k_surr, &mid, h, &cd_approx, rho, true)?;
                let full = AuxiliaryVariables {
                    gamma: gamma.clone(),
                    y: y.clone(),
                };
                let after_target =
                    quadratic::surrogate_with_map(&k_surr, &full, h, &cd_approx, rho, true)?;
                surrogate_steps.push(SurrogateSteps {
                    after_phase_step: after_phase,
                    after_direction_step: after_direction,
                    after_target_step: after_target,
                });
            }
            AuxiliaryVariables { gamma, y }
        };

        let form = assemble_xi_psi(h, &a, approx.gain, &aux, rho)?;
        let problem = build_sdr_matrix(&form)?;
        let outcome = match config.solver {
            SolverKind::Sdr => solve_sdr(&problem, &sdr_settings, warm.as_ref())?,
            SolverKind::ClosedForm => closed_form_phases(&problem, &config.power),
            SolverKind::Random => unreachable!("handled above"),
        };
        solver_iterations.push(outcome.iterations);
        warm = outcome.factor;
        q = phases_from_p(&outcome.p, dims)?;

        let report = approx_report(h, &q, &a, rho, eta)?;
        let rate = report.sum_rate;
        rate_trace.push(rate);
        if rate > best_report.sum_rate {
            best_q = q.clone();
            best_report = report;
        }
        outer_iterations += 1;
        aux_prev = Some(aux);

        let scale = prev_rate.abs().max(T::of(1e-12));
        let relative = (rate - prev_rate).abs() / scale;
        prev_rate = rate;
        if relative < config.rate_tolerance {
            converged = true;
            break;
        }
    }

    let exact = exact_report(h, &best_q, &a, rho, eta)?;
    Ok(OptimizeOutcome {
        combiner: best_q,
        report: best_report,
        exact_report: exact,
        rate_trace,
        surrogate_steps,
        solver_iterations,
        outer_iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_channel, SystemDims};

    fn scenario(k: usize, nd: usize, ne: usize, snr_db: f64) -> Scenario<f64> {
        let dims = SystemDims::new(k, nd, ne).unwrap();
        Scenario::from_snr_db(dims, snr_db).unwrap()
    }

    fn channel(scenario: &Scenario<f64>, seed: u64) -> CMat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        generate_channel::<f64, _>(&scenario.dims, &mut rng)
    }

    #[test]
    fn returned_rate_never_falls_below_the_initialization() {
        for trial in 0..8 {
            let sc = scenario(2, 3, 4, 10.0);
            let h = channel(&sc, 900 + trial);
            let config = OptimizerConfig::<f64> {
                seed: 30 + trial,
                ..OptimizerConfig::default()
            };
            let outcome = optimize_analog(&h, &sc, &config).unwrap();
            assert!(
                outcome.report.sum_rate >= outcome.rate_trace[0] - 1e-12,
                "trial {trial}: best {} below init {}",
                outcome.report.sum_rate,
                outcome.rate_trace[0]
            );
            assert!(outcome.report.sum_rate > 0.0);
        }
    }

    #[test]
    fn best_iterate_is_the_max_of_the_trace() {
        let sc = scenario(3, 4, 5, 12.0);
        let h = channel(&sc, 910);
        let config = OptimizerConfig::<f64> {
            seed: 7,
            ..OptimizerConfig::default()
        };
        let outcome = optimize_analog(&h, &sc, &config).unwrap();
        let trace_max = outcome.rate_trace.iter().cloned().fold(f64::MIN, f64::max);
        assert!((outcome.report.sum_rate - trace_max).abs() < 1e-12);
        assert_eq!(outcome.rate_trace.len(), outcome.outer_iterations + 1);
        assert_eq!(outcome.solver_iterations.len(), outcome.outer_iterations);
    }

    #[test]
    fn optimization_is_deterministic_in_the_seed() {
        let sc = scenario(2, 3, 3, 8.0);
        let h = channel(&sc, 920);
        let config = OptimizerConfig::<f64> {
            seed: 99,
            ..OptimizerConfig::default()
        };
        let first = optimize_analog(&h, &sc, &config).unwrap();
        let second = optimize_analog(&h, &sc, &config).unwrap();
        assert_eq!(first.combiner.phases(), second.combiner.phases());
        assert_eq!(first.rate_trace, second.rate_trace);

        let other = OptimizerConfig::<f64> {
            seed: 100,
            ..OptimizerConfig::default()
        };
        let third = optimize_analog(&h, &sc, &other).unwrap();
        assert_ne!(first.combiner.phases(), third.combiner.phases());
    }

    #[test]
    fn random_solver_returns_the_seeded_initialization_untouched() {
        let sc = scenario(2, 4, 3, 10.0);
        let h = channel(&sc, 930);
        let config = OptimizerConfig::<f64> {
            solver: SolverKind::Random,
            seed: 55,
            ..OptimizerConfig::default()
        };
        let outcome = optimize_analog(&h, &sc, &config).unwrap();
        assert_eq!(outcome.outer_iterations, 0);
        assert_eq!(outcome.rate_trace.len(), 1);
        assert!(outcome.converged);
        assert!(outcome.surrogate_steps.is_empty());

        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let reference = AnalogCombiner::<f64>::random(&sc.dims, &mut rng);
        assert_eq!(outcome.combiner.phases(), reference.phases());
    }

    #[test]
    fn auxiliary_updates_never_lower_the_surrogate() {
        for trial in 0..5 {
            let sc = scenario(2, 3, 4, 10.0);
            let h = channel(&sc, 940 + trial);
            let config = OptimizerConfig::<f64> {
                seed: 60 + trial,
                ..OptimizerConfig::default()
            };
            let outcome = optimize_analog(&h, &sc, &config).unwrap();
            for (idx, steps) in outcome.surrogate_steps.iter().enumerate() {
                let tol = 1e-9 * (1.0 + steps.after_phase_step.abs());
                assert!(
                    steps.after_direction_step >= steps.after_phase_step - tol,
                    "trial {trial} step {idx}: direction update lowered the surrogate \
                     ({} -> {})",
                    steps.after_phase_step,
                    steps.after_direction_step
                );
                assert!(
                    steps.after_target_step >= steps.after_direction_step - tol,
                    "trial {trial} step {idx}: target update lowered the surrogate \
                     ({} -> {})",
                    steps.after_direction_step,
                    steps.after_target_step
                );
            }
        }
    }

    #[test]
    fn eigenvector_heuristic_also_improves_on_average() {
        let mut improved = 0;
        for trial in 0..6 {
            let sc = scenario(2, 3, 4, 10.0);
            let h = channel(&sc, 950 + trial);
            let config = OptimizerConfig::<f64> {
                solver: SolverKind::ClosedForm,
                seed: 70 + trial,
                ..OptimizerConfig::default()
            };
            let outcome = optimize_analog(&h, &sc, &config).unwrap();
            assert!(outcome.report.sum_rate >= outcome.rate_trace[0] - 1e-12);
            if outcome.report.sum_rate > outcome.rate_trace[0] + 1e-6 {
                improved += 1;
            }
        }
        assert!(improved >= 4, "heuristic improved only {improved}/6 runs");
    }

    #[test]
    fn attached_exact_report_matches_the_returned_combiner() {
        let sc = scenario(2, 3, 4, 10.0);
        let h = channel(&sc, 965);
        let config = OptimizerConfig::<f64> {
            seed: 31,
            ..OptimizerConfig::default()
        };
        let outcome = optimize_analog(&h, &sc, &config).unwrap();
        let a = crate::signal::build_propagation_matrix(&sc.geometry);
        let recomputed =
            crate::combining::exact_report(&h, &outcome.combiner, &a, sc.rho, sc.eta).unwrap();
        assert_eq!(outcome.exact_report.sum_rate, recomputed.sum_rate);
        let reported =
            crate::combining::approx_report(&h, &outcome.combiner, &a, sc.rho, sc.eta).unwrap();
        assert_eq!(outcome.report.sum_rate, reported.sum_rate);
    }

    #[test]
    fn optimization_also_lifts_the_exact_rate_over_the_random_arm() {
        let mut lifted = 0;
        for trial in 0..6 {
            let sc = scenario(2, 5, 10, 10.0);
            let h = channel(&sc, 980 + trial);
            let base = OptimizerConfig::<f64> {
                seed: 40 + trial,
                ..OptimizerConfig::default()
            };
            let random = OptimizerConfig::<f64> {
                solver: SolverKind::Random,
                ..base.clone()
            };
            let optimized = optimize_analog(&h, &sc, &base).unwrap();
            let baseline = optimize_analog(&h, &sc, &random).unwrap();
            if optimized.exact_report.sum_rate >= baseline.exact_report.sum_rate {
                lifted += 1;
            }
        }
        assert!(lifted >= 5, "exact rate lifted only {lifted}/6 runs");
    }

    #[test]
    fn exact_statistics_mode_runs_and_skips_the_diagnostics() {
        let sc = scenario(2, 3, 3, 10.0);
        let h = channel(&sc, 960);
        let config = OptimizerConfig::<f64> {
            exact_update_stats: true,
            seed: 80,
            ..OptimizerConfig::default()
        };
        let outcome = optimize_analog(&h, &sc, &config).unwrap();
        assert!(outcome.surrogate_steps.is_empty());
        assert!(outcome.report.sum_rate >= outcome.rate_trace[0] - 1e-12);
    }

    #[test]
    fn loose_tolerance_stops_after_one_iteration() {
        let sc = scenario(2, 3, 3, 10.0);
        let h = channel(&sc, 970);
        let config = OptimizerConfig::<f64> {
            rate_tolerance: 1e9,
            seed: 81,
            ..OptimizerConfig::default()
        };
        let outcome = optimize_analog(&h, &sc, &config).unwrap();
        assert!(outcome.converged);
        assert_eq!(outcome.outer_iterations, 1);
    }

    #[test]
    fn mismatched_channel_shape_is_rejected() {
        let sc = scenario(2, 3, 3, 10.0);
        let h = CMat::<f64>::zeros(5, 2);
        let err = optimize_analog(&h, &sc, &OptimizerConfig::default()).unwrap_err();
        assert!(matches!(err, DmaError::DimensionMismatch(_)));
    }
}

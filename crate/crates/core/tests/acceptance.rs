//! End-to-end acceptance checks. Each test evaluates one numbered criterion,
//! prints a single `criterion NN: pass|FAIL` line (visible with
//! `--nocapture`), and asserts the same verdict. The numbering fixes the
//! execution order, cheap checks first, the long Monte Carlo sweeps last.

use dma_rx::combining::{
    effective_map, lmmse_combiner, max_sindr_eigen, optimal_sindr, sindr_per_user, sum_rate,
};
use dma_rx::optimizer::{
    assemble_xi_psi, build_sdr_matrix, closed_form_phases, homogeneous_objective, objective_q,
    phases_from_p, reformulated_rate, solve_sdr, update_gamma, update_y, AuxiliaryVariables,
    PowerSettings, SdrSettings,
};
use dma_rx::power::PowerModelParams;
use dma_rx::quantization::{approx_large_k_stats, empirical_covariances, exact_stats};
use dma_rx::signal::{
    build_propagation_matrix, generate_channel, lorentzian_weight, AnalogCombiner, Scenario,
    SystemDims,
};
use dma_rx::sweep::{run_sweep, Arm, SweepAxis, SweepRow, SweepSpec};
use dma_rx::{CMat, CVec, Cplx, RVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, label: &str, pass: bool, detail: &str) {
    let verdict = if pass { "pass" } else { "FAIL" };
    println!("criterion {id:02}: {verdict} - {label}: {detail}");
    assert!(pass, "criterion {id:02} ({label}): {detail}");
}

fn row(rows: &[SweepRow<f64>], value: f64, arm: Arm) -> &SweepRow<f64> {
    rows.iter()
        .find(|r| r.axis_value == value && r.arm == arm)
        .expect("requested sweep cell exists")
}

fn standard_error(row: &SweepRow<f64>) -> f64 {
    row.std_rate / (row.trials as f64).sqrt()
}

#[test]
fn criterion_01_front_end_power_ratio() {
    let params = PowerModelParams::<f64>::default();
    let dims = SystemDims::new(2, 5, 10).unwrap();
    let ratio = params.fully_digital_power_w(dims.users) / params.dma_front_end_power_w(&dims);
    let pass = (6.5..=7.5).contains(&ratio);
    report(
        1,
        "front-end power ratio",
        pass,
        &format!("P_fd/P_dma = {ratio:.4}, required within [6.5, 7.5]"),
    );
}

#[test]
fn criterion_02_quantizer_statistics_match_simulation() {
    const SAMPLES: usize = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc2);
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();

    for scenario_idx in 0..20 {
        let users = rng.random_range(1..=4usize);
        let strips = rng.random_range(1..=6usize);
        let per_strip = rng.random_range(1..=8usize);
        let snr_db = if rng.random::<bool>() { 0.0 } else { 10.0 };
        let dims = SystemDims::new(users, strips, per_strip).unwrap();
        let scenario = Scenario::<f64>::from_snr_db(dims, snr_db).unwrap();
        let h = generate_channel::<f64, _>(&dims, &mut rng);
        let q = AnalogCombiner::random(&dims, &mut rng);
        let a = build_propagation_matrix(&scenario.geometry);

        let stats = exact_stats(&h, &q, &a, scenario.rho, scenario.eta).unwrap();
        let k_eff = effective_map(&stats.gain, &q, &a).unwrap();
        let crx_closed = (&k_eff * &h) * Cplx::from(scenario.rho.sqrt());
        let moments =
            empirical_covariances(&scenario, &q, &h, SAMPLES, 0x5eed_0000 + scenario_idx).unwrap();

        let mut check = |closed: Cplx<f64>, mean: Cplx<f64>, se: f64, what: &str| {
            let diff = (closed - mean).norm();
            let bound = 4.0 * se + 1e-12;
            checked += 1;
            if se > 0.0 {
                worst = worst.max(diff / se);
            }
            if diff > bound {
                failures.push(format!(
                    "scenario {scenario_idx} {what}: |closed - sample| = {diff:.3e} > {bound:.3e}"
                ));
            }
        };

        for i in 0..strips {
            for j in 0..strips {
                check(
                    stats.cr[(i, j)],
                    moments.cr.mean[(i, j)],
                    moments.cr.se[(i, j)],
                    &format!("C_r[{i},{j}]"),
                );
                // Bussgang orthogonality: the residual against the closed-form
                // gain has zero cross-correlation with the strip outputs.
                check(
                    Cplx::new(0.0, 0.0),
                    moments.dz.mean[(i, j)],
                    moments.dz.se[(i, j)],
                    &format!("E[d z^H][{i},{j}]"),
                );
            }
            // Sample regression gain sum(r z*)/sum(|z|^2) equals the closed
            // form plus dz/cz on the diagonal, with a delta-method error bar.
            let cz_diag = moments.cz.mean[(i, i)].re;
            let sample_gain = stats.gain[i] + (moments.dz.mean[(i, i)] / cz_diag).re;
            let gain_se = moments.dz.se[(i, i)] / cz_diag;
            check(
                Cplx::from(stats.gain[i]),
                Cplx::from(sample_gain),
                gain_se,
                &format!("G[{i}]"),
            );
            for k in 0..users {
                check(
                    crx_closed[(i, k)],
                    moments.crx.mean[(i, k)],
                    moments.crx.se[(i, k)],
                    &format!("C_rx[{i},{k}]"),
                );
            }
        }
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "{checked} entries over 20 scenarios x {SAMPLES} draws within 4 SE \
             (worst {worst:.2} SE)"
        )
    } else {
        format!(
            "{} of {checked} entries out of bounds: {}",
            failures.len(),
            failures.join("; ")
        )
    };
    report(2, "closed-form quantizer statistics", pass, &detail);
}

#[test]
fn criterion_03_combiner_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let users = rng.random_range(1..=4usize);
        let strips = rng.random_range(2..=6usize);
        let per_strip = rng.random_range(2..=8usize);
        let snr_db = [0.0, 5.0, 10.0, 15.0][rng.random_range(0..4usize)];
        let eta = [0.5, 1.0, 2.0][rng.random_range(0..3usize)];
        let dims = SystemDims::new(users, strips, per_strip).unwrap();
        let scenario = Scenario::<f64>::from_snr_db(dims, snr_db)
            .unwrap()
            .with_eta(eta)
            .unwrap();
        let h = generate_channel::<f64, _>(&dims, &mut rng);
        let q = AnalogCombiner::random(&dims, &mut rng);
        let a = build_propagation_matrix(&scenario.geometry);

        let stats = exact_stats(&h, &q, &a, scenario.rho, scenario.eta).unwrap();
        let k_eff = effective_map(&stats.gain, &q, &a).unwrap();
        let closed = optimal_sindr(&k_eff, &h, &stats.cd, scenario.rho).unwrap();
        let w = lmmse_combiner(&k_eff, &h, &stats.cd, scenario.rho).unwrap();
        let via_lmmse = sindr_per_user(&w, &k_eff, &h, &stats.cd, scenario.rho).unwrap();

        for k in 0..users {
            let (_, via_eigen) = max_sindr_eigen(&k_eff, &h, &stats.cd, scenario.rho, k).unwrap();
            worst = worst
                .max((via_lmmse[k] - closed[k]).abs())
                .max((via_lmmse[k] - via_eigen).abs())
                .max((closed[k] - via_eigen).abs());
        }
    }
    let pass = worst < 1e-8;
    report(
        3,
        "combiner route agreement",
        pass,
        &format!("50 instances, worst pairwise SINDR gap {worst:.3e}, required < 1e-8"),
    );
}

#[test]
fn criterion_04_surrogate_is_tight_at_optimal_auxiliaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let users = rng.random_range(1..=4usize);
        let strips = rng.random_range(2..=6usize);
        let per_strip = rng.random_range(2..=8usize);
        let snr_db = [0.0, 10.0, 20.0][rng.random_range(0..3usize)];
        let dims = SystemDims::new(users, strips, per_strip).unwrap();
        let scenario = Scenario::<f64>::from_snr_db(dims, snr_db).unwrap();
        let h = generate_channel::<f64, _>(&dims, &mut rng);
        let q = AnalogCombiner::random(&dims, &mut rng);
        let a = build_propagation_matrix(&scenario.geometry);

        let approx = approx_large_k_stats(users, per_strip, scenario.rho, scenario.eta);
        let gain = RVec::from_element(strips, approx.gain);
        let cd = CMat::identity(strips, strips) * Cplx::from(approx.distortion);
        let k_eff = effective_map(&gain, &q, &a).unwrap();
        let aux = AuxiliaryVariables {
            gamma: update_gamma(&k_eff, &h, &cd, scenario.rho).unwrap(),
            y: update_y(&k_eff, &h, &cd, scenario.rho).unwrap(),
        };
        let surrogate = reformulated_rate(&q, &aux, &h, &a, &gain, &cd, scenario.rho).unwrap();
        let target = sum_rate(&aux.gamma).unwrap();
        worst = worst.max((surrogate - target).abs());
    }
    let pass = worst < 1e-9;
    report(
        4,
        "surrogate tightness",
        pass,
        &format!("50 instances, worst |surrogate - sum rate| = {worst:.3e}, required < 1e-9"),
    );
}

#[test]
fn criterion_05_relaxation_and_rounding_near_grid_optimum() {
    const PHASE_STEPS: usize = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc5);
    let dims = SystemDims::new(2, 2, 2).unwrap();
    let n = dims.elements();
    let mut failures = Vec::new();
    let mut worst_sdr: f64 = 0.0;
    let mut worst_eigen: f64 = 0.0;

    // Instances are drawn at the alternation's operating point: a few
    // auxiliary/phase rounds from a random start, then the final quadratic
    // form is the tested problem. The eigenvector shortcut carries no
    // distribution-free guarantee, so the band is asserted where the solver
    // actually runs.
    for instance in 0..30 {
        let scenario = Scenario::<f64>::from_snr_db(dims, 10.0).unwrap();
        let h = generate_channel::<f64, _>(&dims, &mut rng);
        let mut q = AnalogCombiner::random(&dims, &mut rng);
        let a = build_propagation_matrix(&scenario.geometry);
        let approx = approx_large_k_stats(dims.users, dims.elements_per_strip, scenario.rho, 1.0);
        let gain = RVec::from_element(dims.microstrips, approx.gain);
        let cd = CMat::identity(dims.microstrips, dims.microstrips) * Cplx::from(approx.distortion);
        let aux_at = |q: &AnalogCombiner<f64>| {
            let k_eff = effective_map(&gain, q, &a).unwrap();
            AuxiliaryVariables {
                gamma: update_gamma(&k_eff, &h, &cd, scenario.rho).unwrap(),
                y: update_y(&k_eff, &h, &cd, scenario.rho).unwrap(),
            }
        };
        for _ in 0..4 {
            let aux = aux_at(&q);
            let round = assemble_xi_psi(&h, &a, approx.gain, &aux, scenario.rho).unwrap();
            let sdr = solve_sdr(
                &build_sdr_matrix(&round).unwrap(),
                &SdrSettings::default(),
                None,
            )
            .unwrap();
            q = phases_from_p(&sdr.p, &dims).unwrap();
        }
        let aux = aux_at(&q);
        let form = assemble_xi_psi(&h, &a, approx.gain, &aux, scenario.rho).unwrap();
        let problem = build_sdr_matrix(&form).unwrap();

        let sdr = solve_sdr(&problem, &SdrSettings::default(), None).unwrap();
        let bound = sdr.relaxation_bound.expect("relaxation bound is recorded");
        let q_sdr = phases_from_p(&sdr.p, &dims).unwrap();
        let val_sdr = objective_q(&q_sdr.weights(), &form);
        let eigen = closed_form_phases(&problem, &PowerSettings::default());
        let q_eigen = phases_from_p(&eigen.p, &dims).unwrap();
        let val_eigen = objective_q(&q_eigen.weights(), &form);

        // Exhaustive 16-points-per-phase grid over the four elements.
        let mut grid_opt = f64::NEG_INFINITY;
        let mut bound_ok = true;
        let total = PHASE_STEPS.pow(n as u32);
        for code in 0..total {
            let mut digits = code;
            let mut weights = CVec::zeros(n);
            let mut p = CVec::zeros(n);
            for i in 0..n {
                let phase =
                    2.0 * std::f64::consts::PI * (digits % PHASE_STEPS) as f64 / PHASE_STEPS as f64;
                digits /= PHASE_STEPS;
                weights[i] = lorentzian_weight(phase);
                p[i] = Cplx::new(phase.cos(), phase.sin());
            }
            let val = objective_q(&weights, &form);
            grid_opt = grid_opt.max(val);
            let homogeneous = homogeneous_objective(&problem, &p);
            if bound < homogeneous - 1e-9 * (1.0 + homogeneous.abs()) {
                bound_ok = false;
            }
        }

        let slack = 0.05 * grid_opt.abs() + 1e-12;
        let scale = grid_opt.abs().max(1e-12);
        worst_sdr = worst_sdr.max((grid_opt - val_sdr) / scale);
        worst_eigen = worst_eigen.max((grid_opt - val_eigen) / scale);
        if val_sdr < grid_opt - slack {
            failures.push(format!(
                "instance {instance}: rounded relaxation {val_sdr:.6} vs grid {grid_opt:.6}"
            ));
        }
        if val_eigen < grid_opt - slack {
            failures.push(format!(
                "instance {instance}: eigenvector {val_eigen:.6} vs grid {grid_opt:.6}"
            ));
        }
        if !bound_ok {
            failures.push(format!(
                "instance {instance}: tr(MP) fails to dominate the grid"
            ));
        }
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "30 instances within 5% of the 16^4 grid optimum \
             (worst relative gaps: relaxation {worst_sdr:.2e}, eigenvector {worst_eigen:.2e}); \
             tr(MP) dominates all grid points"
        )
    } else {
        failures.join("; ")
    };
    report(5, "relaxation and rounding quality", pass, &detail);
}

#[test]
fn criterion_06_channel_gram_concentrates_with_many_users() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc6);
    let mut ratios = Vec::new();
    let mut diag_errors = Vec::new();
    for &users in &[8usize, 32, 128] {
        let dims = SystemDims::new(users, 2, 8).unwrap();
        let n = dims.elements();
        let mut ratio_sum = 0.0;
        let mut diag_sum = 0.0;
        for _ in 0..100 {
            let h = generate_channel::<f64, _>(&dims, &mut rng);
            let gram = &h * h.adjoint();
            let mut diag_err = 0.0;
            let mut diag_mag = 0.0;
            let mut off_mag = 0.0;
            for i in 0..n {
                diag_err += (gram[(i, i)].re / users as f64 - 1.0).abs();
                diag_mag += gram[(i, i)].norm();
                for j in 0..n {
                    if i != j {
                        off_mag += gram[(i, j)].norm();
                    }
                }
            }
            diag_sum += diag_err / n as f64;
            ratio_sum += (diag_mag / n as f64) / (off_mag / (n * (n - 1)) as f64);
        }
        diag_errors.push(diag_sum / 100.0);
        ratios.push(ratio_sum / 100.0);
    }

    let bound_ok = diag_errors
        .iter()
        .zip(&[8.0f64, 32.0, 128.0])
        .all(|(&err, &k)| err < 3.0 / k.sqrt());
    let growth_ok = ratios[0] < ratios[1] && ratios[1] < ratios[2];
    let pass = bound_ok && growth_ok;
    report(
        6,
        "channel gram concentration",
        pass,
        &format!(
            "mean diag errors {:.4}/{:.4}/{:.4} vs bounds {:.4}/{:.4}/{:.4}; \
             diag-to-off ratios {:.2} < {:.2} < {:.2}",
            diag_errors[0],
            diag_errors[1],
            diag_errors[2],
            3.0 / 8.0f64.sqrt(),
            3.0 / 32.0f64.sqrt(),
            3.0 / 128.0f64.sqrt(),
            ratios[0],
            ratios[1],
            ratios[2]
        ),
    );
}

#[test]
fn criterion_07_rate_crossover_band() {
    let grid: Vec<f64> = (-2..=5).map(|s| (s * 5) as f64).collect();
    let mut spec = SweepSpec::<f64>::new(SweepAxis::SnrDb, grid.clone());
    spec.trials = 200;
    spec.master_seed = 1;
    spec.arms = vec![Arm::DmaSdr, Arm::FdBaseline];
    let rows = run_sweep(&spec).unwrap();

    let mut failures = Vec::new();
    let mut gaps = Vec::new();
    for &rho_db in &grid {
        let dma = row(&rows, rho_db, Arm::DmaSdr);
        let fd = row(&rows, rho_db, Arm::FdBaseline);
        gaps.push((rho_db, dma.mean_rate - fd.mean_rate));
        if rho_db <= 10.0 && dma.mean_rate <= fd.mean_rate {
            failures.push(format!(
                "at {rho_db} dB the metasurface mean {:.3} does not exceed the baseline {:.3}",
                dma.mean_rate, fd.mean_rate
            ));
        }
        if rho_db == 25.0 && fd.mean_rate <= dma.mean_rate {
            failures.push(format!(
                "at 25 dB the baseline mean {:.3} does not exceed the metasurface {:.3}",
                fd.mean_rate, dma.mean_rate
            ));
        }
    }

    // Linear interpolation at the first sign change of the mean-rate gap.
    let mut crossover = None;
    for pair in gaps.windows(2) {
        let (x0, d0) = pair[0];
        let (x1, d1) = pair[1];
        if d0 >= 0.0 && d1 < 0.0 {
            crossover = Some(x0 + (x1 - x0) * d0 / (d0 - d1));
            break;
        }
    }
    match crossover {
        Some(x) if (14.0..=22.0).contains(&x) => {}
        Some(x) => failures.push(format!("crossover at {x:.2} dB outside [14, 22]")),
        None => failures.push("no crossover found on the grid".into()),
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "200 trials per point; metasurface leads through 10 dB, trails at 25 dB, \
             crossover at {:.2} dB within [14, 22]",
            crossover.unwrap()
        )
    } else {
        failures.join("; ")
    };
    report(7, "rate crossover band", pass, &detail);
}

#[test]
fn criterion_08_solver_ordering_at_ten_db() {
    let mut spec = SweepSpec::<f64>::new(SweepAxis::SnrDb, vec![10.0]);
    spec.trials = 200;
    spec.master_seed = 1;
    spec.arms = vec![Arm::DmaSdr, Arm::DmaClosedForm, Arm::DmaRandom];
    let rows = run_sweep(&spec).unwrap();

    let sdr = row(&rows, 10.0, Arm::DmaSdr);
    let eigen = row(&rows, 10.0, Arm::DmaClosedForm);
    let random = row(&rows, 10.0, Arm::DmaRandom);
    let first_gap = sdr.mean_rate - eigen.mean_rate;
    let first_se = (standard_error(sdr).powi(2) + standard_error(eigen).powi(2)).sqrt();
    let second_gap = eigen.mean_rate - random.mean_rate;
    let second_se = (standard_error(eigen).powi(2) + standard_error(random).powi(2)).sqrt();

    let pass = first_gap >= -first_se && second_gap >= -second_se;
    report(
        8,
        "solver ordering at 10 dB",
        pass,
        &format!(
            "means {:.3} >= {:.3} >= {:.3}; gaps {first_gap:+.3} (se {first_se:.3}) \
             and {second_gap:+.3} (se {second_se:.3})",
            sdr.mean_rate, eigen.mean_rate, random.mean_rate
        ),
    );
}

#[test]
fn criterion_09_rate_grows_with_microstrips() {
    let users = 5usize;
    let grid: Vec<f64> = (1..=5).map(|m| (m * users) as f64).collect();
    let mut spec = SweepSpec::<f64>::new(SweepAxis::Microstrips, grid.clone());
    spec.users = users;
    spec.elements_per_strip = 20;
    spec.snr_db = 10.0;
    spec.trials = 15;
    spec.master_seed = 1;
    spec.arms = vec![Arm::DmaSdr, Arm::FdBaseline];
    let rows = run_sweep(&spec).unwrap();

    let mut failures = Vec::new();
    let mut means = Vec::new();
    for &strips in &grid {
        let dma = row(&rows, strips, Arm::DmaSdr);
        let fd = row(&rows, strips, Arm::FdBaseline);
        means.push((strips, dma.mean_rate, standard_error(dma)));

        if strips >= 2.0 * users as f64 {
            if dma.mean_rate <= fd.mean_rate {
                failures.push(format!(
                    "at {strips} strips the metasurface mean {:.3} does not exceed \
                     the baseline {:.3}",
                    dma.mean_rate, fd.mean_rate
                ));
            }
            // Power fraction check against the closed-form model, quoted at
            // whole-percent precision.
            let fraction = dma.power_w / fd.power_w;
            let formula = strips * 0.064 / 5.42;
            if (fraction - formula).abs() > 1e-12 {
                failures.push(format!(
                    "power fraction {fraction:.6} differs from the model {formula:.6}"
                ));
            }
            let percent = (100.0 * fraction).round() as i64;
            if !(12..=30).contains(&percent) {
                failures.push(format!(
                    "power fraction {:.2}% at {strips} strips outside [12%, 30%]",
                    100.0 * fraction
                ));
            }
        }
    }
    for pair in means.windows(2) {
        let (lo_strips, lo_mean, lo_se) = pair[0];
        let (hi_strips, hi_mean, hi_se) = pair[1];
        let margin = 2.0 * (lo_se.powi(2) + hi_se.powi(2)).sqrt();
        if hi_mean < lo_mean - margin {
            failures.push(format!(
                "mean rate drops from {lo_mean:.3} at {lo_strips} strips to {hi_mean:.3} \
                 at {hi_strips} strips"
            ));
        }
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "15 trials per point; means {} nondecreasing, metasurface leads the baseline \
             from {} strips at a 12-30% power fraction",
            means
                .iter()
                .map(|(_, m, _)| format!("{m:.2}"))
                .collect::<Vec<_>>()
                .join(" -> "),
            2 * users
        )
    } else {
        failures.join("; ")
    };
    report(9, "rate growth with microstrips", pass, &detail);
}

// Criterion 10 (byte-identical sweeps across worker counts) exercises the
// command-line binary and lives in the cli crate's acceptance tests.

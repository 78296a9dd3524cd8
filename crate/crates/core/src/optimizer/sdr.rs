//! Semidefinite-relaxation machinery for the per-iteration phase subproblem.
//!
//! The quadratic objective `2 Re(xi^H q) - q^H Psi q` over Lorentzian weights
//! is homogenized through the substitution `q = (j e + p) / 2` with
//! unimodular `p`. Stacking `v = [p; 1]` gives
//! `v^H M v = 2 (2 Re(xi^H q) - q^H Psi q) + const` with the Hermitian
//! coupling matrix built by [`build_sdr_matrix`], so maximizing the
//! homogeneous form over unit-modulus vectors maximizes the original
//! objective. Two solvers are provided: a low-rank factorization of the
//! semidefinite relaxation driven by exact coordinate ascent
//! ([`solve_sdr`]), and a cheaper principal-eigenvector heuristic
//! ([`closed_form_phases`]). Both round their iterate to unit modulus and
//! report the value actually achieved by the rounded point.

use crate::error::DmaError;
use crate::scalar::RealScalar;
use crate::signal::{sample_cn, AnalogCombiner, SystemDims};
use crate::{CMat, CVec, Cplx, RVec, Result};
use nalgebra::{ComplexField, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::quadratic::QuadraticForm;

/// Homogenized phase subproblem: maximize `[p; 1]^H M [p; 1]` over
/// unimodular `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrProblem<T: RealScalar> {
    m: CMat<T>,
}

impl<T: RealScalar> SdrProblem<T> {
    /// Wraps a Hermitian coupling matrix, enforcing symmetry exactly.
    pub fn new(mut m: CMat<T>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() < 2 {
            return Err(DmaError::DimensionMismatch(format!(
                "coupling matrix must be square with at least two rows, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().map(|v| v.modulus().to64()).fold(0.0, f64::max);
        let tol = T::of(1e-9 * (1.0 + scale));
        for r in 0..m.nrows() {
            for c in (r + 1)..m.ncols() {
                if (m[(r, c)] - m[(c, r)].conj()).modulus() > tol {
                    return Err(DmaError::InvalidConfig(
                        "coupling matrix must be Hermitian".into(),
                    ));
                }
            }
        }
        crate::quantization::hermitianize(&mut m);
        Ok(Self { m })
    }

    /// The Hermitian coupling matrix.
    pub fn matrix(&self) -> &CMat<T> {
        &self.m
    }

    /// Number of phase variables (matrix dimension minus the homogenization
    /// slot).
    pub fn num_phases(&self) -> usize {
        self.m.nrows() - 1
    }
}

/// Builds the homogenized coupling matrix
/// `M = 1/2 [[-Psi, b], [b^H, 0]]` with `b = 2 xi - j Psi e`.
pub fn build_sdr_matrix<T: RealScalar>(form: &QuadraticForm<T>) -> Result<SdrProblem<T>> {
    let n = form.xi.len();
    if form.psi.nrows() != n || form.psi.ncols() != n {
        return Err(DmaError::DimensionMismatch(format!(
            "xi has {n} entries but Psi is {}x{}",
            form.psi.nrows(),
            form.psi.ncols()
        )));
    }
    let half = Cplx::from(T::of(0.5));
    let ones = CVec::from_element(n, Cplx::from(T::one()));
    let psi_e = &form.psi * &ones;
    let mut m = CMat::zeros(n + 1, n + 1);
    for r in 0..n {
        for c in 0..n {
            m[(r, c)] = -form.psi[(r, c)] * half;
        }
    }
    let minus_j_half = Cplx::new(T::zero(), -T::of(0.5));
    for r in 0..n {
        let coupling = form.xi[r] + minus_j_half * psi_e[r];
        m[(r, n)] = coupling;
        m[(n, r)] = coupling.conj();
    }
    SdrProblem::new(m)
}

/// Evaluates the homogeneous objective `[p; 1]^H M [p; 1]`.
pub fn homogeneous_objective<T: RealScalar>(problem: &SdrProblem<T>, p: &CVec<T>) -> T {
    let n = problem.num_phases();
    assert_eq!(p.len(), n, "phase vector length mismatch");
    let m = &problem.m;
    let v = CVec::from_fn(
        n + 1,
        |i, _| {
            if i < n {
                p[i]
            } else {
                Cplx::from(T::one())
            }
        },
    );
    v.dotc(&(m * &v)).re
}

/// Settings for the low-rank relaxation solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrSettings<T: RealScalar> {
    /// Factorization rank; `None` picks `ceil(sqrt(2 (N + 1)))`, the smallest
    /// rank for which second-order critical points of the factorized problem
    /// are globally optimal for the relaxation (up to a null set).
    pub rank: Option<usize>,
    /// Hard cap on coordinate-ascent sweeps.
    pub max_sweeps: usize,
    /// Stop once a full sweep improves the objective by less than this
    /// fraction of the current objective magnitude (plus one).
    pub objective_tolerance: T,
    /// Seed for the random factor initialization when no warm start is given.
    pub seed: u64,
}

impl<T: RealScalar> Default for SdrSettings<T> {
    fn default() -> Self {
        Self {
            rank: None,
            max_sweeps: 200,
            objective_tolerance: T::of(1e-8),
            seed: 0x5d12_77ab_3c4e_9f01,
        }
    }
}

/// Settings for the principal-eigenvector heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSettings<T: RealScalar> {
    /// Hard cap on power-iteration steps.
    pub max_steps: usize,
    /// Relative Rayleigh-quotient change that counts as converged.
    pub tolerance: T,
}

impl<T: RealScalar> Default for PowerSettings<T> {
    fn default() -> Self {
        Self {
            max_steps: 300,
            tolerance: T::of(1e-10),
        }
    }
}

/// Result of one phase-subproblem solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome<T: RealScalar> {
    /// Unimodular phase vector after rounding, length `N`.
    pub p: CVec<T>,
    /// Homogeneous objective achieved by the rounded `p`.
    pub objective: T,
    /// Relaxation objective `tr(M P)` at the solver's feasible `P` (an upper
    /// bound proxy for the rounded value); relaxation solver only.
    pub relaxation_bound: Option<T>,
    /// Principal eigenvalue estimate; eigenvector heuristic only.
    pub eigenvalue: Option<T>,
    /// Whether the inner stopping rule fired before the iteration cap.
    pub converged: bool,
    /// Sweeps (relaxation) or steps (eigenvector) actually performed.
    pub iterations: usize,
    /// Objective trace: relaxation objective after init and each sweep, or
    /// Rayleigh quotient at each power step.
    pub trace: Vec<T>,
    /// Final factor `V` with `P = V^H V`, reusable as a warm start.
    pub factor: Option<CMat<T>>,
}

/// Relaxation objective `tr(M V^H V)` of a factor with unit-norm columns.
fn factor_objective<T: RealScalar>(m: &CMat<T>, v: &CMat<T>) -> T {
    let n1 = m.nrows();
    let mut total = T::zero();
    for i in 0..n1 {
        let vi = v.column(i);
        for j in 0..n1 {
            let inner = v.column(j).dotc(&vi);
            total += (m[(i, j)] * inner).re;
        }
    }
    total
}

/// Rotates a rounded phase vector by the global phase that maximizes the
/// homogenized objective. Only the coupling term `Re[p^H M[.., N] * 2]`
/// depends on a common rotation of `p`, and it peaks in closed form at the
/// argument of that inner product, so this never lowers the objective.
fn align_global_phase<T: RealScalar>(m: &CMat<T>, p: &mut CVec<T>) {
    let n = p.len();
    let mut coupling = Cplx::new(T::zero(), T::zero());
    for i in 0..n {
        coupling += p[i].conj() * m[(i, n)];
    }
    let modulus = coupling.modulus();
    if modulus > T::zero() {
        let rotation = coupling / Cplx::from(modulus);
        for entry in p.iter_mut() {
            *entry *= rotation;
        }
    }
}

/// Rounds a complex iterate to unimodular phases: removes the global phase by
/// aligning the homogenization slot (last entry) to the positive real axis,
/// then projects every remaining entry to the unit circle. Entries too small
/// to carry a phase default to `j`, the fully-on Lorentzian state.
pub(crate) fn round_to_phases<T: RealScalar>(f: &CVec<T>) -> CVec<T> {
    let n = f.len() - 1;
    let tiny = T::default_epsilon().sqrt();
    let last = f[n];
    let rotation = if last.modulus() > tiny {
        last.conj() / Cplx::from(last.modulus())
    } else {
        Cplx::from(T::one())
    };
    CVec::from_fn(n, |i, _| {
        let entry = f[i] * rotation;
        let modulus = entry.modulus();
        if modulus > tiny {
            entry / Cplx::from(modulus)
        } else {
            Cplx::new(T::zero(), T::one())
        }
    })
}

/// Maximizes the semidefinite relaxation `tr(M P)` over `P >= 0` with unit
/// diagonal through the factorization `P = V^H V`, `V` having unit-norm
/// columns, then rounds the dominant eigenvector of `P` to unimodular phases.
///
/// Coordinate ascent over columns is exact: with every other column fixed,
/// the objective is linear in `v_i` plus a constant, maximized by normalizing
/// `u_i = sum_{j != i} M_{j i} v_j`. Each sweep therefore never decreases the
/// relaxation objective. A warm-start factor from a previous, equally sized
/// problem skips the random initialization.
pub fn solve_sdr<T: RealScalar>(
    problem: &SdrProblem<T>,
    settings: &SdrSettings<T>,
    warm_start: Option<&CMat<T>>,
) -> Result<SolverOutcome<T>> {
    let m = &problem.m;
    let n1 = m.nrows();
    let default_rank = ((2.0 * n1 as f64).sqrt().ceil() as usize).clamp(2, n1);
    let rank = settings.rank.unwrap_or(default_rank).clamp(1, n1);

    let mut v = match warm_start {
        Some(w) => {
            if w.nrows() != rank || w.ncols() != n1 {
                return Err(DmaError::DimensionMismatch(format!(
                    "warm-start factor is {}x{}, expected {}x{}",
                    w.nrows(),
                    w.ncols(),
                    rank,
                    n1
                )));
            }
            let mut v = w.clone();
            for mut col in v.column_iter_mut() {
                let norm = col.norm();
                if norm > T::zero() {
                    col /= Cplx::from(norm);
                } else {
                    col[0] = Cplx::from(T::one());
                }
            }
            v
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            let mut v = CMat::from_fn(rank, n1, |_, _| sample_cn::<T, _>(&mut rng));
            for mut col in v.column_iter_mut() {
                let norm = col.norm();
                if norm > T::zero() {
                    col /= Cplx::from(norm);
                } else {
                    col[0] = Cplx::from(T::one());
                }
            }
            v
        }
    };

    let mut objective = factor_objective(m, &v);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;
    let mut u = CVec::<T>::zeros(rank);
    for sweep in 1..=settings.max_sweeps {
        let mut gained = T::zero();
        for i in 0..n1 {
            u.fill(Cplx::from(T::zero()));
            for j in 0..n1 {
                if j == i {
                    continue;
                }
                let coeff = m[(j, i)];
                if coeff.norm_sqr() == T::zero() {
                    continue;
                }
                let col = v.column(j);
                for a in 0..rank {
                    u[a] += col[a] * coeff;
                }
            }
            let norm = u.norm();
            if norm > T::zero() {
                let old_align = v.column(i).dotc(&u).re;
                gained += T::of(2.0) * (norm - old_align);
                let inv = Cplx::from(T::one() / norm);
                for a in 0..rank {
                    v[(a, i)] = u[a] * inv;
                }
            }
        }
        objective += gained;
        trace.push(objective);
        iterations = sweep;
        if gained <= settings.objective_tolerance * (T::one() + objective.abs()) {
            converged = true;
            break;
        }
    }

    // Recompute exactly to shed the incremental accumulation error.
    let relaxation = factor_objective(m, &v);

    // Dominant eigenvector of P = V^H V via the small Gram matrix V V^H.
    let mut gram = &v * v.adjoint();
    crate::quantization::hermitianize(&mut gram);
    let eig = SymmetricEigen::new(gram);
    let mut top = 0;
    for (idx, value) in eig.eigenvalues.iter().enumerate() {
        if *value > eig.eigenvalues[top] {
            top = idx;
        }
    }
    let f = v.adjoint() * eig.eigenvectors.column(top);
    let mut p = round_to_phases(&f);
    align_global_phase(m, &mut p);
    let objective = homogeneous_objective(problem, &p);

    Ok(SolverOutcome {
        p,
        objective,
        relaxation_bound: Some(relaxation),
        eigenvalue: None,
        converged,
        iterations,
        trace,
        factor: Some(v),
    })
}

/// Approximates the dominant eigenvector of `M` by shifted power iteration
/// and rounds it to unimodular phases.
///
/// The Gershgorin shift `s = max(0, -min_i(M_ii - sum_{j != i} |M_ij|))`
/// makes `M + s I` positive semidefinite, so the Rayleigh quotient is
/// nondecreasing along the iteration and the final iterate is the best one.
pub fn closed_form_phases<T: RealScalar>(
    problem: &SdrProblem<T>,
    settings: &PowerSettings<T>,
) -> SolverOutcome<T> {
    let m = &problem.m;
    let n1 = m.nrows();

    let mut lower = T::of(f64::INFINITY);
    for i in 0..n1 {
        let mut radius = T::zero();
        for j in 0..n1 {
            if j != i {
                radius += m[(i, j)].modulus();
            }
        }
        let bound = m[(i, i)].re - radius;
        if bound < lower {
            lower = bound;
        }
    }
    let shift = (-lower).max(T::zero());

    let mut rng = ChaCha8Rng::seed_from_u64(0x517e_9a1e_0f00_d5ee);
    let mut x = CVec::from_fn(n1, |_, _| sample_cn::<T, _>(&mut rng));
    let norm = x.norm();
    x /= Cplx::from(norm);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut previous: Option<T> = None;
    let shift_c = Cplx::from(shift);
    for step in 1..=settings.max_steps {
        let y = m * &x + &x * shift_c;
        let rayleigh = x.dotc(&y).re - shift;
        trace.push(rayleigh);
        iterations = step;
        let norm = y.norm();
        if norm == T::zero() {
            converged = true;
            break;
        }
        x = y / Cplx::from(norm);
        if let Some(prev) = previous {
            if (rayleigh - prev).abs() <= settings.tolerance * (T::one() + rayleigh.abs()) {
                converged = true;
                break;
            }
        }
        previous = Some(rayleigh);
    }

    let eigenvalue = x.dotc(&(m * &x)).re;
    let mut p = round_to_phases(&x);
    align_global_phase(m, &mut p);
    let objective = homogeneous_objective(problem, &p);

    SolverOutcome {
        p,
        objective,
        relaxation_bound: None,
        eigenvalue: Some(eigenvalue),
        converged,
        iterations,
        trace,
        factor: None,
    }
}

/// Recovers the analog configuration from a unimodular solution of the
/// homogenized problem: `q_n = (j + p_n) / 2`, so the element phase is the
/// argument of `p_n`.
pub fn phases_from_p<T: RealScalar>(p: &CVec<T>, dims: &SystemDims) -> Result<AnalogCombiner<T>> {
    if p.len() != dims.elements() {
        return Err(DmaError::DimensionMismatch(format!(
            "{} phase entries for {} elements",
            p.len(),
            dims.elements()
        )));
    }
    let tolerance = 1e-9;
    for (index, entry) in p.iter().enumerate() {
        let modulus = entry.modulus().to64();
        if (modulus - 1.0).abs() > tolerance {
            return Err(DmaError::NotUnitModulus {
                index,
                modulus,
                tolerance,
            });
        }
    }
    let phases = RVec::from_fn(p.len(), |n, _| p[n].argument());
    AnalogCombiner::from_phases(dims, phases)
}

//! One-bit quantization of the microstrip outputs and its Bussgang
//! decomposition.
//!
//! Each RF chain output is sampled by two one-bit ADCs (I and Q), producing
//! `r = Q1(z) = sqrt(eta/2) * (sgn(Re z) + j sgn(Im z))`. For Gaussian `z`
//! the quantizer decomposes as `r = G z + d` with the distortion `d`
//! uncorrelated with `z`. All second-order statistics have closed forms:
//! the linear gain follows from the input variances, the output covariance
//! from the arcsine law, and the distortion covariance as their difference.
//! Conditioned on a fixed channel the microstrip output is exactly Gaussian,
//! so these expressions are exact and Monte Carlo estimates converge to them
//! at the usual `1/sqrt(n)` rate; [`empirical_covariances`] provides such
//! estimates together with per-entry standard errors.

use crate::error::DmaError;
use crate::scalar::RealScalar;
use crate::signal::{row_coefficients, sample_cn, AnalogCombiner, PropagationMatrix, Scenario};
use crate::{CMat, CVec, Cplx, RMat, RVec, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fraction by which a normalized correlation may overshoot the unit interval
/// and still be treated as rounding noise.
const CORRELATION_CLAMP: f64 = 1e-9;

/// Closed-form second-order statistics of the quantized front end for one
/// channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangStats<T: RealScalar> {
    /// Covariance of the unquantized microstrip outputs, `N_d x N_d`.
    pub cz: CMat<T>,
    /// Diagonal of the Bussgang gain `G` (strictly positive).
    pub gain: RVec<T>,
    /// Covariance of the quantizer outputs (arcsine law), diagonal `eta`.
    pub cr: CMat<T>,
    /// Covariance of the quantization distortion, `cr - G cz G`.
    pub cd: CMat<T>,
}

/// Large-array approximation of the Bussgang statistics: both `G` and `C_d`
/// collapse to scalar multiples of the identity, independent of the analog
/// weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeKStats<T: RealScalar> {
    /// Scalar gain: `sqrt(4 eta / (pi N_e (rho K + 1)))`.
    pub gain: T,
    /// Scalar distortion variance: `eta (1 - 2/pi)`.
    pub distortion: T,
}

/// One-bit quantizes a complex vector componentwise:
/// `sqrt(eta/2) * (sgn(Re) + j sgn(Im))`, with `sgn(0) = +1`.
pub fn quantize_one_bit<T: RealScalar>(z: &CVec<T>, eta: T) -> CVec<T> {
    let level = (eta / T::of(2.0)).sqrt();
    CVec::from_fn(z.len(), |n, _| {
        let v = z[n];
        Cplx::new(
            if v.re >= T::zero() { level } else { -level },
            if v.im >= T::zero() { level } else { -level },
        )
    })
}

/// Block product `(Q A) H`: row `i` is the strip-`i` weighted sum of the
/// channel rows in that strip's element block. Returns an `N_d x K` matrix.
pub(crate) fn strip_channel<T: RealScalar>(
    h: &CMat<T>,
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
) -> Result<CMat<T>> {
    let n = q.elements();
    if h.nrows() != n {
        return Err(DmaError::DimensionMismatch(format!(
            "channel has {} rows but the array has {} elements",
            h.nrows(),
            n
        )));
    }
    let coeffs = row_coefficients(q, a);
    let per_strip = q.elements_per_strip();
    let users = h.ncols();
    let mut f = CMat::zeros(q.microstrips(), users);
    for i in 0..q.microstrips() {
        for k in 0..users {
            let mut acc = Cplx::new(T::zero(), T::zero());
            for l in 0..per_strip {
                let flat = i * per_strip + l;
                acc += coeffs[flat] * h[(flat, k)];
            }
            f[(i, k)] = acc;
        }
    }
    Ok(f)
}

/// Covariance of the unquantized microstrip outputs,
/// `C_z = Q A (rho H H^H + I) A^H Q^H`, computed block by block and
/// symmetrized to remove rounding skew.
pub fn compute_cz<T: RealScalar>(
    h: &CMat<T>,
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
    rho: T,
) -> Result<CMat<T>> {
    let f = strip_channel(h, q, a)?;
    let coeffs = row_coefficients(q, a);
    let per_strip = q.elements_per_strip();
    let strips = q.microstrips();
    let mut cz = &f * f.adjoint() * Cplx::from(rho);
    for i in 0..strips {
        let mut noise = T::zero();
        for l in 0..per_strip {
            noise += coeffs[i * per_strip + l].norm_sqr();
        }
        cz[(i, i)] += Cplx::from(noise);
    }
    hermitianize(&mut cz);
    Ok(cz)
}

/// Averages a nearly Hermitian matrix with its adjoint in place, which also
/// zeroes the imaginary part of the diagonal exactly.
pub(crate) fn hermitianize<T: RealScalar>(m: &mut CMat<T>) {
    let half = T::of(0.5);
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Cplx::new(m[(i, i)].re, T::zero());
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * Cplx::from(half);
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Relative variance below which a microstrip counts as switched off. Exact
/// zeros cannot occur in floating point (a fully detuned element still has a
/// weight of order machine epsilon), so the guard compares each strip against
/// the strongest one; twenty orders of magnitude is far below any physically
/// meaningful imbalance and far above the epsilon-squared residue of a
/// detuned strip.
const OFF_STRIP_RELATIVE: f64 = 1e-20;

/// Extracts the diagonal variances of `C_z`, rejecting strips that are
/// switched off (non-finite, non-positive, or negligible next to the
/// strongest strip).
fn strip_variances<T: RealScalar>(cz: &CMat<T>) -> Result<RVec<T>> {
    let n = cz.nrows();
    let mut max_var = T::zero();
    for i in 0..n {
        let var = cz[(i, i)].re;
        if var.is_finite() && var > max_var {
            max_var = var;
        }
    }
    let floor = max_var * T::of(OFF_STRIP_RELATIVE);
    let mut vars = RVec::zeros(n);
    for i in 0..n {
        let var = cz[(i, i)].re;
        if !var.is_finite() || var <= floor {
            return Err(DmaError::SwitchedOffMicrostrip {
                index: i,
                variance: var.to64(),
            });
        }
        vars[i] = var;
    }
    Ok(vars)
}

/// Diagonal of the Bussgang gain, `g_i = sqrt(2 eta / pi) / sqrt([C_z]_ii)`.
///
/// A switched-off microstrip (non-positive variance, or negligible relative
/// to the strongest strip) is reported as an error rather than clamped.
pub fn bussgang_gain<T: RealScalar>(cz: &CMat<T>, eta: T) -> Result<RVec<T>> {
    let scale = (T::of(2.0) * eta / T::pi()).sqrt();
    let vars = strip_variances(cz)?;
    let mut gain = RVec::zeros(cz.nrows());
    for i in 0..cz.nrows() {
        gain[i] = scale / vars[i].sqrt();
    }
    Ok(gain)
}

/// Arcsine law for the quantizer output covariance:
/// `C_r = (2 eta / pi) * (asin(Re) + j asin(Im))` of the normalized input
/// correlations. The diagonal is `eta` exactly because the quantizer output
/// has constant modulus.
pub fn arcsin_law<T: RealScalar>(cz: &CMat<T>, eta: T) -> Result<CMat<T>> {
    let n = cz.nrows();
    let vars = strip_variances(cz)?;
    let mut inv_root = RVec::zeros(n);
    for i in 0..n {
        inv_root[i] = T::one() / vars[i].sqrt();
    }
    let scale = T::of(2.0) * eta / T::pi();
    let mut cr = CMat::zeros(n, n);
    for i in 0..n {
        cr[(i, i)] = Cplx::new(eta, T::zero());
        for j in (i + 1)..n {
            let norm = inv_root[i] * inv_root[j];
            let re = clamped_asin(cz[(i, j)].re * norm, i, j)?;
            let im = clamped_asin(cz[(i, j)].im * norm, i, j)?;
            let entry = Cplx::new(re * scale, im * scale);
            cr[(i, j)] = entry;
            cr[(j, i)] = entry.conj();
        }
    }
    Ok(cr)
}

fn clamped_asin<T: RealScalar>(x: T, row: usize, col: usize) -> Result<T> {
    let one = T::one();
    let slack = T::of(CORRELATION_CLAMP);
    if x > one + slack || x < -(one + slack) || !x.is_finite() {
        return Err(DmaError::CorrelationOutOfRange {
            row,
            col,
            value: x.to64(),
        });
    }
    Ok(x.clamp(-one, one).asin())
}

/// Distortion covariance `C_d = C_r - G C_z G` with `G` diagonal.
pub fn distortion_covariance<T: RealScalar>(
    cz: &CMat<T>,
    gain: &RVec<T>,
    eta: T,
) -> Result<CMat<T>> {
    if gain.len() != cz.nrows() {
        return Err(DmaError::DimensionMismatch(format!(
            "gain has {} entries for a {} x {} covariance",
            gain.len(),
            cz.nrows(),
            cz.ncols()
        )));
    }
    let cr = arcsin_law(cz, eta)?;
    let mut cd = cr;
    for i in 0..cz.nrows() {
        for j in 0..cz.ncols() {
            cd[(i, j)] -= cz[(i, j)] * Cplx::from(gain[i] * gain[j]);
        }
    }
    Ok(cd)
}

/// Cross-correlation between quantizer outputs and transmitted symbols,
/// `C_rx = sqrt(rho) * G (Q A) H`, an `N_d x K` matrix.
pub fn cross_correlation<T: RealScalar>(
    h: &CMat<T>,
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
    gain: &RVec<T>,
    rho: T,
) -> Result<CMat<T>> {
    let mut f = strip_channel(h, q, a)?;
    let root_rho = rho.sqrt();
    for i in 0..f.nrows() {
        let s = Cplx::from(gain[i] * root_rho);
        for k in 0..f.ncols() {
            f[(i, k)] *= s;
        }
    }
    Ok(f)
}

/// Full closed-form Bussgang characterization for one channel realization.
pub fn exact_stats<T: RealScalar>(
    h: &CMat<T>,
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
    rho: T,
    eta: T,
) -> Result<BussgangStats<T>> {
    let cz = compute_cz(h, q, a, rho)?;
    let gain = bussgang_gain(&cz, eta)?;
    let cr = arcsin_law(&cz, eta)?;
    let mut cd = cr.clone();
    for i in 0..cz.nrows() {
        for j in 0..cz.ncols() {
            cd[(i, j)] -= cz[(i, j)] * Cplx::from(gain[i] * gain[j]);
        }
    }
    Ok(BussgangStats { cz, gain, cr, cd })
}

/// Large-`K` approximation of the Bussgang statistics. With many users and
/// uniformly distributed weight phases, every microstrip output variance
/// concentrates around `N_e (rho K + 1) / 2`, making the gain and the
/// distortion covariance scalar and independent of the analog weights.
pub fn approx_large_k_stats<T: RealScalar>(
    users: usize,
    elements_per_strip: usize,
    rho: T,
    eta: T,
) -> LargeKStats<T> {
    let k = T::of(users as f64);
    let ne = T::of(elements_per_strip as f64);
    let pi = T::pi();
    let gain = (T::of(4.0) * eta / (pi * ne * (rho * k + T::one()))).sqrt();
    let distortion = eta * (T::one() - T::of(2.0) / pi);
    LargeKStats { gain, distortion }
}

/// A Monte Carlo estimate of one moment matrix together with a per-entry
/// standard error, so closed forms can be checked against it at a stated
/// confidence.
#[derive(Debug, Clone)]
pub struct MomentEstimate<T: RealScalar> {
    pub mean: CMat<T>,
    pub se: RMat<T>,
}

struct MomentAccumulator {
    sum: CMat<f64>,
    sum_sq: RMat<f64>,
}

impl MomentAccumulator {
    fn new(rows: usize, cols: usize) -> Self {
        Self {
            sum: CMat::zeros(rows, cols),
            sum_sq: RMat::zeros(rows, cols),
        }
    }

    #[inline]
    fn add(&mut self, r: usize, c: usize, w: Cplx<f64>) {
        self.sum[(r, c)] += w;
        self.sum_sq[(r, c)] += w.norm_sqr();
    }

    fn finish<T: RealScalar>(self, samples: usize) -> MomentEstimate<T> {
        let n = samples as f64;
        let mean = self.sum / Cplx::from(n);
        let se = RMat::from_fn(mean.nrows(), mean.ncols(), |r, c| {
            let var = (self.sum_sq[(r, c)] / n - mean[(r, c)].norm_sqr()).max(0.0);
            T::of((var / n).sqrt())
        });
        MomentEstimate {
            mean: mean.map(|v| Cplx::new(T::of(v.re), T::of(v.im))),
            se,
        }
    }
}

/// Monte Carlo estimates of the front-end second-order statistics for a
/// fixed channel: `C_z`, `C_r`, `C_rx`, and the Bussgang cross term
/// `E[d z^H]` (which the decomposition forces to zero).
#[derive(Debug, Clone)]
pub struct EmpiricalMoments<T: RealScalar> {
    pub cz: MomentEstimate<T>,
    pub cr: MomentEstimate<T>,
    pub crx: MomentEstimate<T>,
    pub dz: MomentEstimate<T>,
    pub samples: usize,
}

/// Simulates the front end `samples` times and accumulates the moment
/// estimates. The distortion uses the closed-form gain of the same scenario,
/// so `dz` directly probes Bussgang orthogonality. Internally runs in `f64`
/// regardless of `T` and is sequential, hence reproducible for a given seed.
pub fn empirical_covariances<T: RealScalar>(
    scenario: &Scenario<T>,
    q: &AnalogCombiner<T>,
    h: &CMat<T>,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalMoments<T>> {
    if samples == 0 {
        return Err(DmaError::InvalidConfig("need at least one sample".into()));
    }
    let dims = &scenario.dims;
    let strips = dims.microstrips;
    let per_strip = dims.elements_per_strip;
    let users = dims.users;
    let rho = scenario.rho.to64();
    let eta = scenario.eta.to64();

    // Work in f64 throughout the hot loop.
    let a = crate::signal::build_propagation_matrix(&scenario.geometry);
    let f = strip_channel(h, q, &a)?;
    let f64_of = |c: Cplx<T>| Cplx::new(c.re.to64(), c.im.to64());
    let f: CMat<f64> = f.map(f64_of);
    let coeffs: CVec<f64> = row_coefficients(q, &a).map(f64_of);
    let gain: Vec<f64> = {
        let cz = compute_cz(h, q, &a, scenario.rho)?;
        bussgang_gain(&cz, scenario.eta)?
            .iter()
            .map(|g| g.to64())
            .collect()
    };

    let root_rho = rho.sqrt();
    let level = (eta / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc_cz = MomentAccumulator::new(strips, strips);
    let mut acc_cr = MomentAccumulator::new(strips, strips);
    let mut acc_crx = MomentAccumulator::new(strips, users);
    let mut acc_dz = MomentAccumulator::new(strips, strips);
    let mut z = vec![Cplx::new(0.0f64, 0.0); strips];
    let mut r = vec![Cplx::new(0.0f64, 0.0); strips];
    let mut d = vec![Cplx::new(0.0f64, 0.0); strips];
    let mut x = vec![Cplx::new(0.0f64, 0.0); users];

    for _ in 0..samples {
        for xk in x.iter_mut() {
            *xk = sample_cn::<f64, _>(&mut rng);
        }
        for i in 0..strips {
            let mut acc = Cplx::new(0.0, 0.0);
            for (k, xk) in x.iter().enumerate() {
                acc += f[(i, k)] * xk;
            }
            acc *= root_rho;
            for l in 0..per_strip {
                let flat = i * per_strip + l;
                acc += coeffs[flat] * sample_cn::<f64, _>(&mut rng);
            }
            z[i] = acc;
            r[i] = Cplx::new(
                if acc.re >= 0.0 { level } else { -level },
                if acc.im >= 0.0 { level } else { -level },
            );
            d[i] = r[i] - z[i] * gain[i];
        }
        for i in 0..strips {
            for j in 0..strips {
                let zj = z[j].conj();
                acc_cz.add(i, j, z[i] * zj);
                acc_cr.add(i, j, r[i] * r[j].conj());
                acc_dz.add(i, j, d[i] * zj);
            }
            for (k, xk) in x.iter().enumerate() {
                acc_crx.add(i, k, r[i] * xk.conj());
            }
        }
    }

    Ok(EmpiricalMoments {
        cz: acc_cz.finish(samples),
        cr: acc_cr.finish(samples),
        crx: acc_crx.finish(samples),
        dz: acc_dz.finish(samples),
        samples,
    })
}

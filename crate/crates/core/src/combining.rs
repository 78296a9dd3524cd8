//! Digital combining and rate evaluation on top of the quantized front end.
//!
//! The Bussgang decomposition turns the quantized outputs into the linear
//! model `r = sqrt(rho) K_eff H x + K_eff n + d` with the effective map
//! `K_eff = G Q A`, so reception reduces to a small `N_d`-dimensional linear
//! estimation problem with colored noise `K_eff K_eff^H + C_d`. This module
//! builds the effective map, the LMMSE combiner, and the per-user SINDR
//! along three routes that must agree: the combiner definition, the
//! closed-form optimum, and a generalized eigenvector formulation. It also
//! provides the fully digital baseline rate used for comparisons.

use crate::error::DmaError;
use crate::quantization::{approx_large_k_stats, exact_stats};
use crate::scalar::RealScalar;
use crate::signal::{complex_gaussian_matrix, AnalogCombiner, PropagationMatrix};
use crate::{CMat, CVec, Cplx, RVec, Result};
use nalgebra::{Cholesky, SymmetricEigen};
use rand::Rng;

/// Per-user SINDR values together with the sum rate they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct SindrReport<T: RealScalar> {
    pub sindr: RVec<T>,
    /// Sum of `log2(1 + SINDR_k)` in bit/s/Hz.
    pub sum_rate: T,
}

impl<T: RealScalar> SindrReport<T> {
    /// Bundles SINDR values with their sum rate, validating non-negativity.
    pub fn from_sindr(sindr: RVec<T>) -> Result<Self> {
        let sum_rate = sum_rate(&sindr)?;
        Ok(Self { sindr, sum_rate })
    }
}

/// Effective channel map `K_eff = G Q A` as a dense `N_d x N` matrix. Rows
/// inherit the block support of `Q`; the map is filled block by block, so the
/// zero pattern is exact.
pub fn effective_map<T: RealScalar>(
    gain: &RVec<T>,
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
) -> Result<CMat<T>> {
    if gain.len() != q.microstrips() {
        return Err(DmaError::DimensionMismatch(format!(
            "{} gains for {} microstrips",
            gain.len(),
            q.microstrips()
        )));
    }
    if a.diag().len() != q.elements() {
        return Err(DmaError::DimensionMismatch(
            "propagation and combiner element counts differ".into(),
        ));
    }
    let per_strip = q.elements_per_strip();
    let mut k_eff = CMat::zeros(q.microstrips(), q.elements());
    for i in 0..q.microstrips() {
        let g = Cplx::from(gain[i]);
        for l in 0..per_strip {
            let flat = i * per_strip + l;
            k_eff[(i, flat)] = g * q.weight(flat).conj() * a.entry(flat);
        }
    }
    Ok(k_eff)
}

/// Covariance of everything a user's detector cannot use: noise through the
/// front end plus quantization distortion, `K_eff K_eff^H + C_d`.
fn noise_plus_distortion<T: RealScalar>(k_eff: &CMat<T>, cd: &CMat<T>) -> Result<CMat<T>> {
    let strips = k_eff.nrows();
    if cd.nrows() != strips || cd.ncols() != strips {
        return Err(DmaError::DimensionMismatch(format!(
            "distortion covariance is {} x {} for {} microstrips",
            cd.nrows(),
            cd.ncols(),
            strips
        )));
    }
    Ok(k_eff * k_eff.adjoint() + cd)
}

/// LMMSE combiner for the quantized outputs:
/// `W = sqrt(rho) (rho F F^H + K_eff K_eff^H + C_d)^{-1} F` with `F = K_eff H`.
/// Columns are the per-user combiners.
pub fn lmmse_combiner<T: RealScalar>(
    k_eff: &CMat<T>,
    h: &CMat<T>,
    cd: &CMat<T>,
    rho: T,
) -> Result<CMat<T>> {
    let f = k_eff * h;
    let mut s = noise_plus_distortion(k_eff, cd)?;
    s += &f * f.adjoint() * Cplx::from(rho);
    crate::quantization::hermitianize(&mut s);
    let chol = Cholesky::new(s).ok_or(DmaError::SingularSystem)?;
    Ok(chol.solve(&f) * Cplx::from(rho.sqrt()))
}

/// Per-user SINDR of an arbitrary combiner `W`, from the signal, residual
/// interference, noise, and distortion powers it passes. An all-zero column
/// reports SINDR zero by convention.
pub fn sindr_per_user<T: RealScalar>(
    w: &CMat<T>,
    k_eff: &CMat<T>,
    h: &CMat<T>,
    cd: &CMat<T>,
    rho: T,
) -> Result<RVec<T>> {
    let users = h.ncols();
    if w.ncols() != users || w.nrows() != k_eff.nrows() {
        return Err(DmaError::DimensionMismatch(format!(
            "combiner is {} x {}, expected {} x {}",
            w.nrows(),
            w.ncols(),
            k_eff.nrows(),
            users
        )));
    }
    let f = k_eff * h;
    let mut sindr = RVec::zeros(users);
    for k in 0..users {
        let wk = w.column(k);
        if wk.iter().all(|v| v.re == T::zero() && v.im == T::zero()) {
            continue;
        }
        let mut signal = T::zero();
        let mut interference = T::zero();
        for j in 0..users {
            let gain = wk.dotc(&f.column(j)).norm_sqr();
            if j == k {
                signal = rho * gain;
            } else {
                interference += rho * gain;
            }
        }
        let through_front = k_eff.adjoint() * wk;
        let noise = through_front.norm_squared();
        let distortion = wk.dotc(&(cd * wk)).re;
        let denom = interference + noise + distortion;
        if denom <= T::zero() {
            return Err(DmaError::ZeroSindrDenominator { user: k });
        }
        sindr[k] = signal / denom;
    }
    Ok(sindr)
}

/// Optimal per-user SINDR over all linear combiners:
/// `SINDR_k = rho f_k^H (rho (F F^H - f_k f_k^H) + K_eff K_eff^H + C_d)^{-1} f_k`.
pub fn optimal_sindr<T: RealScalar>(
    k_eff: &CMat<T>,
    h: &CMat<T>,
    cd: &CMat<T>,
    rho: T,
) -> Result<RVec<T>> {
    let f = k_eff * h;
    let base = {
        let mut b = noise_plus_distortion(k_eff, cd)?;
        b += &f * f.adjoint() * Cplx::from(rho);
        crate::quantization::hermitianize(&mut b);
        b
    };
    let users = h.ncols();
    let mut sindr = RVec::zeros(users);
    for k in 0..users {
        let fk = f.column(k).clone_owned();
        let mut t = base.clone();
        // Remove user k's own contribution to get the leave-one-out system.
        for i in 0..t.nrows() {
            for j in 0..t.ncols() {
                t[(i, j)] -= fk[i] * fk[j].conj() * Cplx::from(rho);
            }
        }
        crate::quantization::hermitianize(&mut t);
        let chol = Cholesky::new(t).ok_or(DmaError::SingularSystem)?;
        let solved = chol.solve(&fk);
        sindr[k] = rho * fk.dotc(&solved).re;
    }
    Ok(sindr)
}

/// Max-SINDR combiner for one user via the generalized eigenproblem: whitens
/// the interference-plus-noise covariance, takes the principal eigenvector of
/// the whitened signal covariance, and maps it back. Returns the combiner and
/// its SINDR (the principal eigenvalue).
pub fn max_sindr_eigen<T: RealScalar>(
    k_eff: &CMat<T>,
    h: &CMat<T>,
    cd: &CMat<T>,
    rho: T,
    user: usize,
) -> Result<(CVec<T>, T)> {
    let users = h.ncols();
    if user >= users {
        return Err(DmaError::InvalidConfig(format!(
            "user index {user} out of range for {users} users"
        )));
    }
    let f = k_eff * h;
    let fk = f.column(user).clone_owned();
    let mut d = noise_plus_distortion(k_eff, cd)?;
    for j in 0..users {
        if j == user {
            continue;
        }
        let fj = f.column(j);
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                d[(r, c)] += fj[r] * fj[c].conj() * Cplx::from(rho);
            }
        }
    }
    crate::quantization::hermitianize(&mut d);

    let eig = SymmetricEigen::new(d);
    let mut inv_root = eig.eigenvalues.clone();
    for v in inv_root.iter_mut() {
        if !v.is_finite() || *v <= T::zero() {
            return Err(DmaError::SingularSystem);
        }
        *v = T::one() / v.sqrt();
    }
    let u = &eig.eigenvectors;
    let strips = u.nrows();
    let mut d_inv_root = CMat::zeros(strips, strips);
    for r in 0..strips {
        for c in 0..strips {
            let mut acc = Cplx::new(T::zero(), T::zero());
            for m in 0..strips {
                acc += u[(r, m)] * Cplx::from(inv_root[m]) * u[(c, m)].conj();
            }
            d_inv_root[(r, c)] = acc;
        }
    }

    // Whitened signal covariance rho * (D^-1/2 f_k)(D^-1/2 f_k)^H.
    let v = &d_inv_root * &fk;
    let mut whitened = CMat::zeros(strips, strips);
    for r in 0..strips {
        for c in 0..strips {
            whitened[(r, c)] = v[r] * v[c].conj() * Cplx::from(rho);
        }
    }
    crate::quantization::hermitianize(&mut whitened);
    let sig_eig = SymmetricEigen::new(whitened);
    let mut best = 0;
    for i in 1..strips {
        if sig_eig.eigenvalues[i] > sig_eig.eigenvalues[best] {
            best = i;
        }
    }
    let principal = sig_eig.eigenvectors.column(best).clone_owned();
    let combiner = &d_inv_root * principal;
    Ok((combiner, sig_eig.eigenvalues[best]))
}

/// Sum rate `sum_k log2(1 + SINDR_k)` in bit/s/Hz.
pub fn sum_rate<T: RealScalar>(sindr: &RVec<T>) -> Result<T> {
    let mut rate = T::zero();
    for (k, s) in sindr.iter().enumerate() {
        if !s.is_finite() || *s < T::zero() {
            return Err(DmaError::InvalidSindr {
                user: k,
                value: s.to64(),
            });
        }
        rate += (T::one() + *s).ln() / T::ln_2();
    }
    Ok(rate)
}

/// Ergodic-sample rate of the fully digital baseline: `K` RF chains with
/// high-resolution ADCs, one receive antenna per chain, LMMSE reception,
/// no quantization penalty. Draws one `K x K` channel from the provided RNG.
pub fn fd_baseline_rate<T: RealScalar, R: Rng + ?Sized>(users: usize, rho: T, rng: &mut R) -> T {
    assert!(users >= 1, "baseline needs at least one user");
    let h = complex_gaussian_matrix::<T, _>(users, users, rng);
    let identity_map = CMat::identity(users, users);
    let cd = CMat::zeros(users, users);
    let sindr = optimal_sindr(&identity_map, &h, &cd, rho)
        .expect("regularized baseline system is positive definite");
    sum_rate(&sindr).expect("baseline SINDR values are non-negative")
}

/// Exact end-to-end evaluation of one analog configuration: Bussgang
/// statistics, effective map, optimal SINDR, sum rate.
pub fn exact_report<T: RealScalar>(
    h: &CMat<T>,
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
    rho: T,
    eta: T,
) -> Result<SindrReport<T>> {
    let stats = exact_stats(h, q, a, rho, eta)?;
    let k_eff = effective_map(&stats.gain, q, a)?;
    let sindr = optimal_sindr(&k_eff, h, &stats.cd, rho)?;
    SindrReport::from_sindr(sindr)
}

/// Evaluation of one analog configuration under the large-array scalar
/// statistics: identity-scaled quantizer gain and distortion, effective map,
/// optimal SINDR, sum rate. This is the closed-form rate the phase design
/// maximizes.
pub fn approx_report<T: RealScalar>(
    h: &CMat<T>,
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
    rho: T,
    eta: T,
) -> Result<SindrReport<T>> {
    let users = h.ncols();
    let strips = q.microstrips();
    let stats = approx_large_k_stats(users, q.elements_per_strip(), rho, eta);
    let gain = RVec::from_element(strips, stats.gain);
    let cd = CMat::identity(strips, strips) * Cplx::from(stats.distortion);
    let k_eff = effective_map(&gain, q, a)?;
    let sindr = optimal_sindr(&k_eff, h, &cd, rho)?;
    SindrReport::from_sindr(sindr)
}

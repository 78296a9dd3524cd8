//! Fractional-programming reformulation of the sum rate and its reduction to
//! a quadratic form in the analog weights.
//!
//! With auxiliary SINDR variables `gamma` and combining directions `Y`, the
//! sum rate becomes, per user,
//! `log2(1 + gamma_k) - gamma_k + (1 + gamma_k) c_k(Q, y_k)` where
//! `c_k = 2 Re(y_k^H K_eff h_k) - y_k^H (K_eff H H^H K_eff^H + (K_eff K_eff^H + C_d)/rho) y_k`.
//! At the optimal `gamma` and `Y` the reformulation is tight. Holding the
//! auxiliaries fixed and approximating the Bussgang gain by a scalar `g`
//! (large-array regime), the `Q`-dependent part collapses to
//! `2 Re(xi^H q) - q^H Psi q` over the stacked weight vector `q`, with `xi`
//! and `Psi` assembled here block by block. The selection map that embeds `q`
//! into `vec(Q^H)` is never materialized; its index algebra is folded into
//! the assembly loops (tests reproduce it explicitly as an oracle).

use crate::combining::optimal_sindr;
use crate::error::DmaError;
use crate::scalar::RealScalar;
use crate::signal::{AnalogCombiner, PropagationMatrix};
use crate::{CMat, CVec, Cplx, RVec, Result};
use nalgebra::Cholesky;

/// Auxiliary variables of the reformulated rate: per-user SINDR targets and
/// combining directions (one column per user).
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryVariables<T: RealScalar> {
    pub gamma: RVec<T>,
    pub y: CMat<T>,
}

/// Optimal SINDR targets for the current analog configuration, evaluated with
/// whatever gain/distortion statistics the caller passes (the optimizer uses
/// the scalar large-array ones so the later quadratic assembly is consistent).
pub fn update_gamma<T: RealScalar>(
    k_eff: &CMat<T>,
    h: &CMat<T>,
    cd: &CMat<T>,
    rho: T,
) -> Result<RVec<T>> {
    optimal_sindr(k_eff, h, cd, rho)
}

/// Optimal combining directions
/// `y_k = (F F^H + (K_eff K_eff^H + C_d)/rho)^{-1} f_k` with `F = K_eff H`.
/// One factorization serves every user.
pub fn update_y<T: RealScalar>(
    k_eff: &CMat<T>,
    h: &CMat<T>,
    cd: &CMat<T>,
    rho: T,
) -> Result<CMat<T>> {
    let f = k_eff * h;
    let mut s = &f * f.adjoint();
    let inv_rho = Cplx::from(T::one() / rho);
    let noise = k_eff * k_eff.adjoint() + cd;
    s += noise * inv_rho;
    crate::quantization::hermitianize(&mut s);
    let chol = Cholesky::new(s).ok_or(DmaError::SingularSystem)?;
    Ok(chol.solve(&f))
}

/// Reformulated sum rate in bit/s/Hz for a given analog configuration and
/// auxiliary variables. Equals the true rate (with the same statistics) when
/// the auxiliaries are at their optimum, and never exceeds it in `Y`.
pub fn reformulated_rate<T: RealScalar>(
    q: &AnalogCombiner<T>,
    aux: &AuxiliaryVariables<T>,
    h: &CMat<T>,
    a: &PropagationMatrix<T>,
    gain: &RVec<T>,
    cd: &CMat<T>,
    rho: T,
) -> Result<T> {
    let k_eff = crate::combining::effective_map(gain, q, a)?;
    surrogate_with_map(&k_eff, aux, h, cd, rho, false)
}

/// Same quantity in natural-log units. The gamma update is an exact block
/// maximization of this form, which is what the per-step monotonicity
/// diagnostics track.
pub(crate) fn surrogate_with_map<T: RealScalar>(
    k_eff: &CMat<T>,
    aux: &AuxiliaryVariables<T>,
    h: &CMat<T>,
    cd: &CMat<T>,
    rho: T,
    nats: bool,
) -> Result<T> {
    let users = h.ncols();
    if aux.gamma.len() != users || aux.y.ncols() != users || aux.y.nrows() != k_eff.nrows() {
        return Err(DmaError::DimensionMismatch(
            "auxiliary variables do not match the system dimensions".into(),
        ));
    }
    let f = k_eff * h;
    let mut s = &f * f.adjoint();
    let inv_rho = Cplx::from(T::one() / rho);
    s += (k_eff * k_eff.adjoint() + cd) * inv_rho;
    crate::quantization::hermitianize(&mut s);

    let mut total = T::zero();
    for k in 0..users {
        let gamma = aux.gamma[k];
        if gamma < T::zero() {
            return Err(DmaError::InvalidSindr {
                user: k,
                value: gamma.to64(),
            });
        }
        let yk = aux.y.column(k);
        let fk = f.column(k);
        let linear = T::of(2.0) * yk.dotc(&fk).re;
        let quad = yk.dotc(&(&s * yk)).re;
        let c = linear - quad;
        let log_term = if nats {
            (T::one() + gamma).ln()
        } else {
            (T::one() + gamma).ln() / T::ln_2()
        };
        total += log_term - gamma + (T::one() + gamma) * c;
    }
    Ok(total)
}

/// The quadratic form `2 Re(xi^H q) - q^H Psi q` that the reformulated rate
/// induces on the stacked analog weights once the auxiliaries are frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm<T: RealScalar> {
    /// Linear coefficient, length `N`.
    pub xi: CVec<T>,
    /// Hermitian positive semidefinite quadratic coefficient, `N x N`.
    pub psi: CMat<T>,
}

/// Assembles `xi` and `Psi` from the channel, the propagation phases, the
/// scalar gain approximation, and the frozen auxiliaries.
///
/// Entrywise, with `i(n)` the strip owning element `n` and
/// `S = A (H H^H + I/rho) A^H`:
/// `xi_n = g a_n sum_k (1 + gamma_k) conj(y_{k,i(n)}) h_{n,k}` and
/// `Psi_{n m} = W_{i(n) i(m)} S_{n m}` where
/// `W = g^2 sum_k (1 + gamma_k) conj(y_k) y_k^T`.
pub fn assemble_xi_psi<T: RealScalar>(
    h: &CMat<T>,
    a: &PropagationMatrix<T>,
    gain: T,
    aux: &AuxiliaryVariables<T>,
    rho: T,
) -> Result<QuadraticForm<T>> {
    let n = h.nrows();
    let users = h.ncols();
    let strips = aux.y.nrows();
    if aux.gamma.len() != users || aux.y.ncols() != users {
        return Err(DmaError::DimensionMismatch(
            "auxiliary variables do not match the user count".into(),
        ));
    }
    if strips == 0 || !n.is_multiple_of(strips) || a.diag().len() != n {
        return Err(DmaError::DimensionMismatch(format!(
            "cannot split {n} elements across {strips} microstrips"
        )));
    }
    let per_strip = n / strips;

    // User-weighted direction outer product W (strips x strips).
    let mut w: CMat<T> = CMat::zeros(strips, strips);
    let g2 = gain * gain;
    for k in 0..users {
        let scale = (T::one() + aux.gamma[k]) * g2;
        let yk = aux.y.column(k);
        for i in 0..strips {
            let yi = yk[i].conj() * Cplx::from(scale);
            for j in 0..strips {
                w[(i, j)] += yi * yk[j];
            }
        }
    }

    // S = A (H H^H + I/rho) A^H.
    let mut hh = h * h.adjoint();
    crate::quantization::hermitianize(&mut hh);
    let inv_rho = T::one() / rho;
    for d in 0..n {
        hh[(d, d)] += Cplx::from(inv_rho);
    }
    let mut psi: CMat<T> = CMat::zeros(n, n);
    for row in 0..n {
        let i = row / per_strip;
        let ar = a.entry(row);
        for col in 0..n {
            let j = col / per_strip;
            psi[(row, col)] = w[(i, j)] * ar * hh[(row, col)] * a.entry(col).conj();
        }
    }
    crate::quantization::hermitianize(&mut psi);

    let mut xi: CVec<T> = CVec::zeros(n);
    for row in 0..n {
        let i = row / per_strip;
        let mut acc = Cplx::new(T::zero(), T::zero());
        for k in 0..users {
            let scale = (T::one() + aux.gamma[k]) * gain;
            acc += aux.y[(i, k)].conj() * h[(row, k)] * Cplx::from(scale);
        }
        xi[row] = acc * a.entry(row);
    }

    Ok(QuadraticForm { xi, psi })
}

/// Evaluates `2 Re(xi^H q) - q^H Psi q` for a stacked weight vector.
pub fn objective_q<T: RealScalar>(weights: &CVec<T>, form: &QuadraticForm<T>) -> T {
    let linear = T::of(2.0) * form.xi.dotc(weights).re;
    let quad = weights.dotc(&(&form.psi * weights)).re;
    linear - quad
}

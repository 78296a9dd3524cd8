//! Multi-user uplink signal model for a dynamic metasurface antenna front end.
//!
//! `K` single-antenna users transmit toward an antenna of `N_d` microstrips
//! with `N_e` metamaterial elements each, `N = N_d * N_e` elements total. The
//! element-level receive vector is `y = sqrt(rho) * H x + n` with i.i.d. unit
//! variance complex Gaussian channel, symbols, and noise. Inside microstrip
//! `i`, the signal captured by element `l` travels a distance `l_{i,l}` to the
//! output port and accumulates the phase `beta * l_{i,l}`; the element itself
//! applies a tunable weight confined to the Lorentzian circle
//! `q = (j + e^{j phi}) / 2`. The microstrip output is therefore
//! `z = Q A y`, with `A` the diagonal propagation matrix and `Q` holding one
//! conjugated weight block per row.
//!
//! `Q` is kept as phases plus block layout; materializing it as a dense
//! `N_d x N` matrix is only ever done by test oracles.

use crate::error::DmaError;
use crate::scalar::RealScalar;
use crate::{CMat, CVec, Cplx, RMat, RVec, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Electrical length per element spacing used when no geometry is given:
/// `beta * d_e = 2 pi / 5`, i.e. five elements per guided wavelength.
pub const DEFAULT_BETA_DE: f64 = 2.0 * std::f64::consts::PI / 5.0;

/// Problem dimensions: users, microstrips, and elements per microstrip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemDims {
    /// Number of single-antenna users `K`.
    pub users: usize,
    /// Number of microstrips `N_d` (one RF chain each).
    pub microstrips: usize,
    /// Number of metamaterial elements per microstrip `N_e`.
    pub elements_per_strip: usize,
    /// RF chains of the fully digital baseline; defaults to `users`.
    pub rf_chains: usize,
}

impl SystemDims {
    /// Creates validated dimensions with the baseline RF chain count equal to
    /// the number of users.
    pub fn new(users: usize, microstrips: usize, elements_per_strip: usize) -> Result<Self> {
        if users == 0 || microstrips == 0 || elements_per_strip == 0 {
            return Err(DmaError::InvalidConfig(format!(
                "users, microstrips, and elements per strip must all be at least 1 \
                 (got {users}, {microstrips}, {elements_per_strip})"
            )));
        }
        Ok(Self {
            users,
            microstrips,
            elements_per_strip,
            rf_chains: users,
        })
    }

    /// Overrides the baseline RF chain count.
    pub fn with_rf_chains(mut self, rf_chains: usize) -> Result<Self> {
        if rf_chains == 0 {
            return Err(DmaError::InvalidConfig(
                "baseline needs at least one RF chain".into(),
            ));
        }
        self.rf_chains = rf_chains;
        Ok(self)
    }

    /// Total element count `N = N_d * N_e`.
    #[inline]
    pub fn elements(&self) -> usize {
        self.microstrips * self.elements_per_strip
    }

    /// Flat element index of element `l` on microstrip `i` (both zero-based).
    #[inline]
    pub fn flat(&self, strip: usize, element: usize) -> usize {
        strip * self.elements_per_strip + element
    }

    /// Microstrip owning the flat element index.
    #[inline]
    pub fn strip_of(&self, flat: usize) -> usize {
        flat / self.elements_per_strip
    }
}

/// Per-element travel distances to the output port plus the waveguide
/// wavenumber `beta`. Distances are strictly increasing along each strip.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrostripGeometry<T: RealScalar> {
    distances: RMat<T>,
    wavenumber: T,
}

impl<T: RealScalar> MicrostripGeometry<T> {
    /// Builds a geometry from explicit distances (`N_d x N_e`, increasing
    /// along each row) and a positive wavenumber.
    pub fn new(distances: RMat<T>, wavenumber: T) -> Result<Self> {
        if wavenumber <= T::zero() {
            return Err(DmaError::InvalidConfig(format!(
                "wavenumber must be positive, got {}",
                wavenumber.to64()
            )));
        }
        for i in 0..distances.nrows() {
            let mut prev = T::zero();
            for l in 0..distances.ncols() {
                let d = distances[(i, l)];
                if d <= prev {
                    return Err(DmaError::InvalidConfig(format!(
                        "distances must be positive and strictly increasing along \
                         each microstrip; violated at strip {i}, element {l}"
                    )));
                }
                prev = d;
            }
        }
        Ok(Self {
            distances,
            wavenumber,
        })
    }

    /// Uniform spacing `d_e = 1` with the electrical length `beta * d_e`
    /// given directly, so element `l` (one-based) sits at phase
    /// `l * beta_de`.
    pub fn uniform(dims: &SystemDims, beta_de: T) -> Result<Self> {
        let distances = RMat::from_fn(dims.microstrips, dims.elements_per_strip, |_, l| {
            T::of((l + 1) as f64)
        });
        Self::new(distances, beta_de)
    }

    /// Travel distance of element `l` on strip `i`.
    #[inline]
    pub fn distance(&self, strip: usize, element: usize) -> T {
        self.distances[(strip, element)]
    }

    /// Waveguide wavenumber `beta`.
    #[inline]
    pub fn wavenumber(&self) -> T {
        self.wavenumber
    }

    /// Full distance matrix (`N_d x N_e`).
    #[inline]
    pub fn distances(&self) -> &RMat<T> {
        &self.distances
    }
}

/// Diagonal propagation matrix `A`: entry `e^{j beta l_{i,l}}` per element,
/// stored as its unit-modulus diagonal in flat element order.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix<T: RealScalar> {
    diag: CVec<T>,
}

impl<T: RealScalar> PropagationMatrix<T> {
    /// Diagonal in flat element order.
    #[inline]
    pub fn diag(&self) -> &CVec<T> {
        &self.diag
    }

    /// Diagonal entry for a flat element index.
    #[inline]
    pub fn entry(&self, flat: usize) -> Cplx<T> {
        self.diag[flat]
    }
}

/// Builds the propagation matrix from the geometry.
pub fn build_propagation_matrix<T: RealScalar>(
    geometry: &MicrostripGeometry<T>,
) -> PropagationMatrix<T> {
    let strips = geometry.distances.nrows();
    let per_strip = geometry.distances.ncols();
    let beta = geometry.wavenumber;
    let mut diag = CVec::zeros(strips * per_strip);
    for i in 0..strips {
        for l in 0..per_strip {
            let phase = beta * geometry.distance(i, l);
            diag[i * per_strip + l] = Cplx::new(phase.cos(), phase.sin());
        }
    }
    PropagationMatrix { diag }
}

/// Analog combiner `Q`: one Lorentzian weight per element, stored as phases.
///
/// Row `i` of `Q` carries the conjugated weights of microstrip `i` on its own
/// element block and zeros elsewhere, so `z = Q A y` just sums each strip.
/// Phases are wrapped into `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogCombiner<T: RealScalar> {
    phases: RVec<T>,
    microstrips: usize,
    elements_per_strip: usize,
}

impl<T: RealScalar> AnalogCombiner<T> {
    /// Creates a combiner from per-element phases in flat order.
    pub fn from_phases(dims: &SystemDims, phases: RVec<T>) -> Result<Self> {
        if phases.len() != dims.elements() {
            return Err(DmaError::DimensionMismatch(format!(
                "expected {} phases, got {}",
                dims.elements(),
                phases.len()
            )));
        }
        let wrapped = phases.map(wrap_phase);
        Ok(Self {
            phases: wrapped,
            microstrips: dims.microstrips,
            elements_per_strip: dims.elements_per_strip,
        })
    }

    /// Draws phases independently and uniformly from `[0, 2 pi)`.
    pub fn random<R: Rng + ?Sized>(dims: &SystemDims, rng: &mut R) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let phases = RVec::from_fn(dims.elements(), |_, _| T::of(rng.random::<f64>() * two_pi));
        Self::from_phases(dims, phases).expect("length matches by construction")
    }

    /// Number of microstrips.
    #[inline]
    pub fn microstrips(&self) -> usize {
        self.microstrips
    }

    /// Elements per microstrip.
    #[inline]
    pub fn elements_per_strip(&self) -> usize {
        self.elements_per_strip
    }

    /// Total element count.
    #[inline]
    pub fn elements(&self) -> usize {
        self.phases.len()
    }

    /// Stored phases, wrapped into `[0, 2 pi)`.
    #[inline]
    pub fn phases(&self) -> &RVec<T> {
        &self.phases
    }

    /// Lorentzian weight of one element: `q = (j + e^{j phi}) / 2`.
    #[inline]
    pub fn weight(&self, flat: usize) -> Cplx<T> {
        lorentzian_weight(self.phases[flat])
    }

    /// All weights in flat element order.
    pub fn weights(&self) -> CVec<T> {
        CVec::from_fn(self.phases.len(), |n, _| self.weight(n))
    }
}

/// Maps a phase to the Lorentzian circle: `(j + e^{j phi}) / 2`, the circle
/// of radius 1/2 centered at `j / 2`. `phi = pi/2` turns the element fully
/// on (`q = j`); `phi = 3 pi/2` switches it off (`q = 0`).
#[inline]
pub fn lorentzian_weight<T: RealScalar>(phase: T) -> Cplx<T> {
    let half = T::of(0.5);
    Cplx::new(phase.cos() * half, (T::one() + phase.sin()) * half)
}

/// Wraps a phase into `[0, 2 pi)`.
#[inline]
pub fn wrap_phase<T: RealScalar>(phase: T) -> T {
    let two_pi = T::two_pi();
    let wrapped = phase - two_pi * (phase / two_pi).floor();
    // Guard against `phase` being a tiny negative value whose wrap rounds to
    // exactly 2 pi.
    if wrapped >= two_pi {
        wrapped - two_pi
    } else {
        wrapped
    }
}

/// One simulation configuration: dimensions, SNR, quantizer scale, geometry.
#[derive(Debug, Clone)]
pub struct Scenario<T: RealScalar> {
    pub dims: SystemDims,
    /// Linear transmit SNR `rho`.
    pub rho: T,
    /// Quantizer output scale `eta`.
    pub eta: T,
    pub geometry: MicrostripGeometry<T>,
}

impl<T: RealScalar> Scenario<T> {
    /// Scenario at a linear SNR with default quantizer scale and uniform
    /// geometry.
    pub fn new(dims: SystemDims, rho: T) -> Result<Self> {
        if rho <= T::zero() {
            return Err(DmaError::InvalidConfig(format!(
                "SNR must be positive, got {}",
                rho.to64()
            )));
        }
        Ok(Self {
            dims,
            rho,
            eta: T::one(),
            geometry: MicrostripGeometry::uniform(&dims, T::of(DEFAULT_BETA_DE))?,
        })
    }

    /// Scenario at an SNR given in dB: `rho = 10^(dB / 10)`.
    pub fn from_snr_db(dims: SystemDims, snr_db: f64) -> Result<Self> {
        Self::new(dims, T::of(10f64.powf(snr_db / 10.0)))
    }

    /// Replaces the quantizer scale.
    pub fn with_eta(mut self, eta: T) -> Result<Self> {
        if eta <= T::zero() {
            return Err(DmaError::InvalidConfig(format!(
                "eta must be positive, got {}",
                eta.to64()
            )));
        }
        self.eta = eta;
        Ok(self)
    }

    /// Replaces the geometry.
    pub fn with_geometry(mut self, geometry: MicrostripGeometry<T>) -> Result<Self> {
        if geometry.distances.nrows() != self.dims.microstrips
            || geometry.distances.ncols() != self.dims.elements_per_strip
        {
            return Err(DmaError::DimensionMismatch(
                "geometry shape does not match the system dimensions".into(),
            ));
        }
        self.geometry = geometry;
        Ok(self)
    }
}

/// One draw of a circularly symmetric complex Gaussian with unit variance:
/// real and imaginary parts are independent `N(0, 1/2)`.
#[inline]
pub fn sample_cn<T: RealScalar, R: Rng + ?Sized>(rng: &mut R) -> Cplx<T> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Cplx::new(T::of(re * scale), T::of(im * scale))
}

/// Matrix with i.i.d. unit-variance complex Gaussian entries, drawn in
/// column-major order so the stream is reproducible for a given RNG state.
pub fn complex_gaussian_matrix<T: RealScalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> CMat<T> {
    let mut m = CMat::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = sample_cn(rng);
        }
    }
    m
}

/// Draws the `N x K` uplink channel with i.i.d. unit-variance complex
/// Gaussian entries.
pub fn generate_channel<T: RealScalar, R: Rng + ?Sized>(dims: &SystemDims, rng: &mut R) -> CMat<T> {
    complex_gaussian_matrix(dims.elements(), dims.users, rng)
}

/// Microstrip outputs `z = Q A y` for one element-level receive vector,
/// computed block by block without materializing `Q`.
pub fn frontend_output<T: RealScalar>(
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
    y: &CVec<T>,
) -> Result<CVec<T>> {
    let n = q.elements();
    if a.diag.len() != n || y.len() != n {
        return Err(DmaError::DimensionMismatch(format!(
            "combiner has {n} elements, propagation has {}, input has {}",
            a.diag.len(),
            y.len()
        )));
    }
    let per_strip = q.elements_per_strip;
    let mut z = CVec::zeros(q.microstrips);
    for i in 0..q.microstrips {
        let mut acc = Cplx::new(T::zero(), T::zero());
        for l in 0..per_strip {
            let flat = i * per_strip + l;
            acc += q.weight(flat).conj() * a.diag[flat] * y[flat];
        }
        z[i] = acc;
    }
    Ok(z)
}

/// Combined per-element row coefficients `conj(q_n) * a_n`, i.e. the nonzero
/// entries of `Q A` in flat order. Shared by the second-order statistics and
/// the effective channel construction.
pub(crate) fn row_coefficients<T: RealScalar>(
    q: &AnalogCombiner<T>,
    a: &PropagationMatrix<T>,
) -> CVec<T> {
    CVec::from_fn(q.elements(), |n, _| q.weight(n).conj() * a.diag[n])
}

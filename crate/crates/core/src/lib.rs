//! Uplink reception through a dynamic metasurface antenna (DMA) with one-bit
//! ADCs, and the combiner optimization that goes with it.
//!
//! A DMA packs `N = N_d * N_e` radiating elements into `N_d` microstrips. Each
//! microstrip feeds a single RF chain, so the antenna applies an analog
//! combiner whose weights are constrained to a Lorentzian circle, and each RF
//! chain output is sampled by a pair of one-bit ADCs. This crate models that
//! front end, characterizes the quantized output through the Bussgang
//! decomposition, evaluates LMMSE reception, and optimizes the analog weights
//! for sum rate with a semidefinite-relaxation solver and a cheaper
//! eigenvector heuristic. A fully digital receiver with one high-resolution RF
//! chain per user serves as the baseline, both in rate and in consumed power.
//!
//! All numerics are generic over the real scalar type through [`RealScalar`]
//! (`f32` or `f64`); the crate root exports `f64` aliases for the common case.
//!
//! # Example
//!
//! ```
//! use dma_rx::{
//!     combining::exact_report,
//!     signal::{build_propagation_matrix, generate_channel, AnalogCombiner, Scenario, SystemDims},
//! };
//! use rand::SeedableRng;
//!
//! let dims = SystemDims::new(2, 4, 8).unwrap();
//! let scenario = Scenario::from_snr_db(dims, 10.0).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let h = generate_channel::<f64, _>(&dims, &mut rng);
//! let a = build_propagation_matrix(&scenario.geometry);
//! let q = AnalogCombiner::random(&dims, &mut rng);
//! let report = exact_report(&h, &q, &a, scenario.rho, scenario.eta).unwrap();
//! assert!(report.sum_rate > 0.0);
//! ```

pub mod combining;
pub mod error;
pub mod optimizer;
pub mod power;
pub mod quantization;
pub mod scalar;
pub mod signal;
pub mod sweep;

pub use error::DmaError;
pub use scalar::RealScalar;

/// Complex number over the crate's real scalar.
pub type Cplx<T> = num_complex::Complex<T>;
/// Dynamically sized complex matrix.
pub type CMat<T> = nalgebra::DMatrix<Cplx<T>>;
/// Dynamically sized complex column vector.
pub type CVec<T> = nalgebra::DVector<Cplx<T>>;
/// Dynamically sized real matrix.
pub type RMat<T> = nalgebra::DMatrix<T>;
/// Dynamically sized real column vector.
pub type RVec<T> = nalgebra::DVector<T>;

/// Default-precision aliases; the CLI and the experiment harness use these.
pub type Cplx64 = Cplx<f64>;
pub type CMat64 = CMat<f64>;
pub type CVec64 = CVec<f64>;
pub type RMat64 = RMat<f64>;
pub type RVec64 = RVec<f64>;

/// Crate-wide result type.
pub type Result<V> = std::result::Result<V, DmaError>;

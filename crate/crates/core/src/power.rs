//! Front-end power consumption models for the metasurface receiver and the
//! fully digital baseline.
//!
//! Every RF chain carries two ADCs (in-phase and quadrature), and flash ADC
//! power scales as `f_s * FOM * 2^b` with the sampling rate, a
//! figure-of-merit energy per conversion step, and the bit depth. The
//! metasurface front end adds a small tuning cost per metamaterial element
//! but needs only one coarse pair of ADCs per microstrip; the baseline pays
//! for a high-resolution pair on every chain.

use crate::scalar::RealScalar;
use crate::signal::SystemDims;

/// Component powers and converter parameters, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModelParams<T: RealScalar> {
    /// Power of one RF chain (oscillator, mixer, filters) in watts.
    pub rf_chain_power_w: T,
    /// ADC sampling rate in hertz.
    pub sampling_rate_hz: T,
    /// ADC figure of merit in joules per conversion step.
    pub adc_figure_of_merit_j: T,
    /// Tuning power of one metamaterial element in watts.
    pub element_power_w: T,
    /// Bit depth of the fully digital baseline's ADCs.
    pub fd_adc_bits: u32,
}

impl<T: RealScalar> Default for PowerModelParams<T> {
    /// 60 mW RF chains, 1 GS/s converters at 500 fJ per step, 0.1 mW
    /// elements, and a 10-bit baseline.
    fn default() -> Self {
        Self {
            rf_chain_power_w: T::of(60e-3),
            sampling_rate_hz: T::of(1e9),
            adc_figure_of_merit_j: T::of(500e-15),
            element_power_w: T::of(0.1e-3),
            fd_adc_bits: 10,
        }
    }
}

impl<T: RealScalar> PowerModelParams<T> {
    /// Power of a single `bits`-bit ADC: `f_s * FOM * 2^bits`, in watts.
    pub fn adc_power_w(&self, bits: u32) -> T {
        self.sampling_rate_hz * self.adc_figure_of_merit_j * T::of((1u64 << bits) as f64)
    }

    /// Front-end power of the metasurface receiver: every element pays its
    /// tuning cost and every microstrip drives one RF chain with a pair of
    /// one-bit ADCs.
    pub fn dma_front_end_power_w(&self, dims: &SystemDims) -> T {
        let elements = T::of(dims.elements() as f64);
        let strips = T::of(dims.microstrips as f64);
        elements * self.element_power_w
            + strips * (self.rf_chain_power_w + T::of(2.0) * self.adc_power_w(1))
    }

    /// Front-end power of a fully digital receiver with `rf_chains` chains,
    /// each with a pair of full-resolution ADCs.
    pub fn fully_digital_power_w(&self, rf_chains: usize) -> T {
        T::of(rf_chains as f64)
            * (self.rf_chain_power_w + T::of(2.0) * self.adc_power_w(self.fd_adc_bits))
    }

    /// Metasurface front-end power as a fraction of the baseline's, the
    /// baseline using `dims.rf_chains` chains.
    pub fn dma_power_fraction(&self, dims: &SystemDims) -> T {
        self.dma_front_end_power_w(dims) / self.fully_digital_power_w(dims.rf_chains)
    }
}

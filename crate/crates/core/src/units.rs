//! Physical constants and unit conversions shared by the modules.

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Time-bandwidth product of a transform-limited Gaussian (intensity FWHMs).
pub const GAUSSIAN_TBP: f64 = 2.0 * std::f64::consts::LN_2 / std::f64::consts::PI;

/// ns⁻¹ → ps⁻¹.
#[inline]
pub fn per_ns_to_per_ps(rate: f64) -> f64 {
    rate * 1e-3
}

/// GHz → THz, the frequency unit conjugate to picoseconds.
#[inline]
pub fn ghz_to_thz(f: f64) -> f64 {
    f * 1e-3
}

/// Pulse period in picoseconds for a repetition rate in MHz.
#[inline]
pub fn period_ps(rep_rate_mhz: f64) -> f64 {
    1e6 / rep_rate_mhz
}

/// Optical frequency in GHz for a vacuum wavelength in nm.
#[inline]
pub fn optical_frequency_ghz(wavelength_nm: f64) -> f64 {
    SPEED_OF_LIGHT / (wavelength_nm * 1e-9) * 1e-9
}

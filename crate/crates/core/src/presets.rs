//! Reference operating points.
//!
//! Couplings quoted in MHz are converted to amplitude rates with a factor
//! `2π` ([`coupling_from_mhz`]). The reference devices put every tooth at
//! `g = 2π·Δ` µs⁻¹, i.e. a coupling equal to the comb spacing when both are
//! expressed in MHz, and set `κ` to the analytic matching value.

use std::f64::consts::TAU;

use crate::analytics;
use crate::model::{build_uniform_comb, Centering, CommonResonator, DeviceConfig, Pulse};

/// Pulse power FWHM in units of the comb period `1/Δ`.
pub const PULSE_WIDTH_PERIODS: f64 = 0.26;

/// Default leading margin before the pulse peak, in pulse widths.
pub const LEAD_FWHMS: f64 = 5.0;

/// Open-slit configurations use this multiple of the matched `κ`.
pub const OPEN_KAPPA_MULTIPLIER: f64 = 10.0;

/// Amplitude rate (µs⁻¹) for a coupling quoted as a frequency in MHz.
pub fn coupling_from_mhz(g_mhz: f64) -> f64 {
    TAU * g_mhz
}

/// Gaussian probe of width `0.26/Δ`, peaked `5·FWHM` after `t = 0`.
pub fn reference_pulse(spacing_mhz: f64) -> Pulse {
    let fwhm = PULSE_WIDTH_PERIODS / spacing_mhz;
    Pulse::gaussian(1.0, LEAD_FWHMS * fwhm, fwhm)
}

/// `n` identical teeth spaced by `spacing_mhz`, `g = 2π·Δ`, `κ = κ₀`.
pub fn reference_device(n: usize, spacing_mhz: f64, gamma: f64, gamma_r: f64) -> DeviceConfig {
    let g = coupling_from_mhz(spacing_mhz);
    let minis = build_uniform_comb(n, spacing_mhz, g, gamma, Centering::ToothAtCenter)
        .expect("positive spacing and tooth count");
    let kappa = analytics::kappa_matched_raw(g, spacing_mhz, gamma_r);
    DeviceConfig::new(minis, CommonResonator::new(kappa, 0.0, gamma_r))
}

/// Five teeth at `Δ = g = 4` MHz with `γ = γ_r = 10⁻³` µs⁻¹.
pub fn helium_device() -> DeviceConfig {
    reference_device(5, 4.0, 1e-3, 1e-3)
}

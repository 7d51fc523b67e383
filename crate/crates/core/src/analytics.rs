//! Closed-form estimates for a comb in a common cavity.
//!
//! All formulas take raw numbers in the crate's units (spacing in MHz, rates
//! in µs⁻¹) with no `2π` inserted; see [`crate::model`].

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::DeviceConfig;

/// Ensemble averages of a comb.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombSummary {
    /// Mean coupling `⟨g_n⟩`, µs⁻¹.
    pub g_bar: f64,
    /// Mean tooth decay `⟨γ_n⟩`, µs⁻¹.
    pub gamma_bar: f64,
    /// Mean adjacent spacing `⟨Δ_{n+1} − Δ_n⟩`, MHz.
    pub delta_bar: f64,
    pub n_teeth: usize,
    /// Storage time `1/Δ`, µs.
    pub t1: f64,
}

impl CombSummary {
    pub fn new(g_bar: f64, gamma_bar: f64, delta_bar: f64, n_teeth: usize) -> Self {
        Self {
            g_bar,
            gamma_bar,
            delta_bar,
            n_teeth,
            t1: 1.0 / delta_bar,
        }
    }
}

/// Average coupling, decay and spacing of the device's comb.
pub fn summarize_comb(config: &DeviceConfig) -> Result<CombSummary, Error> {
    let n = config.n_teeth();
    if n < 2 {
        return Err(Error::SpacingUnavailable { n_teeth: n });
    }
    let d = config.sorted_detunings();
    let delta_bar = (d[n - 1] - d[0]) / (n - 1) as f64;
    let g_bar = config.minis.iter().map(|m| m.coupling).sum::<f64>() / n as f64;
    let gamma_bar = config.minis.iter().map(|m| m.decay_rate).sum::<f64>() / n as f64;
    Ok(CombSummary::new(g_bar, gamma_bar, delta_bar, n))
}

/// Efficiency at the matched coupling,
/// `η = [1 + 2γ_rΔ/g²]⁻² · exp(−2γ/Δ)`.
pub fn eta_matched(s: &CombSummary, gamma_r: f64) -> f64 {
    let impedance = 1.0 + 2.0 * gamma_r * s.delta_bar / (s.g_bar * s.g_bar);
    (-2.0 * s.gamma_bar / s.delta_bar).exp() / (impedance * impedance)
}

/// First-order expansion `1 − 4γ_rΔ/g² − 2γ/Δ` of [`eta_matched`] for small losses.
pub fn eta_matched_first_order(s: &CombSummary, gamma_r: f64) -> f64 {
    1.0 - 4.0 * gamma_r * s.delta_bar / (s.g_bar * s.g_bar) - 2.0 * s.gamma_bar / s.delta_bar
}

/// Result of [`eta_general`]; the estimate is not clamped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralEstimate {
    pub eta: f64,
    /// Set when `eta > 1`, i.e. the estimate is used far from matching.
    pub above_unity: bool,
}

/// Efficiency at arbitrary coupling, `η = g⁴/(Δ²κ²) · exp(−2γT₁)`.
pub fn eta_general(s: &CombSummary, kappa: f64) -> GeneralEstimate {
    let ratio = s.g_bar * s.g_bar / (s.delta_bar * kappa);
    let eta = ratio * ratio * (-2.0 * s.gamma_bar * s.t1).exp();
    GeneralEstimate {
        eta,
        above_unity: eta > 1.0,
    }
}

/// Matching condition `κ₀ = 2γ_r + g²/Δ`.
pub fn kappa_matched(s: &CombSummary, gamma_r: f64) -> f64 {
    kappa_matched_raw(s.g_bar, s.delta_bar, gamma_r)
}

pub fn kappa_matched_raw(g: f64, delta: f64, gamma_r: f64) -> f64 {
    2.0 * gamma_r + g * g / delta
}

/// Band-centre reflection `R = [κ − 2γ_r − g²/Δ]² / [κ + 2γ_r + g²/Δ]²`.
pub fn reflection_center(s: &CombSummary, kappa: f64, gamma_r: f64) -> f64 {
    let k0 = kappa_matched(s, gamma_r);
    let r = (kappa - k0) / (kappa + k0);
    r * r
}

/// Echo delay `T₁ = 1/Δ`, µs.
pub fn echo_time(s: &CombSummary) -> f64 {
    s.t1
}

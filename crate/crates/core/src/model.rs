//! Device and pulse description.
//!
//! Units follow one convention everywhere in the crate: time is in µs,
//! detunings are conventional frequencies in MHz and enter the dynamics as
//! `2π·Δ` rad/µs, while decay rates, couplings and the waveguide coupling are
//! amplitude rates in µs⁻¹ that enter without any `2π`.

use std::f64::consts::{LN_2, PI, TAU};
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Violation};

/// One comb tooth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiniResonator {
    /// Detuning from the reference frequency, MHz.
    pub detuning: f64,
    /// Amplitude decay rate, µs⁻¹.
    pub decay_rate: f64,
    /// Amplitude coupling to the common mode, µs⁻¹.
    pub coupling: f64,
}

impl MiniResonator {
    pub fn new(detuning: f64, decay_rate: f64, coupling: f64) -> Self {
        Self {
            detuning,
            decay_rate,
            coupling,
        }
    }

    /// Detuning as an angular frequency, rad/µs.
    #[inline]
    pub fn angular_detuning(&self) -> f64 {
        TAU * self.detuning
    }
}

/// The broadband resonator shared by every tooth and coupled to the waveguide.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommonResonator {
    /// Waveguide coupling rate, µs⁻¹.
    pub kappa: f64,
    /// Detuning from the reference frequency, MHz.
    pub detuning: f64,
    /// Internal amplitude loss, µs⁻¹.
    pub decay_rate: f64,
}

impl CommonResonator {
    pub fn new(kappa: f64, detuning: f64, decay_rate: f64) -> Self {
        Self {
            kappa,
            detuning,
            decay_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub minis: Vec<MiniResonator>,
    pub common: CommonResonator,
}

impl DeviceConfig {
    pub fn new(minis: Vec<MiniResonator>, common: CommonResonator) -> Self {
        Self { minis, common }
    }

    pub fn n_teeth(&self) -> usize {
        self.minis.len()
    }

    /// Copy of this device with a different waveguide coupling.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        let mut out = self.clone();
        out.common.kappa = kappa;
        out
    }

    /// Detunings sorted in ascending order.
    pub fn sorted_detunings(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.minis.iter().map(|m| m.detuning).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    /// Median adjacent spacing of the sorted detunings, MHz.
    ///
    /// This is the comb period used to place echo windows.
    pub fn median_spacing(&self) -> Result<f64, Error> {
        let d = self.sorted_detunings();
        if d.len() < 2 {
            return Err(Error::SpacingUnavailable { n_teeth: d.len() });
        }
        let mut gaps: Vec<f64> = d.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        let m = gaps.len();
        Ok(if m % 2 == 1 {
            gaps[m / 2]
        } else {
            0.5 * (gaps[m / 2 - 1] + gaps[m / 2])
        })
    }

    /// Largest angular frequency present in the free dynamics, rad/µs.
    pub(crate) fn max_angular_detuning(&self) -> f64 {
        self.minis
            .iter()
            .map(|m| m.angular_detuning().abs())
            .fold(TAU * self.common.detuning.abs(), f64::max)
    }

    /// Collective coupling `sqrt(Σ g_n²)`, µs⁻¹.
    pub(crate) fn collective_coupling(&self) -> f64 {
        self.minis.iter().map(|m| m.coupling * m.coupling).sum::<f64>().sqrt()
    }

    pub fn is_lossless(&self) -> bool {
        self.common.decay_rate == 0.0 && self.minis.iter().all(|m| m.decay_rate == 0.0)
    }

    /// Check every invariant and report all violations at once.
    pub fn validate(&self) -> Result<&Self, Error> {
        let mut errs = Vec::new();
        let c = &self.common;
        if !(c.kappa > 0.0) || !c.kappa.is_finite() {
            errs.push(Violation::new("common.kappa", "kappa must be positive"));
        }
        if !c.detuning.is_finite() {
            errs.push(Violation::new("common.detuning", "detuning must be finite"));
        }
        if !(c.decay_rate >= 0.0) || !c.decay_rate.is_finite() {
            errs.push(Violation::new("common.decay_rate", "decay rate must be non-negative"));
        }
        for (i, m) in self.minis.iter().enumerate() {
            if !m.detuning.is_finite() {
                errs.push(Violation::new(
                    format!("minis[{i}].detuning"),
                    "detuning must be finite",
                ));
            }
            if !(m.decay_rate >= 0.0) || !m.decay_rate.is_finite() {
                errs.push(Violation::new(
                    format!("minis[{i}].decay_rate"),
                    "decay rate must be non-negative",
                ));
            }
            if !(m.coupling >= 0.0) || !m.coupling.is_finite() {
                errs.push(Violation::new(
                    format!("minis[{i}].coupling"),
                    "coupling must be non-negative",
                ));
            }
            if let Some(j) = self.minis[..i].iter().position(|o| o.detuning == m.detuning) {
                errs.push(Violation::new(
                    format!("minis[{i}].detuning"),
                    format!("duplicate detuning (same as minis[{j}])"),
                ));
            }
        }
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(errs))
        }
    }
}

/// Where the reference frequency sits relative to the comb.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Detunings `Δ·(k − (n−1)/2)`; odd combs have a tooth at zero.
    #[default]
    ToothAtCenter,
    /// Zero lies halfway between the two middle teeth.
    MidpointAtCenter,
}

/// Uniform comb of `n` identical teeth spaced by `spacing` MHz.
pub fn build_uniform_comb(
    n: usize,
    spacing: f64,
    coupling: f64,
    decay: f64,
    centering: Centering,
) -> Result<Vec<MiniResonator>, Error> {
    let mut errs = Vec::new();
    if n == 0 {
        errs.push(Violation::new("n", "comb needs at least one tooth"));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        errs.push(Violation::new("spacing", "spacing must be positive"));
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let half = (n as f64 - 1.0) / 2.0;
    // Shift so that the two middle teeth straddle zero; for even n this is
    // the same grid as the symmetric one.
    let shift = match centering {
        Centering::ToothAtCenter => 0.0,
        Centering::MidpointAtCenter if n % 2 == 1 => 0.5,
        Centering::MidpointAtCenter => 0.0,
    };
    Ok((0..n)
        .map(|k| MiniResonator::new(spacing * (k as f64 - half + shift), decay, coupling))
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    #[default]
    Gaussian,
    Rectangular,
}

impl fmt::Display for PulseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PulseShape::Gaussian => f.write_str("gaussian"),
            PulseShape::Rectangular => f.write_str("rectangular"),
        }
    }
}

/// Input envelope `a_in(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub shape: PulseShape,
    pub amplitude: f64,
    /// Peak time, µs.
    pub center_time: f64,
    /// Full width at half maximum of `|a_in|²`, µs.
    pub power_fwhm: f64,
    /// Carrier offset from the reference frequency, MHz.
    pub carrier_offset: f64,
}

impl Pulse {
    pub fn gaussian(amplitude: f64, center_time: f64, power_fwhm: f64) -> Self {
        Self {
            shape: PulseShape::Gaussian,
            amplitude,
            center_time,
            power_fwhm,
            carrier_offset: 0.0,
        }
    }

    pub fn rectangular(amplitude: f64, center_time: f64, width: f64) -> Self {
        Self {
            shape: PulseShape::Rectangular,
            amplitude,
            center_time,
            power_fwhm: width,
            carrier_offset: 0.0,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_center(mut self, center_time: f64) -> Self {
        self.center_time = center_time;
        self
    }

    pub fn validate(&self) -> Result<&Self, Error> {
        let mut errs = Vec::new();
        if !(self.power_fwhm > 0.0) || !self.power_fwhm.is_finite() {
            errs.push(Violation::new("pulse.power_fwhm", "width must be positive"));
        }
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            errs.push(Violation::new("pulse.amplitude", "amplitude must be positive"));
        }
        if !self.center_time.is_finite() {
            errs.push(Violation::new("pulse.center_time", "center time must be finite"));
        }
        if !self.carrier_offset.is_finite() {
            errs.push(Violation::new("pulse.carrier_offset", "carrier offset must be finite"));
        }
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Exponent coefficient `α` of the gaussian `exp(−α (t−t₀)²)`.
    #[inline]
    fn gauss_alpha(&self) -> f64 {
        2.0 * LN_2 / (self.power_fwhm * self.power_fwhm)
    }

    /// Carrier as an angular frequency, rad/µs.
    #[inline]
    pub fn carrier_angular(&self) -> f64 {
        TAU * self.carrier_offset
    }

    /// Complex envelope at time `t` (µs).
    pub fn envelope(&self, t: f64) -> C64 {
        let real = match self.shape {
            PulseShape::Gaussian => {
                let x = t - self.center_time;
                self.amplitude * (-self.gauss_alpha() * x * x).exp()
            }
            PulseShape::Rectangular => {
                let half = 0.5 * self.power_fwhm;
                if (t - self.center_time).abs() <= half {
                    self.amplitude
                } else {
                    0.0
                }
            }
        };
        if self.carrier_offset == 0.0 {
            C64::new(real, 0.0)
        } else {
            C64::from_polar(real, -self.carrier_angular() * t)
        }
    }

    /// Spectral amplitude `f_ω` under `a_in(t) = (2π)^{-1/2} ∫ dω e^{−iωt} f_ω`.
    pub fn spectrum(&self, omega: f64) -> C64 {
        let nu = omega - self.carrier_angular();
        let phase = C64::from_polar(1.0, nu * self.center_time);
        let mag = match self.shape {
            PulseShape::Gaussian => {
                let alpha = self.gauss_alpha();
                self.amplitude * (1.0 / (2.0 * alpha)).sqrt() * (-nu * nu / (4.0 * alpha)).exp()
            }
            PulseShape::Rectangular => {
                let x = 0.5 * nu * self.power_fwhm;
                let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
                self.amplitude * self.power_fwhm * sinc / (2.0 * PI).sqrt()
            }
        };
        phase * mag
    }

    /// `∫|a_in|² dt` in closed form.
    pub fn energy(&self) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        match self.shape {
            PulseShape::Gaussian => a2 * self.power_fwhm * (PI / (4.0 * LN_2)).sqrt(),
            PulseShape::Rectangular => a2 * self.power_fwhm,
        }
    }
}

/// Uniform time grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl Grid {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self, Error> {
        let g = Self { t_start, t_end, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<&Self, Error> {
        let mut errs = Vec::new();
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            errs.push(Violation::new("grid.t_end", "t_end must exceed t_start"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            errs.push(Violation::new("grid.dt", "dt must be positive"));
        }
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// `floor((t_end − t_start)/dt) + 1`, tolerant to rounding of the ratio.
    pub fn len(&self) -> usize {
        let steps = (self.t_end - self.t_start) / self.dt;
        (steps * (1.0 + 1e-12) + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    /// Last sample time.
    pub fn last_time(&self) -> f64 {
        self.time(self.len() - 1)
    }
}

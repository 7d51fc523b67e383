//! Frequency-domain solution of the coupled-mode equations.
//!
//! Under monochromatic drive `e^{−iωt}` the steady state gives the
//! reflection amplitude
//!
//! ```text
//! r(ω) = κ/D(ω) − 1,
//! D(ω) = κ/2 + γ_r + i(2πΔ_r − ω) + Σ_n g_n² / (γ_n + i(2πΔ_n − ω)).
//! ```
//!
//! Because the device is linear and time invariant, `a_out = IFT[r·f_ω]`
//! reproduces the time-domain integrator up to discretisation error.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{DeviceConfig, Grid, Pulse};
use crate::time::TimeTrace;

/// Reflection amplitude at angular frequency `omega` (rad/µs).
pub fn transfer_function(config: &DeviceConfig, omega: f64) -> C64 {
    let c = &config.common;
    let mut d = C64::new(0.5 * c.kappa + c.decay_rate, TAU * c.detuning - omega);
    for m in &config.minis {
        let den = C64::new(m.decay_rate, m.angular_detuning() - omega);
        if den.re == 0.0 && den.im == 0.0 {
            if m.coupling == 0.0 {
                continue;
            }
            // Lossless tooth exactly on resonance: D is infinite.
            return C64::new(-1.0, 0.0);
        }
        d += m.coupling * m.coupling / den;
    }
    c.kappa / d - 1.0
}

/// `r(ω)` on a uniform grid symmetric about zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResponse {
    pub omegas: Vec<f64>,
    pub reflection: Vec<C64>,
    /// Set when the grid step is coarser than the narrowest feature.
    pub warning: Option<String>,
}

impl SpectralResponse {
    pub fn step(&self) -> f64 {
        self.omegas[1] - self.omegas[0]
    }

    /// Indices of local minima of `|r|`.
    pub fn dips(&self) -> Vec<usize> {
        let p: Vec<f64> = self.reflection.iter().map(|r| r.norm_sqr()).collect();
        (1..p.len().saturating_sub(1))
            .filter(|&i| p[i] < p[i - 1] && p[i] <= p[i + 1])
            .collect()
    }
}

/// Sample `r(ω)` at `n_points` uniformly spaced points on `[−ω_max, ω_max]`.
pub fn sample_response(config: &DeviceConfig, omega_max: f64, n_points: usize) -> Result<SpectralResponse, Error> {
    config.validate()?;
    let mut errs = Vec::new();
    if n_points < 2 {
        errs.push(crate::Violation::new("n_points", "need at least two points"));
    }
    if !(omega_max > 0.0) || !omega_max.is_finite() {
        errs.push(crate::Violation::new("omega_max", "omega_max must be positive"));
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let step = 2.0 * omega_max / (n_points - 1) as f64;
    // Symmetric construction keeps omegas[i] == -omegas[n-1-i] exactly.
    let omegas: Vec<f64> = (0..n_points)
        .map(|i| {
            let j = n_points - 1 - i;
            if i <= j {
                -omega_max + i as f64 * step
            } else {
                omega_max - j as f64 * step
            }
        })
        .collect();
    let reflection: Vec<C64> = omegas.par_iter().map(|&w| transfer_function(config, w)).collect();

    let narrowest = config
        .minis
        .iter()
        .map(|m| m.decay_rate)
        .filter(|&g| g > 0.0)
        .fold(config.common.kappa, f64::min);
    let warning = (step > narrowest)
        .then(|| format!("grid step {step:.3e} rad/us is coarser than the narrowest linewidth {narrowest:.3e} 1/us"));
    Ok(SpectralResponse {
        omegas,
        reflection,
        warning,
    })
}

/// Internal window is at least this many times the requested grid.
const PAD_FACTOR: usize = 4;

/// Output pulse computed through the transfer function.
///
/// The analytic pulse spectrum is multiplied by `r(ω)` on the frequency grid
/// conjugate to a padded copy of `grid` and transformed back. The returned
/// trace carries `a_in` and `a_out` only.
pub fn respond_pulse(config: &DeviceConfig, pulse: &Pulse, grid: &Grid) -> Result<TimeTrace, Error> {
    config.validate()?;
    pulse.validate()?;
    grid.validate()?;

    let n = grid.len();
    let m = (PAD_FACTOR * n).next_power_of_two();
    let dt = grid.dt;
    let window = m as f64 * dt;
    let t_s = grid.t_start;
    let input_energy = pulse.energy();

    // Input energy falling outside the periodic window would wrap around.
    let outside: f64 = (1..=m)
        .flat_map(|i| [t_s - i as f64 * dt, t_s + window + (i - 1) as f64 * dt])
        .map(|t| pulse.envelope(t).norm_sqr())
        .sum::<f64>()
        * dt;
    if outside > 1e-6 * input_energy {
        return Err(Error::Aliasing(format!(
            "{:.2e} of the input energy lies outside the {window:.4} us window",
            outside / input_energy
        )));
    }

    let d_omega = TAU / window;
    let mut buf: Vec<C64> = (0..m)
        .into_par_iter()
        .map(|k| {
            let kk = if k < m / 2 { k as f64 } else { k as f64 - m as f64 };
            let w = kk * d_omega;
            pulse.spectrum(w) * transfer_function(config, w) * C64::from_polar(1.0, -w * t_s)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = d_omega / (2.0 * PI).sqrt();

    let tail_start = m - m / 20;
    let tail: f64 = buf[tail_start..].iter().map(|x| (x * scale).norm_sqr()).sum::<f64>() * dt;
    if tail > 1e-2 * input_energy {
        return Err(Error::Aliasing(format!(
            "output energy {:.2e} of the input remains at the end of the window",
            tail / input_energy
        )));
    }

    let a_out: Vec<C64> = buf[..n].iter().map(|x| x * scale).collect();
    let a_in: Vec<C64> = grid.times().map(|t| pulse.envelope(t)).collect();
    Ok(TimeTrace {
        grid: *grid,
        a_in,
        a_out,
        a: None,
        s: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_uniform_comb, Centering, CommonResonator, MiniResonator};
    use crate::presets;
    use crate::time::{detect_echoes, integrate};
    use proptest::prelude::*;

    fn empty(kappa: f64, gamma_r: f64) -> DeviceConfig {
        DeviceConfig::new(vec![], CommonResonator::new(kappa, 0.0, gamma_r))
    }

    #[test]
    fn empty_cavity_on_resonance_reflects_in_phase() {
        let r = transfer_function(&empty(3.0, 0.0), 0.0);
        assert!((r - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn empty_lossless_cavity_is_unitary() {
        for w in [-100.0, -1.0, 0.3, 7.0, 1e4] {
            let r = transfer_function(&empty(3.0, 0.0), w);
            let closed = C64::new(1.5, w) / C64::new(1.5, -w);
            assert!((r - closed).norm() < 1e-14);
            assert!((r.norm() - 1.0).abs() < 1e-12);
        }
    }

    /// Direct 2×2 solve of the steady state for one tooth.
    fn single_tooth_oracle(kappa: f64, g: f64, gamma: f64, delta_w: f64, w: f64) -> C64 {
        // [(κ/2 − iω)      −g            ] [a]   [√κ]
        // [ g          (γ + i(δ − ω))    ] [s] = [ 0]
        let a11 = C64::new(0.5 * kappa, -w);
        let a12 = C64::new(-g, 0.0);
        let a21 = C64::new(g, 0.0);
        let a22 = C64::new(gamma, delta_w - w);
        let det = a11 * a22 - a12 * a21;
        let a = kappa.sqrt() * a22 / det;
        kappa.sqrt() * a - 1.0
    }

    #[test]
    fn lossless_tooth_on_resonance_reflects_with_pi_phase() {
        let cfg = DeviceConfig::new(
            vec![MiniResonator::new(0.0, 0.0, 2.0)],
            CommonResonator::new(5.0, 0.0, 0.0),
        );
        assert_eq!(transfer_function(&cfg, 0.0), C64::new(-1.0, 0.0));
        for gamma in [1e-3, 1e-6, 1e-9] {
            let oracle = single_tooth_oracle(5.0, 2.0, gamma, 0.0, 0.0);
            assert!((oracle + 1.0).norm() < 10.0 * gamma);
        }
        for w in [-3.0, 0.5, 2.0] {
            let mut lossy = cfg.clone();
            lossy.minis[0].decay_rate = 0.1;
            let r = transfer_function(&lossy, w);
            assert!((r - single_tooth_oracle(5.0, 2.0, 0.1, 0.0, w)).norm() < 1e-13);
        }
    }

    #[test]
    fn lossless_comb_sampling_is_unitary() {
        let cfg = presets::reference_device(5, 13.0, 0.0, 0.0);
        let resp = sample_response(&cfg, 500.0, 4001).unwrap();
        let worst = resp
            .reflection
            .iter()
            .map(|r| (r.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
        assert_eq!(resp.omegas[0], -500.0);
        assert_eq!(resp.omegas[4000], 500.0);
        assert_eq!(resp.omegas[2000], 0.0);
    }

    #[test]
    fn dips_sit_on_the_teeth_for_weak_coupling() {
        let cfg = DeviceConfig::new(
            build_uniform_comb(5, 13.0, 1.0, 0.5, Centering::ToothAtCenter).unwrap(),
            CommonResonator::new(400.0, 0.0, 0.0),
        );
        let resp = sample_response(&cfg, 200.0, 8001).unwrap();
        let dips = resp.dips();
        assert_eq!(dips.len(), 5);
        for (i, m) in dips.iter().zip(&cfg.minis) {
            assert!((resp.omegas[*i] - m.angular_detuning()).abs() <= resp.step());
            assert!(resp.reflection[*i].norm() < 1.0);
        }
    }

    #[test]
    fn coarse_grid_warns() {
        let cfg = presets::reference_device(5, 13.0, 1e-3, 1e-3);
        assert!(sample_response(&cfg, 200.0, 101).unwrap().warning.is_some());
        let cfg = empty(5.0, 0.0);
        assert!(sample_response(&cfg, 10.0, 101).unwrap().warning.is_none());
        assert!(sample_response(&cfg, 10.0, 1).is_err());
        assert!(sample_response(&cfg, -1.0, 10).is_err());
    }

    #[test]
    fn empty_broadband_cavity_is_a_mirror() {
        let cfg = empty(5e3, 0.0);
        let p = Pulse::gaussian(1.0, 0.2, 0.02);
        let grid = Grid::new(0.0, 0.5, 1e-4).unwrap();
        let tr = respond_pulse(&cfg, &p, &grid).unwrap();
        let ratio = tr.output_energy() / tr.input_energy();
        assert!((ratio - 1.0).abs() < 1e-3);
        let diff: f64 = tr.a_out.iter().zip(&tr.a_in).map(|(o, i)| (o - i).norm_sqr()).sum();
        assert!(diff.sqrt() / tr.a_in.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() < 0.05);
    }

    #[test]
    fn paper_comb_echo_through_frequency_domain() {
        let d = 13.0;
        let cfg = presets::reference_device(5, d, 1e-3, 1e-3);
        let p = presets::reference_pulse(d);
        let grid = Grid::new(0.0, p.center_time + 2.5 / d, 1e-4).unwrap();
        let tr = respond_pulse(&cfg, &p, &grid).unwrap();
        let t0 = p.center_time;
        let rep = detect_echoes(&tr, (0.0, t0 + 0.5 / d), 1.0 / d).unwrap();
        let delay = rep.event(1).unwrap().peak_time - t0;
        assert!((delay - 1.0 / d).abs() < 2e-3, "delay {delay}");
        assert!(rep.efficiency(1) > 0.9);
    }

    #[test]
    fn pathways_agree() {
        let d = 13.0;
        let cfg = presets::reference_device(5, d, 0.5, 0.5);
        let p = presets::reference_pulse(d);
        let grid = Grid::new(0.0, p.center_time + 2.5 / d, 5e-5).unwrap();
        let fd = respond_pulse(&cfg, &p, &grid).unwrap();
        let td = integrate(&cfg, &p, &grid).unwrap();
        let num: f64 = fd.a_out.iter().zip(&td.a_out).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = td.a_out.iter().map(|a| a.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-3, "{}", (num / den).sqrt());
    }

    #[test]
    fn pulse_outside_window_is_rejected() {
        let cfg = empty(50.0, 1.0);
        let p = Pulse::gaussian(1.0, 0.0, 0.02);
        let grid = Grid::new(0.0, 0.2, 1e-4).unwrap();
        assert!(matches!(respond_pulse(&cfg, &p, &grid), Err(Error::Aliasing(_))));
    }

    #[test]
    fn slow_decay_is_reported_as_aliasing() {
        // Lossless single tooth with a very slow ring-down keeps emitting.
        let cfg = DeviceConfig::new(
            vec![MiniResonator::new(0.0, 0.0, 3.0)],
            CommonResonator::new(20.0, 0.0, 0.0),
        );
        let p = Pulse::gaussian(1.0, 0.1, 0.05);
        let grid = Grid::new(0.0, 0.3, 1e-3).unwrap();
        assert!(matches!(respond_pulse(&cfg, &p, &grid), Err(Error::Aliasing(_))));
    }

    proptest! {
        #[test]
        fn passivity(
            n in 0usize..6, spacing in 0.5f64..20.0, g in 0.0f64..80.0,
            gamma in 0.0f64..5.0, kappa in 0.01f64..2000.0, gamma_r in 0.0f64..5.0,
            dr in -10.0f64..10.0, w in -400.0f64..400.0,
        ) {
            let mut cfg = DeviceConfig::new(
                build_uniform_comb(n.max(1), spacing, g, gamma, Centering::ToothAtCenter).unwrap(),
                CommonResonator::new(kappa, dr, gamma_r),
            );
            cfg.minis.truncate(n);
            prop_assert!(transfer_function(&cfg, w).norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn mirrored_comb_mirrors_response(
            spacing in 0.5f64..20.0, g in 0.0f64..80.0, gamma in 0.0f64..5.0,
            kappa in 0.01f64..2000.0, shift in 0.0f64..1.0, w in -400.0f64..400.0,
        ) {
            let minis: Vec<MiniResonator> = (0..4)
                .map(|k| MiniResonator::new(spacing * (k as f64 + shift), gamma + 0.1 * k as f64, g))
                .collect();
            let mirrored: Vec<MiniResonator> =
                minis.iter().map(|m| MiniResonator { detuning: -m.detuning, ..*m }).collect();
            let a = DeviceConfig::new(minis, CommonResonator::new(kappa, 0.0, 0.1));
            let b = DeviceConfig::new(mirrored, CommonResonator::new(kappa, 0.0, 0.1));
            let ra = transfer_function(&a, w);
            let rb = transfer_function(&b, -w);
            // Mirroring conjugates the response: |r| is even, phase is odd.
            prop_assert!((ra - rb.conj()).norm() < 1e-9);
        }
    }
}

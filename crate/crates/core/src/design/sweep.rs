use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::{optimize_kappa_with, MatchOptions};
use crate::analytics::{eta_general, kappa_matched, summarize_comb};
use crate::error::{Error, Violation};
use crate::model::{build_uniform_comb, Centering, DeviceConfig, Pulse};
use crate::time::{run_echo_experiment, GridPolicy};

/// How the template is carried to a new comb spacing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombScaling {
    /// Couplings and pulse stay as in the template.
    Fixed,
    /// Couplings scale with `Δ` and the pulse width with `1/Δ`, so only
    /// the loss rates change relative to the comb period.
    #[default]
    Proportional,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub scaling: CombScaling,
    pub centering: Centering,
    pub reoptimize_kappa: bool,
    pub matching: MatchOptions,
    pub policy: GridPolicy,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            scaling: CombScaling::default(),
            centering: Centering::ToothAtCenter,
            reoptimize_kappa: false,
            matching: MatchOptions::default(),
            policy: GridPolicy::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub delta_mhz: f64,
    pub kappa: f64,
    pub eta_first: f64,
    /// First-echo peak delay after the input peak, µs; `None` without an echo.
    pub echo_time: Option<f64>,
    pub reflected_fraction: f64,
    /// `g⁴/(Δ²κ²)·exp(−2γ/Δ)` at the `κ` used.
    pub eta_analytic: f64,
    /// Step of the grid the point was simulated on, µs.
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub values: Vec<f64>,
    pub records: Vec<SweepRecord>,
}

/// Sweep the comb spacing with default options.
pub fn sweep_detuning(
    template: &DeviceConfig,
    pulse: &Pulse,
    deltas: &[f64],
    reoptimize_kappa: bool,
) -> Result<SweepResult, Error> {
    let opts = SweepOptions {
        reoptimize_kappa,
        ..SweepOptions::default()
    };
    sweep_detuning_with(template, pulse, deltas, &opts)
}

/// Rebuild a uniform comb at every spacing in `deltas` and score it.
///
/// Without re-optimisation `κ` keeps the template's ratio `κ/κ₀`.
pub fn sweep_detuning_with(
    template: &DeviceConfig,
    pulse: &Pulse,
    deltas: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult, Error> {
    template.validate()?;
    pulse.validate()?;
    let bad: Vec<Violation> = deltas
        .iter()
        .enumerate()
        .filter(|(_, d)| !(**d > 0.0) || !d.is_finite())
        .map(|(i, _)| Violation::new(format!("deltas[{i}]"), "spacing must be positive"))
        .collect();
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let base = summarize_comb(template)?;
    let gamma_r = template.common.decay_rate;
    let kappa_ratio = template.common.kappa / kappa_matched(&base, gamma_r);

    let records = deltas
        .par_iter()
        .map(|&delta| {
            let (g, p) = match opts.scaling {
                CombScaling::Fixed => (base.g_bar, *pulse),
                CombScaling::Proportional => {
                    let s = base.delta_bar / delta;
                    let mut p = *pulse;
                    p.power_fwhm *= s;
                    p.center_time *= s;
                    (base.g_bar / s, p)
                }
            };
            let minis = build_uniform_comb(base.n_teeth, delta, g, base.gamma_bar, opts.centering)?;
            let mut cfg = DeviceConfig::new(minis, template.common);
            let summary = summarize_comb(&cfg)?;
            cfg.common.kappa = kappa_ratio * kappa_matched(&summary, gamma_r);
            if opts.reoptimize_kappa {
                cfg.common.kappa = optimize_kappa_with(&cfg, &p, None, &opts.matching)?.kappa_opt;
            }
            let run = run_echo_experiment(&cfg, &p, &opts.policy)?;
            Ok(SweepRecord {
                delta_mhz: delta,
                kappa: cfg.common.kappa,
                eta_first: run.report.efficiency(1),
                echo_time: run.echo_delay(1),
                reflected_fraction: run.report.reflected_fraction(),
                eta_analytic: eta_general(&summary, cfg.common.kappa).eta,
                dt: run.grid.dt,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    Ok(SweepResult {
        parameter: "delta_mhz".into(),
        values: deltas.to_vec(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const DELTAS: [f64; 7] = [4.0, 6.0, 8.0, 10.0, 12.0, 13.0, 15.0];

    #[test]
    fn echo_times_follow_spacing() {
        let cfg = presets::reference_device(5, 13.0, 1e-3, 1e-3);
        let res = sweep_detuning(&cfg, &presets::reference_pulse(13.0), &DELTAS, false).unwrap();
        assert_eq!(res.records.len(), DELTAS.len());
        for r in &res.records {
            let t = r.echo_time.unwrap();
            assert!((t - 1.0 / r.delta_mhz).abs() <= r.dt, "{r:?}");
            assert!(r.eta_first <= 1.0 + 1e-9 && r.reflected_fraction >= 0.0);
        }
    }

    #[test]
    fn lossless_sweep_is_flat_when_reoptimised() {
        let cfg = presets::reference_device(5, 13.0, 0.0, 0.0);
        let deltas = [4.0, 8.0, 15.0];
        let res = sweep_detuning(&cfg, &presets::reference_pulse(13.0), &deltas, true).unwrap();
        let etas: Vec<f64> = res.records.iter().map(|r| r.eta_first).collect();
        let spread =
            etas.iter().copied().fold(f64::NEG_INFINITY, f64::max) - etas.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.05, "{etas:?}");
    }

    #[test]
    fn losses_penalise_long_storage() {
        let cfg = presets::reference_device(5, 13.0, 0.2, 0.2);
        let res = sweep_detuning(&cfg, &presets::reference_pulse(13.0), &DELTAS, false).unwrap();
        for w in res.records.windows(2) {
            assert!(w[1].echo_time.unwrap() < w[0].echo_time.unwrap());
            assert!(w[1].eta_first > w[0].eta_first);
        }
    }

    #[test]
    fn fixed_scaling_keeps_coupling() {
        let cfg = presets::reference_device(5, 13.0, 1e-3, 1e-3);
        let opts = SweepOptions {
            scaling: CombScaling::Fixed,
            ..SweepOptions::default()
        };
        let res = sweep_detuning_with(&cfg, &presets::reference_pulse(13.0), &[10.0, 13.0], &opts).unwrap();
        let g = cfg.minis[0].coupling;
        assert!((res.records[0].kappa - (2e-3 + g * g / 10.0)).abs() < 1e-9);
        assert!((res.records[1].kappa - cfg.common.kappa).abs() < 1e-9);
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = presets::reference_device(5, 13.0, 0.1, 0.1);
        let p = presets::reference_pulse(13.0);
        let a = sweep_detuning(&cfg, &p, &[6.0, 12.0], false).unwrap();
        let b = sweep_detuning(&cfg, &p, &[6.0, 12.0], false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_positive_spacing() {
        let cfg = presets::reference_device(5, 13.0, 0.0, 0.0);
        let err = sweep_detuning(&cfg, &presets::reference_pulse(13.0), &[4.0, 0.0], false).unwrap_err();
        assert!(err.to_string().contains("deltas[1]"));
    }
}

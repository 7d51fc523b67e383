use std::fmt;

use serde::{Deserialize, Serialize};

use super::golden::golden_section_max;
use crate::analytics::{kappa_matched, summarize_comb};
use crate::error::{Error, Violation};
use crate::model::{build_uniform_comb, Centering, DeviceConfig, Pulse};
use crate::time::{run_echo_experiment, GridPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParam {
    /// Tooth coupling `g`.
    G,
    /// Tooth decay `γ`.
    Gamma,
    /// Common-resonator loss `γ_r`.
    GammaR,
    Kappa,
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitParam::G => "g",
            FitParam::Gamma => "gamma",
            FitParam::GammaR => "gamma_r",
            FitParam::Kappa => "kappa",
        })
    }
}

/// What `κ` does when it is not a free parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMode {
    /// Follow `κ₀ = 2γ_r + g²/Δ` as the other parameters move.
    #[default]
    Matched,
    /// Keep the template value.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub kappa_mode: KappaMode,
    pub max_simulations: usize,
    /// Early stop once `|η − target|` drops below this.
    pub stop_residual: f64,
    /// Fits with a larger final residual are reported as not converged.
    pub accept_residual: f64,
    /// Upper bound for `g` in units of `2π·Δ`.
    pub g_max_periods: f64,
    /// Upper bound for `γ` and `γ_r` in units of `Δ`.
    pub loss_max_periods: f64,
    pub scan_points: usize,
    pub policy: GridPolicy,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            kappa_mode: KappaMode::Matched,
            max_simulations: 500,
            stop_residual: 1e-5,
            accept_residual: 1e-3,
            g_max_periods: 3.0,
            loss_max_periods: 5.0,
            scan_points: 9,
            policy: GridPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub config: DeviceConfig,
    pub eta: f64,
    /// `|η_sim − target|`.
    pub residual: f64,
    pub simulations: usize,
    pub converged: bool,
    pub g: f64,
    pub gamma: f64,
    pub gamma_r: f64,
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug)]
struct Params {
    g: f64,
    gamma: f64,
    gamma_r: f64,
    kappa: f64,
}

impl Params {
    fn get(&self, p: FitParam) -> f64 {
        match p {
            FitParam::G => self.g,
            FitParam::Gamma => self.gamma,
            FitParam::GammaR => self.gamma_r,
            FitParam::Kappa => self.kappa,
        }
    }

    fn set(&mut self, p: FitParam, v: f64) {
        match p {
            FitParam::G => self.g = v,
            FitParam::Gamma => self.gamma = v,
            FitParam::GammaR => self.gamma_r = v,
            FitParam::Kappa => self.kappa = v,
        }
    }
}

/// Fit with default options.
pub fn fit_device(
    target_eta: f64,
    target_echo_time: f64,
    free: &[FitParam],
    template: &DeviceConfig,
    pulse: &Pulse,
) -> Result<FitResult, Error> {
    fit_device_with(
        target_eta,
        target_echo_time,
        free,
        template,
        pulse,
        &FitOptions::default(),
    )
}

struct Problem<'a> {
    n: usize,
    delta: f64,
    centering: Centering,
    template: &'a DeviceConfig,
    pulse: &'a Pulse,
    kappa_free: bool,
    opts: &'a FitOptions,
}

impl Problem<'_> {
    fn build(&self, p: &Params) -> Result<DeviceConfig, Error> {
        let minis = build_uniform_comb(self.n, self.delta, p.g, p.gamma, self.centering)?;
        let mut cfg = DeviceConfig::new(minis, self.template.common);
        cfg.common.decay_rate = p.gamma_r;
        cfg.common.kappa = if self.kappa_free {
            p.kappa
        } else {
            match self.opts.kappa_mode {
                KappaMode::Matched => kappa_matched(&summarize_comb(&cfg)?, p.gamma_r),
                KappaMode::Fixed => self.template.common.kappa,
            }
        };
        Ok(cfg)
    }

    fn eta(&self, p: &Params) -> Result<f64, Error> {
        let cfg = self.build(p)?;
        if !(cfg.common.kappa > 0.0) {
            // g = 0 with a lossless cavity leaves nothing to match; no storage.
            return Ok(0.0);
        }
        Ok(run_echo_experiment(&cfg, self.pulse, &self.opts.policy)?
            .report
            .efficiency(1))
    }

    fn bounds(&self, p: FitParam, current: &Params) -> (f64, f64) {
        let d = self.delta;
        match p {
            FitParam::G => (0.0, self.opts.g_max_periods * std::f64::consts::TAU * d),
            FitParam::Gamma | FitParam::GammaR => (0.0, self.opts.loss_max_periods * d),
            FitParam::Kappa => {
                let k0 = kappa_matched_raw_safe(current.g, d, current.gamma_r);
                (k0 / 10.0, 10.0 * k0)
            }
        }
    }
}

fn kappa_matched_raw_safe(g: f64, d: f64, gamma_r: f64) -> f64 {
    crate::analytics::kappa_matched_raw(g, d, gamma_r).max(1e-6)
}

/// Coordinate descent on `(η_sim − target)²` over the free parameters.
///
/// The comb is rebuilt as `N` identical teeth with spacing `1/target_echo_time`
/// and the template's mean coupling and decay as starting values. Each
/// coordinate step scans its range and refines the best bracket by golden
/// section; passes repeat until the residual or the simulation budget is
/// exhausted.
pub fn fit_device_with(
    target_eta: f64,
    target_echo_time: f64,
    free: &[FitParam],
    template: &DeviceConfig,
    pulse: &Pulse,
    opts: &FitOptions,
) -> Result<FitResult, Error> {
    template.validate()?;
    pulse.validate()?;
    let mut errs = Vec::new();
    if !(0.0..=1.0).contains(&target_eta) {
        errs.push(Violation::new("target_eta", "target efficiency must lie in [0, 1]"));
    }
    if !(target_echo_time > 0.0) || !target_echo_time.is_finite() {
        errs.push(Violation::new("target_echo_time", "target echo time must be positive"));
    }
    if free.is_empty() {
        errs.push(Violation::new("free", "at least one free parameter is required"));
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }
    let base = summarize_comb(template)?;
    let mut free: Vec<FitParam> = free.to_vec();
    free.dedup();
    let problem = Problem {
        n: base.n_teeth,
        delta: 1.0 / target_echo_time,
        centering: Centering::ToothAtCenter,
        template,
        pulse,
        kappa_free: free.contains(&FitParam::Kappa),
        opts,
    };

    let mut params = Params {
        g: base.g_bar,
        gamma: base.gamma_bar,
        gamma_r: template.common.decay_rate,
        kappa: template.common.kappa,
    };
    let mut eta = problem.eta(&params)?;
    let mut sims = 1usize;
    let mut residual = (eta - target_eta).abs();
    let mut moved = false;

    'outer: while residual > opts.stop_residual && sims < opts.max_simulations {
        let before = residual;
        for &p in &free {
            if residual <= opts.stop_residual || sims >= opts.max_simulations {
                break 'outer;
            }
            let (lo, hi) = problem.bounds(p, &params);
            let log_scale = p == FitParam::Kappa;
            let to_x = |v: f64| if log_scale { v.ln() } else { v };
            let from_x = |x: f64| if log_scale { x.exp() } else { x };
            let (xa, xb) = (to_x(lo), to_x(hi));

            let n = opts.scan_points.max(3);
            let mut best = (to_x(params.get(p)), residual);
            let mut xs = Vec::with_capacity(n);
            for i in 0..n {
                let x = xa + (xb - xa) * i as f64 / (n - 1) as f64;
                let mut trial = params;
                trial.set(p, from_x(x));
                let r = (problem.eta(&trial)? - target_eta).abs();
                sims += 1;
                xs.push((x, r));
                if r < best.1 {
                    best = (x, r);
                }
            }
            let idx = xs
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, v)| if v.1 < acc.1 { (i, v.1) } else { acc },
                )
                .0;
            let span = (xs[idx.saturating_sub(1)].0, xs[(idx + 1).min(n - 1)].0);
            let budget = opts.max_simulations.saturating_sub(sims).min(40);
            if budget >= 2 {
                let g = golden_section_max(
                    |x| {
                        let mut trial = params;
                        trial.set(p, from_x(x));
                        problem.eta(&trial).map(|e| -(e - target_eta).abs())
                    },
                    span.0,
                    span.1,
                    1e-6 * (xb - xa).abs().max(1e-12),
                    budget,
                )?;
                sims += g.evaluations;
                if -g.value < best.1 {
                    best = (g.x, -g.value);
                }
            }
            if best.1 < residual {
                params.set(p, from_x(best.0));
                residual = best.1;
                moved = true;
            }
        }
        if residual >= before {
            break;
        }
    }

    let config = problem.build(&params)?;
    if moved {
        eta = problem.eta(&params)?;
        sims += 1;
        residual = (eta - target_eta).abs();
    }
    Ok(FitResult {
        g: params.g,
        gamma: params.gamma,
        gamma_r: params.gamma_r,
        kappa: config.common.kappa,
        config,
        eta,
        residual,
        simulations: sims,
        converged: residual < opts.accept_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn zero_target_drives_coupling_to_zero() {
        let cfg = presets::reference_device(5, 13.0, 1e-3, 1e-3);
        let res = fit_device(0.0, 1.0 / 13.0, &[FitParam::G], &cfg, &presets::reference_pulse(13.0)).unwrap();
        assert_eq!(res.g, 0.0);
        assert!(res.residual < 1e-12);
        assert!(res.converged);
    }

    #[test]
    fn helium_target_recovers_coupling_scale() {
        let d = 4.0;
        let mut cfg = presets::helium_device();
        for m in &mut cfg.minis {
            m.coupling = 5.0;
        }
        let res = fit_device(0.999, 1.0 / d, &[FitParam::G], &cfg, &presets::reference_pulse(d)).unwrap();
        assert!(res.converged, "{res:?}");
        let ratio = res.g / presets::coupling_from_mhz(d);
        assert!((0.5..2.0).contains(&ratio), "g/(2πΔ) = {ratio}");
    }

    #[test]
    fn rejects_bad_targets() {
        let cfg = presets::reference_device(5, 13.0, 1e-3, 1e-3);
        let p = presets::reference_pulse(13.0);
        assert!(fit_device(1.5, 0.1, &[FitParam::G], &cfg, &p).is_err());
        assert!(fit_device(0.5, -0.1, &[FitParam::G], &cfg, &p).is_err());
        assert!(fit_device(0.5, 0.1, &[], &cfg, &p).is_err());
    }
}

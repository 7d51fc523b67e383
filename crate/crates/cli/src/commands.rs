use std::f64::consts::TAU;

use combmem::design::{
    compare_matched_open, fit_device_with, optimize_kappa_with, sweep_detuning_with, FitOptions, MatchOptions,
    SweepOptions,
};
use combmem::io::{fmt_sig, write_spectrum_csv, write_sweep_csv, write_trace_csv};
use combmem::spectral::sample_response;
use combmem::time::{run_echo_experiment, EchoRun};
use combmem::DeviceConfig;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{finite, Artifact};
use crate::scenario::{Command, Scenario};

/// Artifacts plus the figures quoted in the summary line.
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub figures: Vec<(&'static str, f64)>,
}

pub fn run(s: &Scenario) -> Result<Outcome, CliError> {
    match &s.command {
        Command::Spectrum { omega_max, points } => spectrum(s, *omega_max, *points),
        Command::Simulate => simulate(s),
        Command::Sweep {
            deltas,
            reoptimize_kappa,
            scaling,
        } => {
            let opts = SweepOptions {
                scaling: *scaling,
                reoptimize_kappa: *reoptimize_kappa,
                policy: s.policy,
                matching: MatchOptions {
                    policy: s.policy,
                    ..MatchOptions::default()
                },
                ..SweepOptions::default()
            };
            let res = sweep_detuning_with(&s.device, &s.pulse, deltas, &opts)?;
            let best = res.records.iter().map(|r| r.eta_first).fold(0.0, f64::max);
            Ok(Outcome {
                artifacts: vec![Artifact::csv("sweep.csv", |w| write_sweep_csv(w, &res))],
                figures: vec![("points", res.records.len() as f64), ("eta_first_max", best)],
            })
        }
        Command::Match { bounds } => {
            let opts = MatchOptions {
                policy: s.policy,
                ..MatchOptions::default()
            };
            let m = optimize_kappa_with(&s.device, &s.pulse, *bounds, &opts)?;
            let v = json!({
                "kappa_opt": m.kappa_opt,
                "kappa_analytic": m.kappa_analytic,
                "eta_opt": m.eta_opt,
                "reflected_fraction": m.reflected_fraction_at_opt,
                "evaluations": m.evaluations,
                "unimodal": m.unimodal,
                "at_boundary": m.at_boundary,
                "brackets_analytic": m.brackets_analytic,
                "kappa_bounds": [m.bounds.0, m.bounds.1],
                "eta_at_bounds": [m.eta_at_bounds.0, m.eta_at_bounds.1],
            });
            Ok(Outcome {
                artifacts: vec![Artifact::json("match.json", v)],
                figures: vec![
                    ("kappa_opt", m.kappa_opt),
                    ("kappa_analytic", m.kappa_analytic),
                    ("eta_opt", m.eta_opt),
                    ("reflected", m.reflected_fraction_at_opt),
                ],
            })
        }
        Command::Fit {
            target_eta,
            target_echo_time,
            free,
            kappa_mode,
        } => {
            let opts = FitOptions {
                kappa_mode: *kappa_mode,
                policy: s.policy,
                ..FitOptions::default()
            };
            let f = fit_device_with(*target_eta, *target_echo_time, free, &s.device, &s.pulse, &opts)?;
            let names: Vec<String> = free.iter().map(ToString::to_string).collect();
            let v = json!({
                "target_eta": target_eta,
                "target_echo_time_ns": target_echo_time * 1e3,
                "free": names,
                "eta": f.eta,
                "residual": f.residual,
                "converged": f.converged,
                "simulations": f.simulations,
                "g_per_us": f.g,
                "gamma_per_us": f.gamma,
                "gamma_r_per_us": f.gamma_r,
                "kappa_per_us": f.kappa,
            });
            Ok(Outcome {
                artifacts: vec![Artifact::json("fit.json", v)],
                figures: vec![("eta", f.eta), ("residual", f.residual), ("g", f.g), ("gamma", f.gamma)],
            })
        }
        Command::Compare { open_multiplier } => {
            let c = compare_matched_open(&s.device, &s.pulse, *open_multiplier, &s.policy)?;
            let variant = |v: &combmem::design::VariantSummary| {
                json!({
                    "kappa_per_us": v.kappa,
                    "eta1": v.eta1,
                    "eta2": v.eta2,
                    "reflected_fraction": v.reflected_fraction,
                })
            };
            let v = json!({
                "open_multiplier": c.open_multiplier,
                "matched": variant(&c.matched),
                "open": variant(&c.open),
                "matched_second_echo_smaller": c.matched_second_echo_smaller,
                "matched_reflection_smaller": c.matched_reflection_smaller,
            });
            let (Some(m), Some(o)) = (&c.matched_run, &c.open_run) else {
                return Err(CliError::Numerical("comparison returned no traces".into()));
            };
            Ok(Outcome {
                artifacts: vec![
                    Artifact::json("comparison.json", v),
                    Artifact::csv("trace_matched.csv", |w| write_trace_csv(w, &m.trace)),
                    Artifact::csv("trace_open.csv", |w| write_trace_csv(w, &o.trace)),
                ],
                figures: vec![
                    ("matched_eta1", c.matched.eta1),
                    ("matched_eta2", c.matched.eta2),
                    ("open_eta1", c.open.eta1),
                    ("open_eta2", c.open.eta2),
                ],
            })
        }
    }
}

/// Default half-width: the comb extent plus two spacings (or `2κ`).
fn default_omega_max(cfg: &DeviceConfig) -> f64 {
    let extent = cfg.minis.iter().map(|m| m.angular_detuning().abs()).fold(0.0, f64::max);
    let margin = cfg
        .median_spacing()
        .map(|d| TAU * d)
        .unwrap_or(0.0)
        .max(cfg.common.kappa);
    extent + 2.0 * margin
}

fn spectrum(s: &Scenario, omega_max: Option<f64>, points: usize) -> Result<Outcome, CliError> {
    let resp = sample_response(
        &s.device,
        omega_max.unwrap_or_else(|| default_omega_max(&s.device)),
        points,
    )?;
    if let Some(w) = &resp.warning {
        eprintln!("warning: {w}");
    }
    let min_r2 = resp
        .reflection
        .iter()
        .map(|r| r.norm_sqr())
        .fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        artifacts: vec![Artifact::csv("spectrum.csv", |w| write_spectrum_csv(w, &resp))],
        figures: vec![("points", resp.omegas.len() as f64), ("min_abs_r2", min_r2)],
    })
}

pub fn echoes_json(run: &EchoRun) -> Value {
    let events: Vec<Value> = run
        .report
        .events
        .iter()
        .map(|e| {
            json!({
                "k": e.k,
                "peak_time_us": e.peak_time,
                "delay_us": e.peak_time - run.pulse_center,
                "energy": e.energy,
                "efficiency": e.efficiency,
            })
        })
        .collect();
    json!({
        "input_energy": run.report.input_energy,
        "reflected_fraction": run.report.reflected_fraction(),
        "pulse_center_us": run.pulse_center,
        "period_us": run.period,
        "dt_us": run.grid.dt,
        "events": events,
    })
}

fn simulate(s: &Scenario) -> Result<Outcome, CliError> {
    let run = run_echo_experiment(&s.device, &s.pulse, &s.policy)?;
    let delay = run.echo_delay(1).map_or(f64::NAN, |d| d * 1e3);
    let figures = vec![
        ("eta1", run.report.efficiency(1)),
        ("echo_delay_ns", delay),
        ("reflected", run.report.reflected_fraction()),
    ];
    Ok(Outcome {
        artifacts: vec![
            Artifact::csv("trace.csv", |w| write_trace_csv(w, &run.trace)),
            Artifact::json("echoes.json", echoes_json(&run)),
        ],
        figures,
    })
}

pub fn summary(command: &str, figures: &[(&str, f64)], paths: &[std::path::PathBuf]) -> String {
    let figs: Vec<String> = figures
        .iter()
        .map(|(k, v)| format!("{k}={}", finite(*v).map_or("nan".into(), six_digits)))
        .collect();
    let files: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    format!("{command}: {} -> {}", figs.join(" "), files.join(", "))
}

fn six_digits(x: f64) -> String {
    fmt_sig(format!("{x:.5e}").parse().unwrap_or(x))
}

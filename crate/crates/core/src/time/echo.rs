use serde::{Deserialize, Serialize};

use super::{integrate, TimeTrace};
use crate::error::Error;
use crate::model::{DeviceConfig, Grid, Pulse};

/// One scored echo window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoEvent {
    /// Echo order, 1 for the first rephasing.
    pub k: usize,
    /// Time of the `|a_out|²` maximum inside the window, µs.
    pub peak_time: f64,
    pub window: (f64, f64),
    pub energy: f64,
    pub efficiency: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EchoReport {
    /// Ordered by `peak_time`.
    pub events: Vec<EchoEvent>,
    pub input_energy: f64,
    /// Output energy inside the input window.
    pub reflected_energy: f64,
}

impl EchoReport {
    pub fn reflected_fraction(&self) -> f64 {
        if self.input_energy > 0.0 {
            self.reflected_energy / self.input_energy
        } else {
            0.0
        }
    }

    /// Efficiency of echo `k`, zero when it fell below the detection threshold.
    pub fn efficiency(&self, k: usize) -> f64 {
        self.event(k).map_or(0.0, |e| e.efficiency)
    }

    pub fn event(&self, k: usize) -> Option<&EchoEvent> {
        self.events.iter().find(|e| e.k == k)
    }
}

/// Events weaker than this fraction of the input energy are dropped.
pub const DETECTION_THRESHOLD: f64 = 1e-4;

/// Score the reflected pulse and the echoes that follow it.
///
/// Echo `k` occupies `[hi + (k−1)·P, hi + k·P)` where `hi` is the end of the
/// input window and `P` the expected period, so for an input window of width
/// `P` centred on the pulse the echo windows are centred on `t₀ + k·P`.
pub fn detect_echoes(trace: &TimeTrace, input_window: (f64, f64), expected_period: f64) -> Result<EchoReport, Error> {
    let t_start = trace.grid.t_start;
    let t_last = trace.grid.time(trace.len().saturating_sub(1));
    let (lo, hi) = input_window;
    if !(hi > lo) || hi <= t_start || lo > t_last || trace.is_empty() {
        return Err(Error::WindowOutsideGrid {
            lo,
            hi,
            t_start,
            t_end: t_last,
        });
    }
    if !(expected_period > 0.0) {
        return Err(Error::Validation(vec![crate::Violation::new(
            "expected_period",
            "period must be positive",
        )]));
    }
    let dt = trace.grid.dt;
    let power: Vec<f64> = trace.a_out.iter().map(|x| x.norm_sqr()).collect();
    let input_energy = trace.input_energy();

    // Half-open index range for [from, to).
    let index_range = |from: f64, to: f64| {
        let first = ((from - t_start) / dt - 1e-9).ceil().max(0.0) as usize;
        let end = (((to - t_start) / dt - 1e-9).ceil().max(0.0) as usize).min(power.len());
        first.min(end)..end
    };

    let reflected_energy = power[index_range(lo.max(t_start), hi)].iter().sum::<f64>() * dt;

    let mut events = Vec::new();
    for k in 1.. {
        let from = hi + (k - 1) as f64 * expected_period;
        if from > t_last {
            break;
        }
        let to = hi + k as f64 * expected_period;
        let range = index_range(from, to);
        if range.is_empty() {
            continue;
        }
        let energy = power[range.clone()].iter().sum::<f64>() * dt;
        if energy > DETECTION_THRESHOLD * input_energy && energy > 0.0 {
            let (peak, _) = power[range.clone()]
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
                );
            events.push(EchoEvent {
                k,
                peak_time: refine_peak(&power, range.start + peak, trace.grid.time(range.start + peak), dt),
                window: (from, to),
                energy,
                efficiency: energy / input_energy,
            });
        }
    }

    Ok(EchoReport {
        events,
        input_energy,
        reflected_energy,
    })
}

/// Vertex of the parabola through the maximum sample and its neighbours.
fn refine_peak(power: &[f64], i: usize, t: f64, dt: f64) -> f64 {
    if i == 0 || i + 1 >= power.len() {
        return t;
    }
    let (y0, y1, y2) = (power[i - 1], power[i], power[i + 1]);
    let curv = y0 - 2.0 * y1 + y2;
    if curv >= 0.0 {
        return t;
    }
    t + (0.5 * (y0 - y2) / curv).clamp(-0.5, 0.5) * dt
}

/// Rules for the automatic grid of an echo experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    /// Grid starts this many pulse widths before the pulse peak.
    pub lead_fwhms: f64,
    /// Grid ends this many comb periods after the pulse peak.
    pub trailing_periods: f64,
    /// `dt ≤ kappa_factor / κ`.
    pub kappa_factor: f64,
    /// `dt ≤ power_fwhm / fwhm_divisor`.
    pub fwhm_divisor: f64,
    /// `dt ≤ detuning_factor / (2π·max|Δ|)`.
    pub detuning_factor: f64,
    /// `dt ≤ coupling_factor / sqrt(Σ g_n²)`.
    pub coupling_factor: f64,
    /// Fixed step, bypassing the rules above.
    pub dt: Option<f64>,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            lead_fwhms: 5.0,
            trailing_periods: 2.5,
            kappa_factor: 0.05,
            fwhm_divisor: 50.0,
            detuning_factor: 0.02,
            coupling_factor: 0.05,
            dt: None,
        }
    }
}

impl GridPolicy {
    pub fn grid_for(&self, config: &DeviceConfig, pulse: &Pulse, period: f64) -> Result<Grid, Error> {
        let t0 = pulse.center_time;
        let dt = match self.dt {
            Some(dt) => dt,
            None => {
                let mut dt = (self.kappa_factor / config.common.kappa).min(pulse.power_fwhm / self.fwhm_divisor);
                let wmax = config.max_angular_detuning();
                if wmax > 0.0 {
                    dt = dt.min(self.detuning_factor / wmax);
                }
                let g = config.collective_coupling();
                if g > 0.0 {
                    dt = dt.min(self.coupling_factor / g);
                }
                dt
            }
        };
        Grid::new(
            t0 - self.lead_fwhms * pulse.power_fwhm,
            t0 + self.trailing_periods * period,
            dt,
        )
    }
}

/// Full output of an automatic echo experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoRun {
    pub grid: Grid,
    /// Comb period `1/Δ`, µs.
    pub period: f64,
    pub input_window: (f64, f64),
    pub pulse_center: f64,
    pub trace: TimeTrace,
    pub report: EchoReport,
}

impl EchoRun {
    /// Delay of echo `k` after the input peak, µs.
    pub fn echo_delay(&self, k: usize) -> Option<f64> {
        self.report.event(k).map(|e| e.peak_time - self.pulse_center)
    }
}

/// Integrate on an automatic grid and score the echoes.
///
/// The comb period is taken from the median adjacent tooth spacing.
pub fn run_echo_experiment(config: &DeviceConfig, pulse: &Pulse, policy: &GridPolicy) -> Result<EchoRun, Error> {
    config.validate()?;
    pulse.validate()?;
    let period = 1.0 / config.median_spacing()?;
    let grid = policy.grid_for(config, pulse, period)?;
    let trace = integrate(config, pulse, &grid)?;
    let t0 = pulse.center_time;
    let input_window = ((t0 - 0.5 * period).max(grid.t_start), t0 + 0.5 * period);
    let report = detect_echoes(&trace, input_window, period)?;
    Ok(EchoRun {
        grid,
        period,
        input_window,
        pulse_center: t0,
        trace,
        report,
    })
}

/// First-echo efficiency on the default automatic grid.
pub fn first_echo_efficiency(config: &DeviceConfig, pulse: &Pulse) -> Result<f64, Error> {
    Ok(run_echo_experiment(config, pulse, &GridPolicy::default())?
        .report
        .efficiency(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_uniform_comb, Centering, CommonResonator};
    use crate::presets;
    use num_complex::Complex64 as C64;

    fn synthetic(values: &[(f64, f64)], grid: Grid) -> TimeTrace {
        // Piecewise-constant output bumps on top of a unit input at t = 0.
        let n = grid.len();
        let mut a_in = vec![C64::new(0.0, 0.0); n];
        let mut a_out = vec![C64::new(0.0, 0.0); n];
        a_in[0] = C64::new(1.0, 0.0);
        for (i, t) in grid.times().enumerate() {
            for &(c, amp) in values {
                if (t - c).abs() < 0.5 * grid.dt {
                    a_out[i] = C64::new(amp, 0.0);
                }
            }
        }
        TimeTrace {
            grid,
            a_in,
            a_out,
            a: None,
            s: None,
        }
    }

    #[test]
    fn windows_and_peaks() {
        let grid = Grid::new(0.0, 3.0, 0.01).unwrap();
        let tr = synthetic(&[(0.0, 0.5), (1.02, 0.6), (1.98, 0.2)], grid);
        let rep = detect_echoes(&tr, (-0.5, 0.5), 1.0).unwrap();
        assert!((rep.reflected_fraction() - 0.25).abs() < 1e-12);
        assert_eq!(rep.events.len(), 2);
        assert_eq!(rep.events[0].k, 1);
        // Isolated single-sample bump: the parabola is symmetric about it.
        assert!((rep.events[0].peak_time - 1.02).abs() < 1e-9);
        assert!((rep.efficiency(1) - 0.36).abs() < 1e-12);
        assert!((rep.events[1].peak_time - 1.98).abs() < 1e-9);
        assert_eq!(rep.efficiency(3), 0.0);
    }

    #[test]
    fn zero_input_has_no_events() {
        let grid = Grid::new(0.0, 1.0, 0.01).unwrap();
        let tr = TimeTrace {
            grid,
            a_in: vec![C64::new(0.0, 0.0); grid.len()],
            a_out: vec![C64::new(0.0, 0.0); grid.len()],
            a: None,
            s: None,
        };
        let rep = detect_echoes(&tr, (0.0, 0.2), 0.2).unwrap();
        assert!(rep.events.is_empty());
        assert_eq!(rep.reflected_energy, 0.0);
        assert_eq!(rep.reflected_fraction(), 0.0);
    }

    #[test]
    fn window_outside_grid() {
        let grid = Grid::new(0.0, 1.0, 0.01).unwrap();
        let tr = synthetic(&[], grid);
        assert!(matches!(
            detect_echoes(&tr, (2.0, 3.0), 0.5),
            Err(Error::WindowOutsideGrid { .. })
        ));
        assert!(detect_echoes(&tr, (-2.0, -1.0), 0.5).is_err());
    }

    #[test]
    fn no_coupling_no_echo() {
        let cfg = DeviceConfig::new(
            build_uniform_comb(5, 13.0, 0.0, 1e-3, Centering::ToothAtCenter).unwrap(),
            CommonResonator::new(500.0, 0.0, 1e-3),
        );
        // Short probe so the delayed prompt reflection stays inside the input window.
        let fwhm = 0.15 / 13.0;
        let eta = first_echo_efficiency(&cfg, &Pulse::gaussian(1.0, 5.0 * fwhm, fwhm)).unwrap();
        assert_eq!(eta, 0.0);
    }

    #[test]
    fn efficiency_is_amplitude_invariant() {
        let cfg = presets::reference_device(5, 13.0, 1e-3, 1e-3);
        let p = presets::reference_pulse(13.0);
        let e1 = first_echo_efficiency(&cfg, &p).unwrap();
        let e2 = first_echo_efficiency(&cfg, &p.with_amplitude(2.0)).unwrap();
        assert!(e1 > 0.9);
        assert!((e1 - e2).abs() < 1e-9);
    }

    #[test]
    fn single_tooth_has_no_period() {
        let cfg = DeviceConfig::new(
            build_uniform_comb(1, 13.0, 10.0, 0.0, Centering::ToothAtCenter).unwrap(),
            CommonResonator::new(50.0, 0.0, 0.0),
        );
        assert!(first_echo_efficiency(&cfg, &presets::reference_pulse(13.0)).is_err());
    }
}

//! Time-domain integration of the coupled-mode equations.
//!
//! State is the common-mode amplitude `a` and one amplitude `s_n` per tooth:
//!
//! ```text
//! ds_n/dt = −(γ_n + i2πΔ_n) s_n − g_n a
//! da/dt   = −(κ/2 + γ_r + i2πΔ_r) a + Σ g_n s_n + √κ a_in(t)
//! a_out   = √κ a − a_in
//! ```
//!
//! Integration is fixed-step classical RK4 from the zero state, so traces
//! stay on a uniform grid that the spectral pathway can reproduce.

mod echo;

pub use echo::{detect_echoes, first_echo_efficiency, run_echo_experiment, EchoEvent, EchoReport, EchoRun, GridPolicy};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{DeviceConfig, Grid, Pulse};

/// Anything that can drive the waveguide port.
pub trait Drive: Sync {
    fn amplitude(&self, t: f64) -> C64;
}

impl Drive for Pulse {
    #[inline]
    fn amplitude(&self, t: f64) -> C64 {
        self.envelope(t)
    }
}

/// Sum of several pulses.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain(pub Vec<Pulse>);

impl Drive for PulseTrain {
    fn amplitude(&self, t: f64) -> C64 {
        self.0.iter().map(|p| p.envelope(t)).sum()
    }
}

/// Instantaneous device state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub a: C64,
    pub s: Vec<C64>,
}

impl StateVector {
    pub fn zero(n: usize) -> Self {
        Self {
            a: C64::new(0.0, 0.0),
            s: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// `|a|² + Σ|s_n|²`.
    pub fn stored_energy(&self) -> f64 {
        self.a.norm_sqr() + self.s.iter().map(|x| x.norm_sqr()).sum::<f64>()
    }
}

/// Sampled complex histories on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub grid: Grid,
    pub a_in: Vec<C64>,
    pub a_out: Vec<C64>,
    /// Common-mode amplitude, absent for frequency-domain traces.
    pub a: Option<Vec<C64>>,
    /// Per-tooth amplitudes, `s[n][i]`.
    pub s: Option<Vec<Vec<C64>>>,
}

impl TimeTrace {
    pub fn len(&self) -> usize {
        self.a_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_out.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.times().take(self.len())
    }

    /// Rectangle-rule `∫|a_in|² dt` over the whole trace.
    pub fn input_energy(&self) -> f64 {
        self.a_in.iter().map(|x| x.norm_sqr()).sum::<f64>() * self.grid.dt
    }

    /// Rectangle-rule `∫|a_out|² dt` over the whole trace.
    pub fn output_energy(&self) -> f64 {
        self.a_out.iter().map(|x| x.norm_sqr()).sum::<f64>() * self.grid.dt
    }

    /// State at the last grid point, when the modes were recorded.
    pub fn final_state(&self) -> Option<StateVector> {
        let a = *self.a.as_ref()?.last()?;
        let s = self
            .s
            .as_ref()?
            .iter()
            .map(|ch| ch.last().copied().unwrap_or_default())
            .collect();
        Some(StateVector { a, s })
    }

    /// Drop the internal mode channels.
    pub fn without_modes(mut self) -> Self {
        self.a = None;
        self.s = None;
        self
    }
}

/// Trapezoid rule for uniformly sampled values.
pub fn trapezoid(values: impl IntoIterator<Item = f64>, dt: f64) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    let mut sum = 0.5 * first;
    let mut last = first;
    let mut n = 1usize;
    for v in it {
        sum += v;
        last = v;
        n += 1;
    }
    if n == 1 {
        return 0.0;
    }
    (sum - 0.5 * last) * dt
}

/// Largest step the integrator accepts for `config`, with the name of the
/// scale that sets it.
pub fn max_stable_step(config: &DeviceConfig) -> (f64, &'static str) {
    let max_gamma = config
        .minis
        .iter()
        .map(|m| m.decay_rate)
        .fold(config.common.decay_rate, f64::max);
    let scales = [
        ("kappa", config.common.kappa),
        ("detuning", config.max_angular_detuning()),
        ("decay", max_gamma),
        ("coupling", config.collective_coupling()),
    ];
    let (name, fastest) = scales
        .iter()
        .copied()
        .fold(("kappa", 0.0), |acc, s| if s.1 > acc.1 { s } else { acc });
    (0.1 / fastest, name)
}

/// Precomputed right-hand side of the linear system.
struct Rhs {
    common_rate: C64,
    sqrt_kappa: f64,
    tooth_rate: Vec<C64>,
    coupling: Vec<f64>,
}

impl Rhs {
    fn new(config: &DeviceConfig) -> Self {
        let c = &config.common;
        Self {
            common_rate: C64::new(0.5 * c.kappa + c.decay_rate, std::f64::consts::TAU * c.detuning),
            sqrt_kappa: c.kappa.sqrt(),
            tooth_rate: config
                .minis
                .iter()
                .map(|m| C64::new(m.decay_rate, m.angular_detuning()))
                .collect(),
            coupling: config.minis.iter().map(|m| m.coupling).collect(),
        }
    }

    /// `out = f(y, a_in)`; index 0 is the common mode.
    #[inline]
    fn eval(&self, y: &[C64], a_in: C64, out: &mut [C64]) {
        let a = y[0];
        let mut feed = C64::new(0.0, 0.0);
        for n in 0..self.coupling.len() {
            let s = y[n + 1];
            feed += self.coupling[n] * s;
            out[n + 1] = -self.tooth_rate[n] * s - self.coupling[n] * a;
        }
        out[0] = -self.common_rate * a + feed + self.sqrt_kappa * a_in;
    }
}

/// Integrate from the zero state with any drive.
pub fn integrate_drive<D: Drive + ?Sized>(config: &DeviceConfig, drive: &D, grid: &Grid) -> Result<TimeTrace, Error> {
    config.validate()?;
    grid.validate()?;
    let (limit, scale) = max_stable_step(config);
    if grid.dt > limit {
        return Err(Error::StepTooLarge {
            dt: grid.dt,
            scale,
            limit,
        });
    }

    let rhs = Rhs::new(config);
    let n = config.n_teeth();
    let len = grid.len();
    let dt = grid.dt;
    let zero = C64::new(0.0, 0.0);

    let mut y = vec![zero; n + 1];
    let mut tmp = vec![zero; n + 1];
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![zero; n + 1],
        vec![zero; n + 1],
        vec![zero; n + 1],
        vec![zero; n + 1],
    );

    let mut a_in = Vec::with_capacity(len);
    let mut a_out = Vec::with_capacity(len);
    let mut a_hist = Vec::with_capacity(len);
    let mut s_hist = vec![Vec::with_capacity(len); n];

    let mut drive_now = drive.amplitude(grid.time(0));
    for i in 0..len {
        let t = grid.time(i);
        a_in.push(drive_now);
        a_out.push(rhs.sqrt_kappa * y[0] - drive_now);
        a_hist.push(y[0]);
        for (ch, v) in s_hist.iter_mut().zip(&y[1..]) {
            ch.push(*v);
        }
        if i + 1 == len {
            break;
        }

        let drive_mid = drive.amplitude(t + 0.5 * dt);
        let drive_next = drive.amplitude(grid.time(i + 1));

        rhs.eval(&y, drive_now, &mut k1);
        for j in 0..=n {
            tmp[j] = y[j] + 0.5 * dt * k1[j];
        }
        rhs.eval(&tmp, drive_mid, &mut k2);
        for j in 0..=n {
            tmp[j] = y[j] + 0.5 * dt * k2[j];
        }
        rhs.eval(&tmp, drive_mid, &mut k3);
        for j in 0..=n {
            tmp[j] = y[j] + dt * k3[j];
        }
        rhs.eval(&tmp, drive_next, &mut k4);
        for j in 0..=n {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if !y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite { t: grid.time(i + 1) });
        }
        drive_now = drive_next;
    }

    Ok(TimeTrace {
        grid: *grid,
        a_in,
        a_out,
        a: Some(a_hist),
        s: Some(s_hist),
    })
}

/// Integrate the response to a single pulse.
pub fn integrate(config: &DeviceConfig, pulse: &Pulse, grid: &Grid) -> Result<TimeTrace, Error> {
    pulse.validate()?;
    integrate_drive(config, pulse, grid)
}

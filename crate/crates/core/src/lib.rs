//! Simulation and design toolkit for multiresonator photon-echo memories.
//!
//! A set of narrow mini-resonators (the comb) couples to one broadband common
//! resonator, which in turn couples to a single waveguide port with rate `κ`.
//! The crate integrates the coupled-mode equations in time ([`time`]), solves
//! them in frequency ([`spectral`]), evaluates closed-form efficiency
//! estimates ([`analytics`]) and searches for the impedance-matched `κ`
//! ([`design`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod design;
pub mod error;
pub mod io;
pub mod model;
pub mod presets;
pub mod spectral;
pub mod time;

pub use error::{Error, Violation};
pub use model::{build_uniform_comb, Centering, CommonResonator, DeviceConfig, Grid, MiniResonator, Pulse, PulseShape};

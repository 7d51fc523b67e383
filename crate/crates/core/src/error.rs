use std::fmt;

use thiserror::Error;

/// One failed invariant, addressed by its field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {}", join(.0))]
    Validation(Vec<Violation>),
    #[error("comb spacing needs at least two teeth (got {n_teeth})")]
    SpacingUnavailable { n_teeth: usize },
    #[error("time step {dt} µs does not resolve the {scale} scale (need dt <= {limit} µs)")]
    StepTooLarge { dt: f64, scale: &'static str, limit: f64 },
    #[error("state became non-finite at t = {t} µs")]
    NonFinite { t: f64 },
    #[error("window [{lo}, {hi}] µs lies outside the trace [{t_start}, {t_end}] µs")]
    WindowOutsideGrid { lo: f64, hi: f64, t_start: f64, t_end: f64 },
    #[error("aliasing: {0}; use a longer time window")]
    Aliasing(String),
    #[error("{0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::SpacingUnavailable { .. })
    }
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

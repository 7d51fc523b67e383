use serde::{Deserialize, Serialize};

use crate::analytics::{kappa_matched, summarize_comb};
use crate::error::{Error, Violation};
use crate::model::{DeviceConfig, Pulse};
use crate::time::{run_echo_experiment, EchoRun, GridPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub kappa: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub reflected_fraction: f64,
}

impl VariantSummary {
    fn from_run(kappa: f64, run: &EchoRun) -> Self {
        Self {
            kappa,
            eta1: run.report.efficiency(1),
            eta2: run.report.efficiency(2),
            reflected_fraction: run.report.reflected_fraction(),
        }
    }

    /// `η₂/η₁`, infinite when the first echo is missing.
    pub fn second_to_first(&self) -> f64 {
        if self.eta1 > 0.0 {
            self.eta2 / self.eta1
        } else {
            f64::INFINITY
        }
    }
}

/// Matched and over-coupled runs of the same comb and pulse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub open_multiplier: f64,
    pub matched: VariantSummary,
    pub open: VariantSummary,
    /// Matched `η₂/η₁` is below the open one.
    pub matched_second_echo_smaller: bool,
    /// Matched prompt reflection is below the open one.
    pub matched_reflection_smaller: bool,
    #[serde(skip)]
    pub matched_run: Option<EchoRun>,
    #[serde(skip)]
    pub open_run: Option<EchoRun>,
}

/// Run the comb at `κ₀` and at `open_multiplier·κ₀`.
pub fn compare_matched_open(
    config: &DeviceConfig,
    pulse: &Pulse,
    open_multiplier: f64,
    policy: &GridPolicy,
) -> Result<Comparison, Error> {
    config.validate()?;
    if !(open_multiplier > 0.0) || !open_multiplier.is_finite() {
        return Err(Error::Validation(vec![Violation::new(
            "open_multiplier",
            "multiplier must be positive",
        )]));
    }
    let k0 = kappa_matched(&summarize_comb(config)?, config.common.decay_rate);
    let k_open = open_multiplier * k0;
    let (matched_run, open_run) = rayon::join(
        || run_echo_experiment(&config.with_kappa(k0), pulse, policy),
        || run_echo_experiment(&config.with_kappa(k_open), pulse, policy),
    );
    let (matched_run, open_run) = (matched_run?, open_run?);
    let matched = VariantSummary::from_run(k0, &matched_run);
    let open = VariantSummary::from_run(k_open, &open_run);
    Ok(Comparison {
        open_multiplier,
        matched_second_echo_smaller: matched.second_to_first() < open.second_to_first(),
        matched_reflection_smaller: matched.reflected_fraction < open.reflected_fraction,
        matched,
        open,
        matched_run: Some(matched_run),
        open_run: Some(open_run),
    })
}

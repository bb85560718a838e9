//! Noise calibration, sampling, the inverse error function and the zCDP ledger.

mod erf;
mod ledger;
mod noise;
mod rng;

pub use erf::inverse_erf;
pub use ledger::{Charge, LedgerView, PrivacyLedger, BUDGET_SLACK};
pub use noise::{gaussian_scale, gumbel_from_uniform, sample_gaussian, sample_gumbel, NoiseScale};
pub use rng::RandomSource;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DpError {
    #[error("privacy budget must be positive and finite, got {0}")]
    InvalidBudget(f64),
    #[error("sensitivity must be nonnegative and finite, got {0}")]
    InvalidSensitivity(f64),
    #[error("insufficient privacy budget: requested {requested}, remaining {remaining}")]
    InsufficientBudget { requested: f64, remaining: f64 },
    #[error("confidence level must lie in [0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("noise scale must be nonnegative and finite, got {0}")]
    InvalidScale(f64),
}

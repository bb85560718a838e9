use serde::{Deserialize, Serialize};

use super::DpError;

/// Tolerance on the budget cap so that charges summing exactly to the total
/// are not rejected by rounding.
pub const BUDGET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub label: String,
    pub rho: f64,
}

/// Append-only zCDP ledger with a hard cap. Sequential composition: the
/// spent budget is the sum of all charges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    total: f64,
    charges: Vec<Charge>,
}

/// Read-only snapshot of a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerView {
    pub total: f64,
    pub charges: Vec<Charge>,
    pub spent: f64,
    pub remaining: f64,
}

impl PrivacyLedger {
    pub fn new(total: f64) -> Result<Self, DpError> {
        if !(total.is_finite() && total >= 0.0) {
            return Err(DpError::InvalidBudget(total));
        }
        Ok(Self {
            total,
            charges: Vec::new(),
        })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    /// Kahan sum of all charges.
    pub fn spent(&self) -> f64 {
        kahan(self.charges.iter().map(|c| c.rho))
    }

    pub fn remaining(&self) -> f64 {
        (self.total - self.spent()).max(0.0)
    }

    pub fn can_afford(&self, rho: f64) -> bool {
        kahan(self.charges.iter().map(|c| c.rho).chain([rho])) <= self.total + BUDGET_SLACK
    }

    /// Appends a charge, or leaves the ledger untouched and reports why not.
    pub fn charge(&mut self, label: &str, rho: f64) -> Result<(), DpError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(DpError::InvalidBudget(rho));
        }
        if !self.can_afford(rho) {
            return Err(DpError::InsufficientBudget {
                requested: rho,
                remaining: self.remaining(),
            });
        }
        self.charges.push(Charge {
            label: label.to_string(),
            rho,
        });
        Ok(())
    }

    pub fn view(&self) -> LedgerView {
        LedgerView {
            total: self.total,
            charges: self.charges.clone(),
            spent: self.spent(),
            remaining: self.remaining(),
        }
    }
}

fn kahan(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

//! Dual query accounting.
//!
//! Every run owns one [`QueryLedger`]. It records two quantities side by side:
//! the classical component-gradient samples that were actually drawn, and the
//! modeled quantum query cost charged from the closed-form cost formulas
//! (polylog factors dropped, constant one).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub mod phase {
    pub const FULL_GRADIENT: &str = "full_gradient";
    pub const QVRG: &str = "qvrg";
    pub const MEAN: &str = "mean_estimation";
    pub const MLMC: &str = "mlmc";
}

/// Relative slack used when rounding formula values up to an integer charge.
///
/// Quantities such as `sqrt(d) * sigma / sigma_hat` are mathematically
/// integral for many parameter choices (e.g. `sqrt(b d)` with `b d` a perfect
/// square) but land a few ulps above the integer in floating point.
const CEIL_SLACK: f64 = 1e-9;

/// `ceil(x)` that treats values within a relative `1e-9` of an integer as that integer.
pub fn snapped_ceil(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let rounded = x.round();
    if (x - rounded).abs() <= CEIL_SLACK * rounded.max(1.0) {
        rounded
    } else {
        x.ceil()
    }
}

/// Cost charged for one quantum mean estimation of a `d`-dimensional variable
/// with variance bound `sigma^2` to target root-mean-square error `sigma_hat`.
pub fn quantum_mean_cost(d: usize, sigma: f64, sigma_hat: f64) -> Result<f64> {
    if !(sigma_hat > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_hat must be positive, got {sigma_hat}"
        )));
    }
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(snapped_ceil((d as f64).sqrt() * sigma / sigma_hat))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseCost {
    pub classical: u64,
    pub quantum: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryLedger {
    classical: u64,
    quantum: f64,
    phases: BTreeMap<String, PhaseCost>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn classical(&self) -> u64 {
        self.classical
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn phases(&self) -> &BTreeMap<String, PhaseCost> {
        &self.phases
    }

    pub fn phase(&self, label: &str) -> PhaseCost {
        self.phases.get(label).copied().unwrap_or_default()
    }

    pub fn charge_classical(&mut self, phase: &str, count: u64) {
        if count == 0 {
            return;
        }
        self.classical += count;
        self.phases.entry(phase.to_string()).or_default().classical += count;
    }

    /// Adds a pre-computed modeled quantum charge. Negative or non-finite
    /// amounts are rejected since both counters are monotone.
    pub fn charge_quantum(&mut self, phase: &str, amount: f64) -> Result<()> {
        if amount < 0.0 || !amount.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "quantum charge must be finite and non-negative, got {amount}"
            )));
        }
        if amount == 0.0 {
            return Ok(());
        }
        self.quantum += amount;
        self.phases.entry(phase.to_string()).or_default().quantum += amount;
        Ok(())
    }

    /// Charges `ceil(sqrt(d) * sigma / sigma_hat)` and returns the amount.
    pub fn charge_quantum_mean(
        &mut self,
        phase: &str,
        d: usize,
        sigma: f64,
        sigma_hat: f64,
    ) -> Result<f64> {
        let amount = quantum_mean_cost(d, sigma, sigma_hat)?;
        self.charge_quantum(phase, amount)?;
        Ok(amount)
    }

    /// Folds another ledger's counts into this one, phase by phase.
    pub fn absorb(&mut self, other: &QueryLedger) {
        for (label, cost) in &other.phases {
            self.charge_classical(label, cost.classical);
            // other's quantum entries are valid by construction
            self.quantum += cost.quantum;
            self.phases.entry(label.clone()).or_default().quantum += cost.quantum;
        }
    }

    pub fn snapshot(&self) -> (u64, f64) {
        (self.classical, self.quantum)
    }

    /// One CSV row per phase: `run_id,phase,classical,quantum_modeled`.
    pub fn to_csv_rows(&self, run_id: &str) -> String {
        let mut out = String::new();
        for (label, cost) in &self.phases {
            let _ = writeln!(out, "{run_id},{label},{},{}", cost.classical, cost.quantum);
        }
        out
    }
}

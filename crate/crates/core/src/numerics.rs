//! Saturating arithmetic and the scaling constants shared by every
//! construction.
//!
//! Values are plain `f64`; finite precision is modelled only through the
//! exact clamps in [`sat_sigmoid`] and [`sat_tanh`]: any input at or beyond
//! `±beta` produces the exact bound. All lemma-level claims are exactness or
//! inequality statements at saturation, and the clamps make those exact.
//! The representable set is therefore "doubles plus exact clamping"; it is not
//! enumerated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `tanh(1)`, the value an LSTM hidden unit takes when its cell holds 1.
pub fn gamma() -> f64 {
    1f64.tanh()
}

/// Scaling constants of the constructions.
///
/// `lambda` scales the LSTM gate parameters and must exceed `2 beta / gamma`
/// so every gate pre-activation lands outside `(-beta, beta)`. `zeta` scales
/// the readout and must exceed `2.4 / gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericConfig {
    pub beta: f64,
    pub lambda: f64,
    pub zeta: f64,
}

impl NumericConfig {
    /// Default constants for `k` bracket types: `beta = 20`.
    pub fn for_k(k: usize) -> Self {
        Self::with_beta(20.0, k)
    }

    /// `lambda = 2 beta / gamma + 1` and
    /// `zeta = max(2.4 / gamma + 1, 5, ln(8k) / gamma + 1)`.
    ///
    /// The `ln(8k)` term keeps every disallowed token at most `1/(10k)` in the
    /// full-stack state, where only one token is allowed and the partition
    /// function is not bounded below by `k e^{zeta gamma / 2}`.
    pub fn with_beta(beta: f64, k: usize) -> Self {
        let g = gamma();
        let lambda = 2.0 * beta / g + 1.0;
        let zeta = (2.4 / g + 1.0)
            .max(5.0)
            .max((8.0 * k.max(1) as f64).ln() / g + 1.0);
        Self { beta, lambda, zeta }
    }

    pub fn gamma(&self) -> f64 {
        gamma()
    }

    /// Truncation threshold `1 / (2(k+1))`.
    pub fn epsilon(k: usize) -> f64 {
        1.0 / (2.0 * (k as f64 + 1.0))
    }

    /// Upper bound on the probability of any disallowed token, `1 / (10k)`.
    pub fn disallowed_bound(k: usize) -> f64 {
        1.0 / (10.0 * k as f64)
    }

    /// `0.5 zeta gamma`: magnitude of every readout logit.
    pub fn half_margin(&self) -> f64 {
        0.5 * self.zeta * gamma()
    }

    /// Checks the hard constraints `beta > 0`, `lambda > 2 beta / gamma`,
    /// `zeta > 2.4 / gamma`.
    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let g = gamma();
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::NumericConstraint(format!(
                "beta must be positive and finite (got {})",
                self.beta
            )));
        }
        if !(self.lambda > 2.0 * self.beta / g) {
            return Err(Error::NumericConstraint(format!(
                "lambda must exceed 2*beta/gamma = {:.6} (got {})",
                2.0 * self.beta / g,
                self.lambda
            )));
        }
        if !(self.zeta > 2.4 / g) {
            return Err(Error::NumericConstraint(format!(
                "zeta must exceed 2.4/gamma = {:.6} (got {})",
                2.4 / g,
                self.zeta
            )));
        }
        Ok(())
    }

    /// Whether `zeta` is large enough for the `1/(10k)` disallowed-token bound
    /// in every stack state (`e^{zeta gamma} > 8k`). Returns a description of
    /// the shortfall otherwise.
    pub fn margin_shortfall(&self, k: usize) -> Option<String> {
        let need = (8.0 * k as f64).ln() / gamma();
        if self.zeta > 2.4 / gamma() && self.zeta > need {
            None
        } else {
            Some(format!(
                "zeta = {} does not exceed max(2.4/gamma, ln(8k)/gamma) = {:.6} for k = {k}",
                self.zeta,
                need.max(2.4 / gamma())
            ))
        }
    }
}

/// Sigmoid clamped to exactly 0 at or below `-beta` and exactly 1 at or above
/// `beta`.
pub fn sat_sigmoid(cfg: &NumericConfig, x: f64) -> f64 {
    if x >= cfg.beta {
        1.0
    } else if x <= -cfg.beta {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Hyperbolic tangent clamped to exactly `±1` at or beyond `±beta`.
pub fn sat_tanh(cfg: &NumericConfig, x: f64) -> f64 {
    if x >= cfg.beta {
        1.0
    } else if x <= -cfg.beta {
        -1.0
    } else {
        x.tanh()
    }
}

/// Normalized exponential with max subtraction. Panics on an empty slice.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    assert!(!logits.is_empty(), "softmax of an empty vector");
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

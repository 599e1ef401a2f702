//! SuperLoss confidence weighting.
//!
//! Each sample loss `l` gets a confidence
//! `sigma* = exp(-W0(max(-2/e, (l - tau) / lam) / 2))` and contributes
//! `(l - tau) * sigma* + lam * ln(sigma*)^2`. High-loss samples get small
//! `sigma*`. `tau` tracks an exponential moving average of batch mean loss.

use serde::{Deserialize, Serialize};

use crate::curriculum::lambert::lambert_w0;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperLossParams {
    pub tau: f64,
    pub lam: f64,
}

impl SuperLossParams {
    pub fn new(tau: f64, lam: f64) -> Result<Self> {
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(Error::config(format!("superloss lambda must be > 0, got {lam}")));
        }
        if !tau.is_finite() {
            return Err(Error::config("superloss tau must be finite"));
        }
        Ok(SuperLossParams { tau, lam })
    }
}

/// Optimal confidence for a loss value.
pub fn superloss_sigma(loss: f64, params: &SuperLossParams) -> f64 {
    let y = ((loss - params.tau) / params.lam).max(-2.0 / std::f64::consts::E);
    // argument stays >= -1/e after the clamp
    let w = lambert_w0(0.5 * y).unwrap_or(-1.0);
    (-w).exp()
}

/// Per-sample weighted contribution `(l - tau) * sigma + lam * ln(sigma)^2`.
pub fn superloss_value(loss: f64, sigma: f64, params: &SuperLossParams) -> f64 {
    let ls = sigma.ln();
    (loss - params.tau) * sigma + params.lam * ls * ls
}

/// Result of weighting one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Weighted {
    pub sigma: Vec<f64>,
    /// Mean weighted contribution over the batch.
    pub value: f64,
    /// `value - mean(sigma_i * l_i)`, a constant with respect to the parameters.
    pub offset: f64,
}

/// SuperLoss with an exponential-moving-average baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub lam: f64,
    pub decay: f64,
    /// Unset until the first batch, which seeds it with its mean loss.
    pub tau: Option<f64>,
}

impl Curriculum {
    pub fn new(lam: f64, decay: f64) -> Result<Self> {
        SuperLossParams::new(0.0, lam)?;
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::config(format!("curriculum decay must be in [0, 1), got {decay}")));
        }
        Ok(Curriculum { lam, decay, tau: None })
    }

    /// Weights one batch of per-sample losses, then updates `tau`.
    pub fn apply(&mut self, losses: &[f64]) -> Result<Weighted> {
        if losses.is_empty() {
            return Err(Error::config("curriculum needs a non-empty batch"));
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        let tau = *self.tau.get_or_insert(mean);
        let params = SuperLossParams::new(tau, self.lam)?;
        let w = apply_curriculum(losses, &params)?;
        self.tau = Some(self.decay * tau + (1.0 - self.decay) * mean);
        Ok(w)
    }
}

/// Mean over the batch of the SuperLoss contribution, with per-sample confidences.
pub fn apply_curriculum(losses: &[f64], params: &SuperLossParams) -> Result<Weighted> {
    if losses.is_empty() {
        return Err(Error::config("curriculum needs a non-empty batch"));
    }
    let n = losses.len() as f64;
    let sigma: Vec<f64> = losses.iter().map(|&l| superloss_sigma(l, params)).collect();
    let value = losses
        .iter()
        .zip(&sigma)
        .map(|(&l, &s)| superloss_value(l, s, params))
        .sum::<f64>()
        / n;
    let linear = losses.iter().zip(&sigma).map(|(l, s)| l * s).sum::<f64>() / n;
    Ok(Weighted { sigma, value, offset: value - linear })
}

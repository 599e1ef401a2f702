//! Loss-threshold membership inference.
//!
//! The attack predicts "member" when a sample's loss is below a threshold.
//! The threshold is calibrated on `D_r` (members) against `D_test`
//! (non-members) to maximise balanced accuracy; `D_f` is never read during
//! calibration. Success is the share of `D_f` predicted as members.
//!
//! When the best balanced accuracy is not significant under a two-sample
//! Kolmogorov-Smirnov test at the 5% level, the losses carry no membership
//! signal and the threshold falls back to the pooled median instead of an
//! arbitrary noise maximum.

use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::eval::metrics::per_sample_loss;
use crate::nn::Model;

pub const MIN_NON_MEMBERS: usize = 10;

/// Two-sample Kolmogorov-Smirnov coefficient for a 5% significance level.
pub const KS_COEFFICIENT: f64 = 1.358;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiaAttack {
    pub threshold: f64,
    /// Balanced accuracy on the calibration data at `threshold`, percent.
    pub calibration_accuracy: f64,
    /// Whether the best split passed the significance test.
    pub significant: bool,
}

impl MiaAttack {
    /// Picks the threshold maximising `(TPR + TNR) / 2`. Candidates are the
    /// midpoints between consecutive distinct losses plus both extremes; the
    /// first (smallest) maximiser wins, subject to the significance fallback.
    pub fn calibrate(members: &[f64], non_members: &[f64]) -> Result<Self> {
        if members.is_empty() || non_members.is_empty() {
            return Err(Error::InsufficientData("calibration needs members and non-members".into()));
        }
        let mut pooled: Vec<(f64, bool)> = members
            .iter()
            .map(|&l| (l, true))
            .chain(non_members.iter().map(|&l| (l, false)))
            .collect();
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nm, nn) = (members.len() as f64, non_members.len() as f64);

        // (threshold, balanced accuracy, pooled share predicted member)
        let mut candidates = vec![(pooled[0].0 - 1.0, 0.5, 0.0)];
        let (mut tp, mut fp) = (0.0, 0.0);
        for i in 0..pooled.len() {
            if pooled[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            let next = pooled.get(i + 1).map(|p| p.0);
            if next == Some(pooled[i].0) {
                continue;
            }
            let tau = match next {
                Some(n) => 0.5 * (pooled[i].0 + n),
                None => pooled[i].0 + 1.0,
            };
            let bal = 0.5 * (tp / nm + (nn - fp) / nn);
            candidates.push((tau, bal, (i + 1) as f64 / pooled.len() as f64));
        }
        let best = candidates
            .iter()
            .copied()
            .reduce(|a, b| if b.1 > a.1 { b } else { a })
            .expect("at least one candidate");
        let ks = 2.0 * (best.1 - 0.5);
        let critical = KS_COEFFICIENT * ((nm + nn) / (nm * nn)).sqrt();
        let significant = ks >= critical;
        let chosen = if significant {
            best
        } else {
            candidates
                .iter()
                .copied()
                .reduce(|a, b| if (b.2 - 0.5).abs() < (a.2 - 0.5).abs() { b } else { a })
                .expect("at least one candidate")
        };
        Ok(MiaAttack { threshold: chosen.0, calibration_accuracy: 100.0 * chosen.1, significant })
    }

    pub fn is_member(&self, loss: f64) -> bool {
        loss < self.threshold
    }

    /// Percentage of `losses` predicted as members.
    pub fn member_rate(&self, losses: &[f64]) -> Option<f64> {
        if losses.is_empty() {
            return None;
        }
        let hits = losses.iter().filter(|&&l| self.is_member(l)).count();
        Some(100.0 * hits as f64 / losses.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiaOutcome {
    pub attack: MiaAttack,
    /// `None` when `D_f` is empty.
    pub success: Option<f64>,
    /// Training indices read while calibrating.
    #[serde(skip)]
    pub calibration_reads: Vec<usize>,
}

/// Calibrates on `D_r` vs `D_test`, then attacks `D_f`.
pub fn mia_success(model: &Model, split: &DatasetSplit) -> Result<MiaOutcome> {
    if split.test_len() < MIN_NON_MEMBERS {
        return Err(Error::InsufficientData(format!(
            "membership inference needs at least {MIN_NON_MEMBERS} test samples, got {}",
            split.test_len()
        )));
    }
    let retain = split.retain_indices();
    let (rx, ry) = split.train_subset(&retain);
    let members = per_sample_loss(model, &rx, &ry)?;
    let non_members = per_sample_loss(model, split.test_x(), split.test_y())?;
    let attack = MiaAttack::calibrate(&members, &non_members)?;

    let (fx, fy) = split.forget_set();
    let success = attack.member_rate(&per_sample_loss(model, &fx, &fy)?);
    Ok(MiaOutcome { attack, success, calibration_reads: retain })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_losses() {
        let a = MiaAttack::calibrate(&[0.0; 20], &[1.0; 20]).unwrap();
        assert_eq!(a.calibration_accuracy, 100.0);
        assert_eq!(a.threshold, 0.5);
        assert_eq!(a.member_rate(&[0.0; 5]), Some(100.0));
        assert_eq!(a.member_rate(&[1.0; 5]), Some(0.0));
    }

    #[test]
    fn indistinguishable_is_chance() {
        let a = MiaAttack::calibrate(&[0.3; 10], &[0.3; 10]).unwrap();
        assert_eq!(a.calibration_accuracy, 50.0);
        assert!(!a.significant);
    }

    #[test]
    fn weak_signal_falls_back_to_median() {
        let members: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let non_members: Vec<f64> = (0..40).map(|i| i as f64 + 0.5).collect();
        let a = MiaAttack::calibrate(&members, &non_members).unwrap();
        assert!(!a.significant);
        let rate = a.member_rate(&[members.clone(), non_members.clone()].concat()).unwrap();
        assert!((rate - 50.0).abs() < 2.0);
    }

    #[test]
    fn empty_calibration_rejected() {
        assert!(MiaAttack::calibrate(&[], &[1.0]).is_err());
    }
}

//! Eager loss evaluations on plain tensors (no tape).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tape::{kl_row, PROB_FLOOR};
use crate::nn::tensor::{log_softmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSpec {
    TaskCrossEntropy,
    KlDivergence,
    RepresentationDistance,
}

fn check_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.data().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric { step: 0, msg: format!("non-finite {what}") })
    }
}

/// Mean over rows of `KL(softmax(teacher/T) || softmax(student/T))`, probabilities
/// clamped to `[1e-12, 1]` inside the logs.
pub fn kl_loss(student_logits: &Tensor, teacher_logits: &Tensor, temperature: f64) -> Result<f64> {
    if student_logits.shape() != teacher_logits.shape() {
        return Err(Error::shape(format!(
            "kl between {:?} and {:?}",
            student_logits.shape(),
            teacher_logits.shape()
        )));
    }
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::config(format!("temperature must be > 0, got {temperature}")));
    }
    check_finite(student_logits, "student logits")?;
    check_finite(teacher_logits, "teacher logits")?;
    let n = student_logits.rows();
    let total: f64 = (0..n)
        .map(|i| {
            let floor = PROB_FLOOR.ln();
            let log_p = log_softmax(teacher_logits.row(i), temperature);
            let log_q = log_softmax(student_logits.row(i), temperature);
            log_p
                .iter()
                .zip(&log_q)
                .map(|(&lp, &lq)| {
                    let lp = lp.max(floor);
                    lp.exp() * (lp - lq.max(floor))
                })
                .sum::<f64>()
                .max(0.0)
        })
        .sum();
    Ok(total / n as f64)
}

/// `KL(p || q)` between two probability vectors, with the same clamp.
pub fn kl_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::shape("probability vectors differ in length"));
    }
    for v in [p, q] {
        if (v.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::Domain("probabilities must sum to 1".into()));
        }
    }
    let log_q: Vec<f64> = q.iter().map(|x| x.clamp(PROB_FLOOR, 1.0).ln()).collect();
    Ok(kl_row(p, &log_q))
}

/// Per-sample cross-entropy with the probability floor.
pub fn cross_entropy_per_sample(logits: &Tensor, labels: &[usize]) -> Result<Vec<f64>> {
    if labels.len() != logits.rows() {
        return Err(Error::shape("label count differs from rows"));
    }
    let floor = PROB_FLOOR.ln();
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let lp = log_softmax(logits.row(i), 1.0);
            lp.get(y)
                .map(|l| -l.max(floor))
                .ok_or_else(|| Error::shape(format!("label {y} out of range")))
        })
        .collect()
}

/// Mean over rows of the mean squared distance between two feature tensors.
pub fn representation_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("feature shapes differ"));
    }
    let sq: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sq / a.len() as f64)
}

use crate::error::{Error, Result};
use crate::eval::metrics::accuracy;
use crate::nn::{Model, Tensor};

/// Accuracy of the original and the unlearned model on the same shifted inputs.
pub fn transfer_eval(
    original: &Model,
    unlearned: &Model,
    shifted_x: &Tensor,
    labels: &[usize],
) -> Result<(f64, f64)> {
    let missing = || Error::InsufficientData("empty shifted test set".into());
    let a = accuracy(original, shifted_x, labels)?.ok_or_else(missing)?;
    let b = accuracy(unlearned, shifted_x, labels)?.ok_or_else(missing)?;
    Ok((a, b))
}

use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::nn::loss::cross_entropy_per_sample;
use crate::nn::{Model, Tensor};

/// Chance-level accuracy in percent for `num_classes` balanced classes.
pub fn chance_level(num_classes: usize) -> f64 {
    100.0 / num_classes as f64
}

/// Percentage of rows whose argmax logit equals the label; `None` for an empty set.
pub fn accuracy(model: &Model, x: &Tensor, y: &[usize]) -> Result<Option<f64>> {
    if y.is_empty() {
        return Ok(None);
    }
    let pred = model.predict(x)?;
    let correct = pred.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(Some(100.0 * correct as f64 / y.len() as f64))
}

/// Mean cross-entropy; `None` for an empty set.
pub fn mean_loss(model: &Model, x: &Tensor, y: &[usize]) -> Result<Option<f64>> {
    if y.is_empty() {
        return Ok(None);
    }
    let l = per_sample_loss(model, x, y)?;
    Ok(Some(l.iter().sum::<f64>() / l.len() as f64))
}

pub fn per_sample_loss(model: &Model, x: &Tensor, y: &[usize]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Ok(Vec::new());
    }
    cross_entropy_per_sample(&model.forward(x)?, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracies {
    pub acc_test: f64,
    /// `None` when `D_f` is empty.
    pub acc_f: Option<f64>,
    pub acc_r: f64,
}

/// Accuracy on `D_test`, `D_f` and `D_r`, in percent.
pub fn evaluate(model: &Model, split: &DatasetSplit) -> Result<Accuracies> {
    let acc_test = accuracy(model, split.test_x(), split.test_y())?
        .ok_or_else(|| Error::InsufficientData("empty test set".into()))?;
    let (fx, fy) = split.forget_set();
    let acc_f = if fy.is_empty() { None } else { accuracy(model, &fx, &fy)? };
    let (rx, ry) = split.retain_set();
    let acc_r = accuracy(model, &rx, &ry)?
        .ok_or_else(|| Error::InsufficientData("empty retain set".into()))?;
    Ok(Accuracies { acc_test, acc_f, acc_r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    /// Always predicts class 0: zero weights, bias favours class 0.
    fn constant_model(dim: usize, classes: usize) -> Model {
        let layers = vec![Layer::Linear { in_dim: dim, out_dim: classes, offset: 0 }];
        let mut params = vec![0.0; dim * classes + classes];
        params[dim * classes] = 1.0;
        Model::from_parts(dim, classes, layers, params, 0).unwrap()
    }

    #[test]
    fn constant_class_on_balanced_four_class() {
        let m = constant_model(2, 4);
        let x = Tensor::zeros(vec![8, 2]);
        let y = vec![0, 1, 2, 3, 0, 1, 2, 3];
        assert_eq!(accuracy(&m, &x, &y).unwrap(), Some(25.0));
    }

    #[test]
    fn empty_set_is_undefined() {
        let m = constant_model(2, 2);
        assert_eq!(accuracy(&m, &Tensor::zeros(vec![1, 2]), &[]).unwrap(), None);
    }
}

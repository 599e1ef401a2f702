use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::Model;

/// Boolean selector over a model's flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamMask {
    selected: Vec<bool>,
}

impl ParamMask {
    pub fn new(selected: Vec<bool>) -> Self {
        ParamMask { selected }
    }

    pub fn all(len: usize) -> Self {
        ParamMask { selected: vec![true; len] }
    }

    pub fn none(len: usize) -> Self {
        ParamMask { selected: vec![false; len] }
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut selected = vec![false; len];
        for &i in indices {
            selected[i] = true;
        }
        ParamMask { selected }
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn selected(&self) -> &[bool] {
        &self.selected
    }

    pub fn count_selected(&self) -> usize {
        self.selected.iter().filter(|s| **s).count()
    }

    /// Intersection of two masks of equal length.
    pub fn and(&self, other: &ParamMask) -> Result<ParamMask> {
        if self.len() != other.len() {
            return Err(Error::shape("mask lengths differ"));
        }
        Ok(ParamMask {
            selected: self.selected.iter().zip(&other.selected).map(|(a, b)| *a && *b).collect(),
        })
    }

    /// Zeroes gradient entries at unselected indices.
    pub fn apply(&self, grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.len() {
            return Err(Error::shape(format!(
                "mask of length {} applied to {} gradients",
                self.len(),
                grad.len()
            )));
        }
        for (g, s) in grad.iter_mut().zip(&self.selected) {
            if !s {
                *g = 0.0;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::config(format!("unknown optimizer '{other}' (sgd, adam)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, num_params: usize) -> Self {
        let moments = if kind == OptimizerKind::Adam { num_params } else { 0 };
        OptimizerState {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: vec![0.0; moments],
            second: vec![0.0; moments],
            step: 0,
        }
    }

    pub fn sgd(learning_rate: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate, num_params)
    }

    pub fn adam(learning_rate: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate, num_params)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Descends along `gradient`; entries outside `mask` (and their moments) are untouched.
    pub fn step(&mut self, model: &mut Model, gradient: &[f64], mask: Option<&ParamMask>) -> Result<()> {
        let n = model.param_count();
        if gradient.len() != n {
            return Err(Error::shape(format!("gradient has {} entries, model {n}", gradient.len())));
        }
        if let Some(m) = mask {
            if m.len() != n {
                return Err(Error::shape(format!("mask has {} entries, model {n}", m.len())));
            }
        }
        if let Some(i) = gradient.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric {
                step: self.step as usize,
                msg: format!("non-finite gradient at parameter {i}"),
            });
        }
        self.step += 1;
        let lr = self.learning_rate;
        let params = model.params_mut();
        let selected = |i: usize| mask.is_none_or(|m| m.selected()[i]);
        match self.kind {
            OptimizerKind::Sgd => {
                for (i, (p, g)) in params.iter_mut().zip(gradient).enumerate() {
                    if selected(i) {
                        *p -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for (i, (p, g)) in params.iter_mut().zip(gradient).enumerate() {
                    if !selected(i) {
                        continue;
                    }
                    let m = &mut self.first[i];
                    let v = &mut self.second[i];
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
        Ok(())
    }
}

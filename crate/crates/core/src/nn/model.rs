use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::adapter::LowRankAdapter;
use crate::nn::tape::{Tape, Var};
use crate::nn::tensor::Tensor;
use crate::rng::{stream_rng, Stream};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::config(format!("unknown activation '{other}' (relu, tanh)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

/// Layer descriptor. Linear weights are `[out, in]` row-major followed by the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Linear { in_dim: usize, out_dim: usize, offset: usize },
    Activation { activation: Activation },
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Linear { in_dim, out_dim, .. } => in_dim * out_dim + out_dim,
            Layer::Activation { .. } => 0,
        }
    }
}

/// Tape handles produced by [`Model::forward_on`].
#[derive(Clone, Copy, Debug)]
pub struct ForwardOut {
    pub logits: Var,
    /// Activations feeding the final linear layer.
    pub penultimate: Var,
    pub params: Var,
}

/// Feed-forward classifier over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    input_dim: usize,
    num_classes: usize,
    layers: Vec<Layer>,
    params: Vec<f64>,
    #[serde(default)]
    adapters: Vec<LowRankAdapter>,
    seed: u64,
}

impl Model {
    /// Dense MLP `input -> hidden... -> num_classes` with fan-in uniform initialization.
    pub fn mlp(
        input_dim: usize,
        hidden: &[usize],
        num_classes: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || num_classes == 0 || hidden.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        let mut layers = Vec::new();
        let mut offset = 0;
        let mut prev = input_dim;
        for (i, &width) in hidden.iter().chain(std::iter::once(&num_classes)).enumerate() {
            let layer = Layer::Linear { in_dim: prev, out_dim: width, offset };
            offset += layer.param_count();
            layers.push(layer);
            if i < hidden.len() {
                layers.push(Layer::Activation { activation });
            }
            prev = width;
        }
        let mut model = Model {
            input_dim,
            num_classes,
            layers,
            params: vec![0.0; offset],
            adapters: Vec::new(),
            seed,
        };
        model.reinitialize(seed);
        Ok(model)
    }

    /// Assembles a model from explicit layers and parameters.
    pub fn from_parts(
        input_dim: usize,
        num_classes: usize,
        layers: Vec<Layer>,
        params: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let model = Model { input_dim, num_classes, layers, params, adapters: Vec::new(), seed };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let mut expected_offset = 0;
        let mut width = self.input_dim;
        for layer in &self.layers {
            if let Layer::Linear { in_dim, out_dim, offset } = *layer {
                if in_dim != width || offset != expected_offset {
                    return Err(Error::shape(format!(
                        "linear layer at offset {offset} expects input {in_dim}, got {width}"
                    )));
                }
                expected_offset += layer.param_count();
                width = out_dim;
            }
        }
        if width != self.num_classes {
            return Err(Error::shape(format!(
                "final width {width} != num_classes {}",
                self.num_classes
            )));
        }
        let adapter_params: usize = self.adapters.iter().map(LowRankAdapter::param_count).sum();
        if expected_offset + adapter_params != self.params.len() {
            return Err(Error::shape(format!(
                "parameter vector has {} values, layers need {}",
                self.params.len(),
                expected_offset + adapter_params
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric { step: 0, msg: "non-finite parameter".into() });
        }
        Ok(())
    }

    /// Redraws every base parameter from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn reinitialize(&mut self, seed: u64) {
        let mut rng = stream_rng(seed, Stream::Init);
        for layer in &self.layers {
            if let Layer::Linear { in_dim, offset, .. } = *layer {
                let bound = 1.0 / (in_dim as f64).sqrt();
                for p in &mut self.params[offset..offset + layer.param_count()] {
                    *p = rng.random_range(-bound..=bound);
                }
            }
        }
        self.seed = seed;
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    /// Total length of the flat parameter vector, adapters included.
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameters owned by the layers themselves.
    pub fn base_param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub(crate) fn adapters_mut(&mut self) -> &mut Vec<LowRankAdapter> {
        &mut self.adapters
    }

    pub(crate) fn params_vec_mut(&mut self) -> &mut Vec<f64> {
        &mut self.params
    }

    pub fn adapters(&self) -> &[LowRankAdapter] {
        &self.adapters
    }

    /// `(layer position, in_dim, out_dim, offset)` for each linear layer.
    pub fn linear_layers(&self) -> Vec<(usize, usize, usize, usize)> {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(pos, l)| match *l {
                Layer::Linear { in_dim, out_dim, offset } => Some((pos, in_dim, out_dim, offset)),
                Layer::Activation { .. } => None,
            })
            .collect()
    }

    /// Records the forward pass of `batch` on `tape`.
    pub fn forward_on(&self, tape: &mut Tape, batch: &Tensor) -> Result<ForwardOut> {
        if batch.shape().len() != 2 || batch.cols() != self.input_dim {
            return Err(Error::shape(format!(
                "batch shape {:?} does not match input width {}",
                batch.shape(),
                self.input_dim
            )));
        }
        let params = tape.leaf(Tensor::raw(vec![self.params.len()], self.params.clone()));
        tape.bind_params(params);
        let mut h = tape.leaf(batch.clone());
        let mut penultimate = h;
        let mut linear_idx = 0;
        for layer in &self.layers {
            match *layer {
                Layer::Linear { in_dim, out_dim, offset } => {
                    penultimate = h;
                    let mut w = tape.slice(params, offset, vec![out_dim, in_dim])?;
                    for ad in self.adapters.iter().filter(|a| a.target_layer == linear_idx) {
                        let down = tape.slice(params, ad.down_offset, vec![ad.rank, in_dim])?;
                        let up = tape.slice(params, ad.up_offset, vec![out_dim, ad.rank])?;
                        let delta = tape.matmul(up, down)?;
                        let delta = tape.scale(delta, ad.scale);
                        w = tape.add(w, delta)?;
                    }
                    let b = tape.slice(params, offset + in_dim * out_dim, vec![out_dim])?;
                    let wt = tape.transpose(w)?;
                    let z = tape.matmul(h, wt)?;
                    h = tape.add_row(z, b)?;
                    linear_idx += 1;
                }
                Layer::Activation { activation } => {
                    h = match activation {
                        Activation::Relu => tape.relu(h),
                        Activation::Tanh => tape.tanh(h),
                    };
                }
            }
        }
        Ok(ForwardOut { logits: h, penultimate, params })
    }

    /// Logits for each row of `batch`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward_on(&mut tape, batch)?;
        Ok(tape.value(out.logits).clone())
    }

    /// Logits and penultimate activations.
    pub fn forward_with_features(&self, batch: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let out = self.forward_on(&mut tape, batch)?;
        Ok((tape.value(out.logits).clone(), tape.value(out.penultimate).clone()))
    }

    pub fn probabilities(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward(batch)?.softmax_rows(1.0))
    }

    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        Ok(self.forward(batch)?.argmax_rows())
    }

    /// Gradient of the scalar `loss` with respect to the flat parameter vector.
    pub fn backward(&self, tape: &Tape, loss: Var) -> Result<Vec<f64>> {
        let params = tape
            .bound_params()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        if tape.value(params).len() != self.params.len() {
            return Err(Error::shape("tape was recorded for a different model"));
        }
        if loss.index() >= tape.len() {
            return Err(Error::State("loss is not on this tape".into()));
        }
        let mut grads = tape.backward(loss)?;
        Ok(grads
            .take(params)
            .map(Tensor::into_data)
            .unwrap_or_else(|| vec![0.0; self.params.len()]))
    }

    pub fn to_checkpoint_json(&self) -> Result<String> {
        let ck = Checkpoint { format_version: CHECKPOINT_VERSION, model: self.clone() };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_checkpoint_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint version {}",
                ck.format_version
            )));
        }
        ck.model.validate()?;
        Ok(ck.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|_| Error::Resolution {
            what: "checkpoint",
            path: path.to_path_buf(),
        })?;
        Self::from_checkpoint_json(&s)
    }

    /// SHA-256 over the parameter bits and architecture.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.input_dim as u64).to_le_bytes());
        h.update((self.num_classes as u64).to_le_bytes());
        for l in &self.layers {
            h.update(format!("{l:?}").as_bytes());
        }
        for p in &self.params {
            h.update(p.to_bits().to_le_bytes());
        }
        for a in &self.adapters {
            h.update(format!("{a:?}").as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    model: Model,
}

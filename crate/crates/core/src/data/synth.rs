use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::split::DatasetSplit;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    GaussianBlobs,
    Spiral,
    Ring,
}

impl Generator {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "blobs" | "gaussian_blobs" => Ok(Generator::GaussianBlobs),
            "spiral" => Ok(Generator::Spiral),
            "ring" => Ok(Generator::Ring),
            other => Err(Error::config(format!(
                "unknown generator '{other}' (blobs, spiral, ring)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Generator::GaussianBlobs => "blobs",
            Generator::Spiral => "spiral",
            Generator::Ring => "ring",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub generator: Generator,
    pub num_classes: usize,
    pub samples_per_class: usize,
    /// Standard deviation of the isotropic Gaussian noise.
    pub noise: f64,
    pub dim: usize,
    pub seed: u64,
}

/// Fraction of every class that goes to the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

impl SynthSpec {
    pub fn blobs(num_classes: usize, samples_per_class: usize, noise: f64, dim: usize, seed: u64) -> Self {
        SynthSpec {
            generator: Generator::GaussianBlobs,
            num_classes,
            samples_per_class,
            noise,
            dim,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("need at least 2 classes"));
        }
        if self.samples_per_class < 10 {
            return Err(Error::config("need at least 10 samples per class"));
        }
        if self.dim < 2 {
            return Err(Error::config("need at least 2 dimensions"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise must be finite and >= 0"));
        }
        Ok(())
    }

    /// Noise-free point of class `k` at curve position `t` in `[0, 1)`.
    fn anchor(&self, k: usize, t: f64) -> (f64, f64) {
        let c = self.num_classes as f64;
        let phase = 2.0 * PI * k as f64 / c;
        match self.generator {
            Generator::GaussianBlobs => (phase.cos(), phase.sin()),
            Generator::Spiral => {
                let r = 0.1 + 0.9 * t;
                let a = phase + 1.5 * PI * t;
                (r * a.cos(), r * a.sin())
            }
            Generator::Ring => {
                let r = (k + 1) as f64 / c;
                let a = 2.0 * PI * t;
                (r * a.cos(), r * a.sin())
            }
        }
    }

    /// Noise-free class centers for blobs, `[C, dim]`.
    pub fn blob_centers(&self) -> Vec<Vec<f64>> {
        (0..self.num_classes)
            .map(|k| {
                let (a, b) = self.anchor(k, 0.0);
                let mut c = vec![0.0; self.dim];
                c[0] = a;
                c[1] = b;
                c
            })
            .collect()
    }
}

/// Draws the dataset and splits every class 80/20 into train and test.
pub fn generate(spec: &SynthSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, Stream::Data);
    let mut split_rng = stream_rng(spec.seed, Stream::TrainTestSplit);
    let n_train = (spec.samples_per_class as f64 * TRAIN_FRACTION).round() as usize;

    let mut train: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut test: Vec<(Vec<f64>, usize)> = Vec::new();
    for k in 0..spec.num_classes {
        let mut class_rows: Vec<Vec<f64>> = (0..spec.samples_per_class)
            .map(|_| {
                let t: f64 = rng.random();
                let (a, b) = spec.anchor(k, t);
                let mut x = vec![0.0; spec.dim];
                x[0] = a;
                x[1] = b;
                for v in &mut x {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += spec.noise * z;
                }
                x
            })
            .collect();
        class_rows.shuffle(&mut split_rng);
        let test_rows = class_rows.split_off(n_train);
        train.extend(class_rows.into_iter().map(|x| (x, k)));
        test.extend(test_rows.into_iter().map(|x| (x, k)));
    }
    train.shuffle(&mut split_rng);

    let to_tensor = |rows: &[(Vec<f64>, usize)]| -> Result<(Tensor, Vec<usize>)> {
        let data: Vec<f64> = rows.iter().flat_map(|(x, _)| x.iter().copied()).collect();
        let y = rows.iter().map(|(_, y)| *y).collect();
        Ok((Tensor::new(vec![rows.len(), spec.dim], data)?, y))
    };
    let (train_x, train_y) = to_tensor(&train)?;
    let (test_x, test_y) = to_tensor(&test)?;
    DatasetSplit::new(spec.clone(), train_x, train_y, test_x, test_y)
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, OptimizerKind};

/// Recipe used to train the original model, and reused by exact retraining.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64],
            activation: Activation::Relu,
            epochs: 60,
            learning_rate: 0.01,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        Ok(())
    }

    /// Backbone name such as `mlp-64-64`.
    pub fn backbone(&self) -> String {
        let mut s = "mlp".to_string();
        for h in &self.hidden {
            s.push_str(&format!("-{h}"));
        }
        s
    }

    pub fn parse_backbone(s: &str) -> Result<Vec<usize>> {
        let mut parts = s.split('-');
        if parts.next() != Some("mlp") {
            return Err(Error::config(format!("unknown backbone '{s}' (expected mlp-<w>-<w>...)")));
        }
        parts
            .map(|p| {
                p.parse::<usize>()
                    .ok()
                    .filter(|&w| w > 0)
                    .ok_or_else(|| Error::config(format!("bad hidden width '{p}' in backbone '{s}'")))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactRetrain,
    NegGrad,
    RandLabel,
    BadT,
    Scrub,
    Salun,
    L1SparseFt,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::ExactRetrain,
        Method::NegGrad,
        Method::RandLabel,
        Method::BadT,
        Method::Scrub,
        Method::Salun,
        Method::L1SparseFt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactRetrain => "exact_retrain",
            Method::NegGrad => "neg_grad",
            Method::RandLabel => "rand_label",
            Method::BadT => "bad_t",
            Method::Scrub => "scrub",
            Method::Salun => "salun",
            Method::L1SparseFt => "l1_sparse_ft",
        }
    }

    /// Name used in leaderboard tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::ExactRetrain => "Exact retrain",
            Method::NegGrad => "NegGrad",
            Method::RandLabel => "RandLabel",
            Method::BadT => "Bad-T",
            Method::Scrub => "SCRUB",
            Method::Salun => "SalUn",
            Method::L1SparseFt => "l1-sparse FT",
        }
    }

    pub fn available() -> String {
        Method::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::config(format!("unknown unlearn_method '{s}'; available: {}", Method::available()))
            })
    }
}

pub const BAD_TEACHER_SEED_OFFSET: u64 = 1_000_003;

/// Everything one unlearning run needs besides the model and the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnlearnConfig {
    pub unlearn_method: Method,
    pub del_ratio: u32,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Initialisation seed of the bad teacher; `None` derives it from `seed`.
    pub bad_teacher_seed: Option<u64>,
    /// Softmax temperature of the distillation terms.
    pub temperature: f64,
    /// Optimizer steps on `D_f` per epoch in the max phase.
    pub scrub_max_steps: usize,
    /// Optimizer steps on `D_r` per epoch in the min phase.
    pub scrub_min_steps: usize,
    /// Weight of the penultimate-feature distance in the min phase.
    pub scrub_rep_weight: f64,
    /// Fraction of parameters kept by the saliency mask.
    pub salun_sparsity: f64,
    pub l1_lambda: f64,
    pub curriculum: bool,
    pub curriculum_lambda: f64,
    pub curriculum_decay: f64,
    pub adapter_rank: Option<usize>,
    pub adapter_scale: f64,
    /// Refuse runs whose FLOs or wall time exceed those of the original training.
    pub enforce_budget: bool,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        UnlearnConfig {
            unlearn_method: Method::RandLabel,
            del_ratio: 5,
            seed: 0,
            epochs: 7,
            learning_rate: 0.002,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            bad_teacher_seed: None,
            temperature: 1.0,
            scrub_max_steps: 2,
            scrub_min_steps: 8,
            scrub_rep_weight: 0.0,
            salun_sparsity: 0.5,
            l1_lambda: 1e-4,
            curriculum: false,
            curriculum_lambda: 1.0,
            curriculum_decay: 0.9,
            adapter_rank: None,
            adapter_scale: 1.0,
            enforce_budget: true,
        }
    }
}

impl UnlearnConfig {
    /// Defaults for `method`. Gradient ascent and distillation from a bad
    /// teacher need a larger step budget than relabelling to reach their
    /// forgetting regime; every other knob is shared.
    pub fn for_method(method: Method) -> Self {
        let base = UnlearnConfig { unlearn_method: method, ..Self::default() };
        match method {
            Method::NegGrad => UnlearnConfig { epochs: 20, learning_rate: 0.01, ..base },
            Method::BadT => UnlearnConfig { epochs: 10, learning_rate: 0.01, ..base },
            _ => base,
        }
    }

    pub fn bad_teacher_seed(&self) -> u64 {
        self.bad_teacher_seed.unwrap_or(self.seed.wrapping_add(BAD_TEACHER_SEED_OFFSET))
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature must be > 0"));
        }
        if !(self.salun_sparsity > 0.0 && self.salun_sparsity <= 1.0) {
            return Err(Error::config(format!(
                "salun_sparsity must be in (0, 1], got {}",
                self.salun_sparsity
            )));
        }
        if !(self.l1_lambda >= 0.0 && self.l1_lambda.is_finite()) {
            return Err(Error::config("l1_lambda must be >= 0"));
        }
        if self.scrub_rep_weight < 0.0 {
            return Err(Error::config("scrub_rep_weight must be >= 0"));
        }
        if self.adapter_rank == Some(0) {
            return Err(Error::config("adapter_rank must be positive"));
        }
        if self.curriculum {
            crate::curriculum::Curriculum::new(self.curriculum_lambda, self.curriculum_decay)?;
        }
        Ok(())
    }
}

//! Training loop machinery shared by original training and every method.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::curriculum::Curriculum;
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::nn::{count_flos, ForwardOut, Model, OptimizerState, ParamMask, Tape, Tensor, Var};
use crate::rng::{stream_rng, Stream};
use crate::unlearn::config::TrainConfig;

/// Ordered record of every training-set index handed to a training step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccessLog {
    reads: Vec<usize>,
}

impl AccessLog {
    pub fn record(&mut self, indices: &[usize]) {
        self.reads.extend_from_slice(indices);
    }

    pub fn reads(&self) -> &[usize] {
        &self.reads
    }

    /// Whether any index of `set` (sorted) was read.
    pub fn touched_any(&self, set: &[usize]) -> bool {
        self.reads.iter().any(|i| set.binary_search(i).is_ok())
    }
}

/// Shuffles `indices` and cuts them into batches of at most `batch` items.
pub fn shuffled_batches(indices: &[usize], batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order = indices.to_vec();
    order.shuffle(rng);
    order.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

/// Endless stream of batches over an index set, reshuffled after each pass.
pub struct Cycler {
    indices: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    batch: usize,
}

impl Cycler {
    pub fn new(indices: Vec<usize>, batch: usize) -> Self {
        let batch = batch.min(indices.len()).max(1);
        Cycler { indices, order: Vec::new(), pos: 0, batch }
    }

    pub fn next_batch(&mut self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        if self.pos + self.batch > self.order.len() {
            self.order = self.indices.clone();
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let b = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        b
    }
}

/// Optional caps on compute spent by a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub flos: Option<f64>,
    pub seconds: Option<f64>,
}

/// Per-sample training objective built on a tape.
pub struct Objective {
    /// Length-`n` vector of per-sample losses.
    pub per_sample: Var,
    /// `+1` to descend, `-1` to ascend.
    pub sign: f64,
    /// Fixed per-sample weights; uniform when `None`.
    pub weights: Option<Vec<f64>>,
    /// Scalar added after weighting (regularisers), never curriculum-weighted.
    pub extra: Option<Var>,
}

impl Objective {
    pub fn descend(per_sample: Var) -> Self {
        Objective { per_sample, sign: 1.0, weights: None, extra: None }
    }

    pub fn ascend(per_sample: Var) -> Self {
        Objective { per_sample, sign: -1.0, weights: None, extra: None }
    }
}

/// Owns the model being trained plus its optimizer, mask, curriculum and counters.
pub struct Stepper {
    pub model: Model,
    opt: OptimizerState,
    mask: Option<ParamMask>,
    curriculum: Option<Curriculum>,
    budget: Budget,
    pub flos: f64,
    pub seconds: f64,
    pub steps: usize,
}

impl Stepper {
    pub fn new(model: Model, opt: OptimizerState) -> Self {
        Stepper {
            model,
            opt,
            mask: None,
            curriculum: None,
            budget: Budget::default(),
            flos: 0.0,
            seconds: 0.0,
            steps: 0,
        }
    }

    pub fn with_mask(mut self, mask: Option<ParamMask>) -> Self {
        self.mask = mask;
        self
    }

    pub fn with_curriculum(mut self, curriculum: Option<Curriculum>) -> Self {
        self.curriculum = curriculum;
        self
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn set_mask(&mut self, mask: Option<ParamMask>) {
        self.mask = mask;
    }

    pub fn mask(&self) -> Option<&ParamMask> {
        self.mask.as_ref()
    }

    /// Charges extra compute (e.g. a saliency pass) against the budget.
    pub fn charge_flos(&mut self, flos: f64) -> Result<()> {
        self.check_flos(flos)?;
        self.flos += flos;
        Ok(())
    }

    fn check_flos(&self, extra: f64) -> Result<()> {
        if let Some(limit) = self.budget.flos {
            if self.flos + extra > limit {
                return Err(Error::Budget {
                    what: "flos",
                    spent: self.flos + extra,
                    limit,
                    trace: Box::default(),
                });
            }
        }
        Ok(())
    }

    pub fn check_time(&self) -> Result<()> {
        if let Some(limit) = self.budget.seconds {
            if self.seconds > limit {
                return Err(Error::Budget {
                    what: "seconds",
                    spent: self.seconds,
                    limit,
                    trace: Box::default(),
                });
            }
        }
        Ok(())
    }

    /// One optimizer step on `x`. Returns the objective value before the update.
    pub fn step(
        &mut self,
        x: &Tensor,
        build: impl FnOnce(&mut Tape, &ForwardOut) -> Result<Objective>,
    ) -> Result<f64> {
        let cost = count_flos(&self.model, x.rows(), 1);
        self.check_flos(cost)?;
        let start = Instant::now();

        let mut tape = Tape::new();
        let out = self.model.forward_on(&mut tape, x)?;
        let obj = build(&mut tape, &out)?;
        let per_sample = tape.value(obj.per_sample).data().to_vec();
        let mut weights = obj.weights.unwrap_or_else(|| vec![1.0; per_sample.len()]);
        let mut offset = 0.0;
        if let Some(cur) = self.curriculum.as_mut() {
            let w = cur.apply(&per_sample)?;
            for (wi, s) in weights.iter_mut().zip(&w.sigma) {
                *wi *= s;
            }
            offset = w.offset;
        }
        let mut loss = tape.weighted_mean(obj.per_sample, &weights)?;
        if offset != 0.0 {
            let c = tape.leaf(Tensor::scalar(offset));
            loss = tape.add(loss, c)?;
        }
        if obj.sign != 1.0 {
            loss = tape.scale(loss, obj.sign);
        }
        if let Some(extra) = obj.extra {
            loss = tape.add(loss, extra)?;
        }
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::Numeric { step: self.steps, msg: format!("non-finite loss {value}") });
        }
        let grad = self.model.backward(&tape, loss)?;
        self.opt
            .step(&mut self.model, &grad, self.mask.as_ref())
            .map_err(|e| match e {
                Error::Numeric { msg, .. } => Error::Numeric { step: self.steps, msg },
                other => other,
            })?;

        self.seconds += start.elapsed().as_secs_f64();
        self.flos += cost;
        self.steps += 1;
        Ok(value)
    }
}

/// Cross-entropy objective against `labels`.
pub fn ce_objective(labels: Vec<usize>) -> impl FnOnce(&mut Tape, &ForwardOut) -> Result<Objective> {
    move |tape, out| Ok(Objective::descend(tape.cross_entropy(out.logits, &labels)?))
}

/// Original model together with what it cost to train.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub recipe: TrainConfig,
    pub seconds: f64,
    pub flos: f64,
}

impl TrainedModel {
    pub fn budget(&self) -> Budget {
        Budget { flos: Some(self.flos), seconds: Some(self.seconds) }
    }
}

/// Fresh model for `split` under `recipe`.
pub fn fresh_model(split: &DatasetSplit, recipe: &TrainConfig, seed: u64) -> Result<Model> {
    Model::mlp(split.dim(), &recipe.hidden, split.num_classes(), recipe.activation, seed)
}

/// Trains `recipe` from scratch on the training rows `indices`.
///
/// `on_epoch` runs after every epoch with the epoch number (1-based).
pub fn fit(
    split: &DatasetSplit,
    indices: &[usize],
    recipe: &TrainConfig,
    log: &mut AccessLog,
    mut on_epoch: impl FnMut(usize, &Stepper) -> Result<()>,
) -> Result<Stepper> {
    recipe.validate()?;
    if indices.is_empty() {
        return Err(Error::config("cannot train on an empty set"));
    }
    let model = fresh_model(split, recipe, recipe.seed)?;
    let opt = OptimizerState::new(recipe.optimizer, recipe.learning_rate, model.param_count());
    let mut stepper = Stepper::new(model, opt);
    let mut rng = stream_rng(recipe.seed, Stream::Shuffle);
    for epoch in 1..=recipe.epochs {
        for batch in shuffled_batches(indices, recipe.batch_size, &mut rng) {
            log.record(&batch);
            let (x, y) = split.train_subset(&batch);
            stepper.step(&x, ce_objective(y))?;
        }
        on_epoch(epoch, &stepper)?;
    }
    Ok(stepper)
}

/// Trains the original model `f` on all of `D_train`.
pub fn train_original(split: &DatasetSplit, recipe: &TrainConfig) -> Result<TrainedModel> {
    let mut log = AccessLog::default();
    let stepper = fit(split, &split.all_train_indices(), recipe, &mut log, |_, _| Ok(()))?;
    Ok(TrainedModel {
        model: stepper.model,
        recipe: recipe.clone(),
        seconds: stepper.seconds,
        flos: stepper.flos,
    })
}

use std::time::Instant;

use crate::curriculum::Curriculum;
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::nn::{Model, OptimizerState};
use crate::rng::{stream_rng, Stream};
use crate::unlearn::config::{Method, UnlearnConfig};
use crate::unlearn::methods::{self, trace_row, RunState};
use crate::unlearn::trace::{Phase, Trace};
use crate::unlearn::train::{fit, fresh_model, AccessLog, Budget, Stepper, TrainedModel};

/// Outcome of one unlearning call. `model` is `f'`; the original is untouched.
#[derive(Clone, Debug)]
pub struct UnlearnRun {
    pub model: Model,
    pub config: UnlearnConfig,
    /// Wall-clock seconds spent unlearning, trace evaluation excluded.
    pub seconds: f64,
    pub flos: f64,
    pub trace: Trace,
    pub access: AccessLog,
    /// Parameters the optimizer was allowed to change.
    pub trainable_params: usize,
}

/// Removes the influence of `split.del_indices()` from `original.model`.
pub fn unlearn(original: &TrainedModel, split: &DatasetSplit, config: &UnlearnConfig) -> Result<UnlearnRun> {
    config.validate()?;
    let budget = if config.enforce_budget && config.unlearn_method != Method::ExactRetrain {
        original.budget()
    } else {
        Budget::default()
    };
    if config.unlearn_method == Method::ExactRetrain {
        return exact_retrain(original, split, config);
    }

    let mut model = original.model.clone();
    let mut mask = None;
    if let Some(rank) = config.adapter_rank {
        model.attach_adapters_everywhere(rank, config.adapter_scale)?;
        mask = Some(model.trainable_mask());
    }
    let curriculum = if config.curriculum {
        Some(Curriculum::new(config.curriculum_lambda, config.curriculum_decay)?)
    } else {
        None
    };
    let opt = OptimizerState::new(config.optimizer, config.learning_rate, model.param_count());
    let stepper = Stepper::new(model, opt)
        .with_mask(mask)
        .with_curriculum(curriculum)
        .with_budget(budget);
    let rng = stream_rng(config.seed, Stream::Shuffle);
    let mut st = RunState::new(split, &original.model, config, stepper, rng);
    st.record(0, Phase::Start)?;

    let outcome = match config.unlearn_method {
        Method::NegGrad => methods::neg_grad(&mut st),
        Method::RandLabel => methods::rand_label(&mut st),
        Method::Salun => methods::salun(&mut st),
        Method::BadT => {
            let bad = Model::mlp(
                split.dim(),
                &original.recipe.hidden,
                split.num_classes(),
                original.recipe.activation,
                config.bad_teacher_seed(),
            )?;
            methods::bad_t(&mut st, &bad)
        }
        Method::Scrub => methods::scrub(&mut st),
        Method::L1SparseFt => methods::l1_sparse_ft(&mut st),
        Method::ExactRetrain => unreachable!("handled above"),
    };
    if let Err(e) = outcome {
        return Err(attach_trace(e, &st.trace));
    }

    let seconds = st.elapsed();
    let trainable_params = st.stepper.mask().map_or(st.stepper.model.param_count(), |m| m.count_selected());
    let mut model = st.stepper.model;
    if !model.adapters().is_empty() {
        model.merge_adapters();
    }
    Ok(UnlearnRun {
        model,
        config: config.clone(),
        seconds,
        flos: st.stepper.flos,
        trace: st.trace,
        access: st.log,
        trainable_params,
    })
}

fn attach_trace(e: Error, trace: &Trace) -> Error {
    match e {
        Error::Budget { what, spent, limit, .. } => Error::Budget {
            what,
            spent,
            limit,
            trace: Box::new(trace.clone()),
        },
        other => other,
    }
}

/// Retrains from a fresh initialisation on `D_r` only, with the original recipe.
pub fn exact_retrain(original: &TrainedModel, split: &DatasetSplit, config: &UnlearnConfig) -> Result<UnlearnRun> {
    let retain = split.retain_indices();
    if retain.is_empty() {
        return Err(Error::config("exact retraining needs a non-empty retain set"));
    }
    let recipe = &original.recipe;
    let started = Instant::now();
    let mut eval_seconds = 0.0;
    let mut trace = Trace::default();
    let t0 = Instant::now();
    trace.push(trace_row(&fresh_model(split, recipe, recipe.seed)?, split, 0, Phase::Start, 0.0, 0.0)?);
    eval_seconds += t0.elapsed().as_secs_f64();

    let mut log = AccessLog::default();
    let stepper = fit(split, &retain, recipe, &mut log, |epoch, s: &Stepper| {
        let t0 = Instant::now();
        let elapsed = started.elapsed().as_secs_f64() - eval_seconds;
        trace.push(trace_row(&s.model, split, epoch, Phase::Train, s.flos, elapsed)?);
        eval_seconds += t0.elapsed().as_secs_f64();
        Ok(())
    })?;
    let seconds = (started.elapsed().as_secs_f64() - eval_seconds).max(0.0);
    let trainable_params = stepper.model.param_count();
    Ok(UnlearnRun {
        model: stepper.model,
        config: config.clone(),
        seconds,
        flos: stepper.flos,
        trace,
        access: log,
        trainable_params,
    })
}

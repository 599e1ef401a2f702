//! The unlearning methods. Each one drives a [`RunState`] through its epoch
//! budget and records one trace row per epoch (two for SCRUB: one per phase).

use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::data::{corrupt_labels, DatasetSplit};
use crate::error::{Error, Result};
use crate::eval::metrics::{evaluate, mean_loss};
use crate::nn::tape::teacher_probs;
use crate::nn::{count_flos, kl_loss, Model, ParamMask, Tape, Tensor};
use crate::unlearn::config::UnlearnConfig;
use crate::unlearn::trace::{Phase, Trace, TraceRow};
use crate::unlearn::train::{shuffled_batches, AccessLog, Cycler, Objective, Stepper};

pub(crate) struct RunState<'a> {
    pub split: &'a DatasetSplit,
    pub original: &'a Model,
    pub config: &'a UnlearnConfig,
    pub stepper: Stepper,
    pub trace: Trace,
    pub log: AccessLog,
    pub rng: ChaCha8Rng,
    started: Instant,
    eval_seconds: f64,
}

impl<'a> RunState<'a> {
    pub fn new(
        split: &'a DatasetSplit,
        original: &'a Model,
        config: &'a UnlearnConfig,
        stepper: Stepper,
        rng: ChaCha8Rng,
    ) -> Self {
        RunState {
            split,
            original,
            config,
            stepper,
            trace: Trace::default(),
            log: AccessLog::default(),
            rng,
            started: Instant::now(),
            eval_seconds: 0.0,
        }
    }

    /// Wall time since the run started, excluding trace evaluation.
    pub fn elapsed(&self) -> f64 {
        (self.started.elapsed().as_secs_f64() - self.eval_seconds).max(0.0)
    }

    /// Evaluates the current model into a trace row, then enforces the time budget.
    pub fn record(&mut self, epoch: usize, phase: Phase) -> Result<()> {
        let t0 = Instant::now();
        let row = trace_row(
            &self.stepper.model,
            self.split,
            epoch,
            phase,
            self.stepper.flos,
            self.elapsed(),
        )?;
        self.trace.push(row);
        self.eval_seconds += t0.elapsed().as_secs_f64();
        self.stepper.seconds = self.elapsed();
        self.stepper.check_time()
    }

    fn forget_indices(&self) -> Result<Vec<usize>> {
        let f = self.split.del_indices().to_vec();
        if f.is_empty() {
            return Err(Error::config(format!(
                "{} needs a non-empty deletion set",
                self.config.unlearn_method
            )));
        }
        Ok(f)
    }

    fn retain_indices(&self) -> Result<Vec<usize>> {
        let r = self.split.retain_indices();
        if r.is_empty() {
            return Err(Error::config("retain set is empty"));
        }
        Ok(r)
    }
}

pub(crate) fn trace_row(
    model: &Model,
    split: &DatasetSplit,
    epoch: usize,
    phase: Phase,
    flos: f64,
    seconds: f64,
) -> Result<TraceRow> {
    let acc = evaluate(model, split)?;
    let (fx, fy) = split.forget_set();
    let (rx, ry) = split.retain_set();
    Ok(TraceRow {
        epoch,
        phase,
        loss_f: mean_loss(model, &fx, &fy)?,
        loss_r: mean_loss(model, &rx, &ry)?.unwrap_or(f64::NAN),
        acc_test: acc.acc_test,
        acc_f: acc.acc_f,
        acc_r: acc.acc_r,
        flos,
        seconds,
    })
}

/// Gradient ascent on the task loss over `D_f`.
pub(crate) fn neg_grad(st: &mut RunState) -> Result<()> {
    let forget = st.forget_indices()?;
    for epoch in 1..=st.config.epochs {
        for batch in shuffled_batches(&forget, st.config.batch_size, &mut st.rng) {
            st.log.record(&batch);
            let (x, y) = st.split.train_subset(&batch);
            st.stepper
                .step(&x, |tape, out| Ok(Objective::ascend(tape.cross_entropy(out.logits, &y)?)))?;
        }
        st.record(epoch, Phase::Train)?;
    }
    Ok(())
}

/// Training labels with every `D_f` label replaced by a different class.
pub fn relabelled_train_labels(split: &DatasetSplit, seed: u64) -> Result<Vec<usize>> {
    let corrupted = corrupt_labels(split, split.del_indices(), seed)?;
    let mut labels = split.train_y().to_vec();
    for (&i, &y) in split.del_indices().iter().zip(&corrupted) {
        labels[i] = y;
    }
    Ok(labels)
}

/// Fine-tunes on `D_r` (true labels) and `D_f` (corrupted labels), shuffled together.
pub(crate) fn rand_label(st: &mut RunState) -> Result<()> {
    st.forget_indices()?;
    let labels = relabelled_train_labels(st.split, st.config.seed)?;
    let all = st.split.all_train_indices();
    for epoch in 1..=st.config.epochs {
        for batch in shuffled_batches(&all, st.config.batch_size, &mut st.rng) {
            st.log.record(&batch);
            let x = st.split.train_x().select_rows(&batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            st.stepper
                .step(&x, |tape, out| Ok(Objective::descend(tape.cross_entropy(out.logits, &y)?)))?;
        }
        st.record(epoch, Phase::Train)?;
    }
    Ok(())
}

/// Indices of the `ceil(fraction * candidates)` largest saliencies among
/// `candidates`; ties go to the lower index.
pub fn top_fraction(saliency: &[f64], candidates: &ParamMask, fraction: f64) -> Result<ParamMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("sparsity must be in (0, 1], got {fraction}")));
    }
    if saliency.len() != candidates.len() {
        return Err(Error::shape("saliency and mask lengths differ"));
    }
    let mut order: Vec<usize> = (0..saliency.len()).filter(|&i| candidates.selected()[i]).collect();
    let k = ((fraction * order.len() as f64).ceil() as usize).clamp(1, order.len().max(1));
    order.sort_by(|&a, &b| saliency[b].total_cmp(&saliency[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(ParamMask::from_indices(saliency.len(), &order))
}

/// `|d L_task(D_f) / d theta|` at the current parameters.
pub fn saliency(model: &Model, x: &Tensor, y: &[usize]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let out = model.forward_on(&mut tape, x)?;
    let per = tape.cross_entropy(out.logits, y)?;
    let loss = tape.mean(per);
    Ok(model.backward(&tape, loss)?.into_iter().map(f64::abs).collect())
}

/// Saliency-masked [`rand_label`].
pub(crate) fn salun(st: &mut RunState) -> Result<()> {
    let forget = st.forget_indices()?;
    st.log.record(&forget);
    let (fx, fy) = st.split.train_subset(&forget);
    st.stepper.charge_flos(count_flos(&st.stepper.model, forget.len(), 1))?;
    let sal = saliency(&st.stepper.model, &fx, &fy)?;
    let candidates = st
        .stepper
        .mask()
        .cloned()
        .unwrap_or_else(|| ParamMask::all(sal.len()));
    let mask = top_fraction(&sal, &candidates, st.config.salun_sparsity)?;
    st.stepper.set_mask(Some(mask));
    rand_label(st)
}

/// `KL(g || f')` on the forget batch plus `KL(f || f')` on the retain batch.
pub fn bad_teacher_loss(
    student_forget: &Tensor,
    bad_teacher_forget: &Tensor,
    student_retain: &Tensor,
    good_teacher_retain: &Tensor,
    temperature: f64,
) -> Result<f64> {
    Ok(kl_loss(student_forget, bad_teacher_forget, temperature)?
        + kl_loss(student_retain, good_teacher_retain, temperature)?)
}

/// Distils the bad teacher on `D_f` and the original on `D_r`, one batch of each per step.
pub(crate) fn bad_t(st: &mut RunState, bad_teacher: &Model) -> Result<()> {
    let forget = st.forget_indices()?;
    let retain = st.retain_indices()?;
    let t = st.config.temperature;
    let mut forget_batches = Cycler::new(forget, st.config.batch_size);
    for epoch in 1..=st.config.epochs {
        for rbatch in shuffled_batches(&retain, st.config.batch_size, &mut st.rng) {
            let fbatch = forget_batches.next_batch(&mut st.rng);
            st.log.record(&fbatch);
            st.log.record(&rbatch);
            let xf = st.split.train_x().select_rows(&fbatch);
            let xr = st.split.train_x().select_rows(&rbatch);
            let pf = teacher_probs(&bad_teacher.forward(&xf)?, t);
            let pr = teacher_probs(&st.original.forward(&xr)?, t);
            let x = stack(&xf, &xr)?;
            let teacher = stack(&pf, &pr)?;
            let n = x.rows() as f64;
            let (nf, nr) = (xf.rows(), xr.rows());
            let weights: Vec<f64> = std::iter::repeat_n(n / nf as f64, nf)
                .chain(std::iter::repeat_n(n / nr as f64, nr))
                .collect();
            st.stepper.step(&x, |tape, out| {
                let per = tape.kl_div(out.logits, &teacher, t)?;
                Ok(Objective { per_sample: per, sign: 1.0, weights: Some(weights), extra: None })
            })?;
        }
        st.record(epoch, Phase::Train)?;
    }
    Ok(())
}

fn stack(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut data = a.data().to_vec();
    data.extend_from_slice(b.data());
    Tensor::new(vec![a.rows() + b.rows(), a.cols()], data)
}

/// Alternates a max phase on `D_f` with a min phase on `D_r` every epoch.
pub(crate) fn scrub(st: &mut RunState) -> Result<()> {
    let forget = st.forget_indices()?;
    let retain = st.retain_indices()?;
    let t = st.config.temperature;
    let rep_weight = st.config.scrub_rep_weight;
    let mut forget_batches = Cycler::new(forget, st.config.batch_size);
    let mut retain_batches = Cycler::new(retain, st.config.batch_size);
    for epoch in 1..=st.config.epochs {
        if st.config.scrub_max_steps > 0 {
            for _ in 0..st.config.scrub_max_steps {
                let batch = forget_batches.next_batch(&mut st.rng);
                st.log.record(&batch);
                let (x, y) = st.split.train_subset(&batch);
                let teacher = teacher_probs(&st.original.forward(&x)?, t);
                st.stepper.step(&x, |tape, out| {
                    let ce = tape.cross_entropy(out.logits, &y)?;
                    let kl = tape.kl_div(out.logits, &teacher, t)?;
                    Ok(Objective::ascend(tape.add(ce, kl)?))
                })?;
            }
            st.record(epoch, Phase::Max)?;
        }
        for _ in 0..st.config.scrub_min_steps {
            let batch = retain_batches.next_batch(&mut st.rng);
            st.log.record(&batch);
            let (x, y) = st.split.train_subset(&batch);
            let (f_logits, f_feats) = st.original.forward_with_features(&x)?;
            let teacher = teacher_probs(&f_logits, t);
            st.stepper.step(&x, |tape, out| {
                let ce = tape.cross_entropy(out.logits, &y)?;
                let kl = tape.kl_div(out.logits, &teacher, t)?;
                let mut per = tape.add(ce, kl)?;
                if rep_weight > 0.0 {
                    let rep = tape.sq_dist(out.penultimate, &f_feats)?;
                    let rep = tape.scale(rep, rep_weight);
                    per = tape.add(per, rep)?;
                }
                Ok(Objective::descend(per))
            })?;
        }
        st.record(epoch, Phase::Min)?;
    }
    Ok(())
}

/// Fine-tunes on `D_r` with an added `l1_lambda * ||theta||_1` penalty.
pub(crate) fn l1_sparse_ft(st: &mut RunState) -> Result<()> {
    let retain = st.retain_indices()?;
    let lambda = st.config.l1_lambda;
    for epoch in 1..=st.config.epochs {
        for batch in shuffled_batches(&retain, st.config.batch_size, &mut st.rng) {
            st.log.record(&batch);
            let (x, y) = st.split.train_subset(&batch);
            st.stepper.step(&x, |tape, out| {
                let per = tape.cross_entropy(out.logits, &y)?;
                let extra = if lambda > 0.0 {
                    let l1 = tape.abs_sum(out.params);
                    Some(tape.scale(l1, lambda))
                } else {
                    None
                };
                Ok(Objective { per_sample: per, sign: 1.0, weights: None, extra })
            })?;
        }
        st.record(epoch, Phase::Train)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_half_of_four() {
        let m = top_fraction(&[0.5, 0.1, 0.9, 0.2], &ParamMask::all(4), 0.5).unwrap();
        assert_eq!(m.selected(), &[true, false, true, false]);
        let all = top_fraction(&[0.5, 0.1, 0.9, 0.2], &ParamMask::all(4), 1.0).unwrap();
        assert_eq!(all, ParamMask::all(4));
        assert!(top_fraction(&[1.0], &ParamMask::all(1), 0.0).is_err());
    }

    #[test]
    fn top_fraction_respects_candidates() {
        let cand = ParamMask::from_indices(4, &[0, 1]);
        let m = top_fraction(&[0.5, 0.1, 0.9, 0.2], &cand, 0.5).unwrap();
        assert_eq!(m.selected(), &[true, false, false, false]);
    }

    #[test]
    fn matched_teachers_give_zero_loss() {
        let g = Tensor::new(vec![2, 3], vec![0.1, 0.2, -0.3, 1.0, 0.0, 0.5]).unwrap();
        let f = Tensor::new(vec![1, 3], vec![4.0, -1.0, 0.0]).unwrap();
        assert_eq!(bad_teacher_loss(&g, &g, &f, &f, 1.0).unwrap(), 0.0);
        let other = Tensor::new(vec![1, 3], vec![0.0, 0.0, 0.0]).unwrap();
        assert!(bad_teacher_loss(&g, &g, &other, &f, 1.0).unwrap() > 0.0);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unlearnkit::nn::{Activation, Model, Tape, Tensor};

use super::{finite_diff, rel_err};

/// Loss heads exercised by the gradient check.
#[derive(Clone, Copy, Debug)]
pub enum Head {
    CrossEntropy,
    Kl { temperature: f64 },
    FeatureDistance,
    WeightedAscent,
    CrossEntropyL1 { lambda: f64 },
}

#[derive(Clone, Debug)]
pub struct GradCase {
    pub model: Model,
    pub x: Tensor,
    pub labels: Vec<usize>,
    pub teacher: Tensor,
    pub feature_target: Tensor,
    pub weights: Vec<f64>,
    pub head: Head,
}

impl GradCase {
    /// Random small model, batch and loss head drawn from `seed`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.random_range(1..=4);
        let classes = rng.random_range(2..=4);
        let depth = rng.random_range(0..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=5)).collect();
        let activation = if rng.random_bool(0.5) { Activation::Tanh } else { Activation::Relu };
        let mut model = Model::mlp(dim, &hidden, classes, activation, seed).unwrap();
        if rng.random_bool(0.25) {
            model.attach_adapters_everywhere(1, 0.5).unwrap();
            let p: Vec<f64> = model.params().iter().map(|_| rng.random_range(-0.8..0.8)).collect();
            model.set_params(p).unwrap();
        }
        let n = rng.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let teacher_logits: Vec<Vec<f64>> =
            (0..n).map(|_| (0..classes).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let teacher = Tensor::from_rows(&teacher_logits).unwrap().softmax_rows(1.0);
        let (_, feats) = model.forward_with_features(&x).unwrap();
        let feature_target = Tensor::new(
            feats.shape().to_vec(),
            (0..feats.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let weights = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let head = match rng.random_range(0..5) {
            0 => Head::CrossEntropy,
            1 => Head::Kl { temperature: [0.5, 1.0, 2.0][rng.random_range(0..3)] },
            2 => Head::FeatureDistance,
            3 => Head::WeightedAscent,
            _ => Head::CrossEntropyL1 { lambda: 0.01 },
        };
        GradCase { model, x, labels, teacher, feature_target, weights, head }
    }

    fn loss_on(&self, model: &Model) -> (f64, Vec<f64>) {
        let mut tape = Tape::new();
        let out = model.forward_on(&mut tape, &self.x).unwrap();
        let loss = match self.head {
            Head::CrossEntropy => {
                let ce = tape.cross_entropy(out.logits, &self.labels).unwrap();
                tape.mean(ce)
            }
            Head::Kl { temperature } => {
                let kl = tape.kl_div(out.logits, &self.teacher, temperature).unwrap();
                tape.mean(kl)
            }
            Head::FeatureDistance => {
                let d = tape.sq_dist(out.penultimate, &self.feature_target).unwrap();
                tape.sum(d)
            }
            Head::WeightedAscent => {
                let ce = tape.cross_entropy(out.logits, &self.labels).unwrap();
                let m = tape.weighted_mean(ce, &self.weights).unwrap();
                tape.scale(m, -1.0)
            }
            Head::CrossEntropyL1 { lambda } => {
                let ce = tape.cross_entropy(out.logits, &self.labels).unwrap();
                let m = tape.mean(ce);
                let l1 = tape.abs_sum(out.params);
                let l1 = tape.scale(l1, lambda);
                tape.add(m, l1).unwrap()
            }
        };
        let value = tape.scalar(loss);
        (value, model.backward(&tape, loss).unwrap())
    }

    /// Largest relative error between autodiff and central differences over
    /// every parameter coordinate.
    pub fn max_rel_err(&self, h: f64) -> f64 {
        let (_, grad) = self.loss_on(&self.model);
        let fd = finite_diff(
            |p| {
                let mut m = self.model.clone();
                m.set_params(p.to_vec()).unwrap();
                self.loss_on(&m).0
            },
            self.model.params(),
            h,
        );
        grad.iter().zip(&fd).map(|(&a, &b)| rel_err(a, b)).fold(0.0, f64::max)
    }
}

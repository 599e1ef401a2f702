//! Reverse-mode automatic differentiation over dense tensors.
//!
//! Every operation appends a node to a linear [`Tape`]; [`Tape::backward`]
//! replays the nodes in reverse and accumulates vector-Jacobian products.
//! Constants (labels, teacher distributions, curriculum weights) are stored
//! inside the op that consumes them and never receive gradients.

use crate::error::{Error, Result};
use crate::nn::tensor::{log_softmax, softmax, Tensor};

/// Smallest probability admitted inside a logarithm. The floor bounds loss
/// values only; gradients use the unclamped softmax so saturated rows still learn.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Slice { src: Var, offset: usize },
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sum(Var),
    Mean(Var),
    AbsSum(Var),
    CrossEntropy { logits: Var, labels: Vec<usize> },
    KlDiv { logits: Var, teacher: Tensor, temperature: f64 },
    SqDist { src: Var, target: Tensor },
    WeightedMean { src: Var, weights: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`Tape::backward`], one slot per node.
#[derive(Debug)]
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` did not influence the loss.
    pub fn get(&self, v: Var, like: &Tensor) -> Tensor {
        self.slots
            .get(v.0)
            .and_then(Clone::clone)
            .unwrap_or_else(|| Tensor::zeros(like.shape().to_vec()))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.slots.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound_params: Option<Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Records the leaf holding a model's flat parameter vector.
    pub(crate) fn bind_params(&mut self, v: Var) {
        self.bound_params = Some(v);
    }

    pub(crate) fn bound_params(&self) -> Option<Var> {
        self.bound_params
    }

    /// Views `numel(shape)` consecutive values of a flat tensor starting at `offset`.
    pub fn slice(&mut self, src: Var, offset: usize, shape: Vec<usize>) -> Result<Var> {
        let n: usize = shape.iter().product();
        let s = self.value(src);
        if offset + n > s.len() {
            return Err(Error::shape(format!(
                "slice [{offset}, {}) out of range for {} values",
                offset + n,
                s.len()
            )));
        }
        let data = s.data()[offset..offset + n].to_vec();
        Ok(self.push(Tensor::raw(shape, data), Op::Slice { src, offset }))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape().len() != 2 || bv.shape().len() != 2 || av.shape()[1] != bv.shape()[0] {
            return Err(Error::shape(format!(
                "matmul {:?} x {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let out = matmul(av, bv);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.shape().len() != 2 {
            return Err(Error::shape("transpose expects a matrix"));
        }
        let out = transpose(av);
        Ok(self.push(out, Op::Transpose(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape(format!("add {:?} + {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::raw(av.shape().to_vec(), data);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a length-`m` row vector to every row of an `[n, m]` matrix.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let m = av.cols();
        if bv.len() != m {
            return Err(Error::shape(format!(
                "row broadcast of {:?} onto {:?}",
                bv.shape(),
                av.shape()
            )));
        }
        let mut data = av.data().to_vec();
        for row in data.chunks_mut(m) {
            for (x, y) in row.iter_mut().zip(bv.data()) {
                *x += y;
            }
        }
        let out = Tensor::raw(av.shape().to_vec(), data);
        Ok(self.push(out, Op::AddRow(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape(format!("mul {:?} * {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::raw(av.shape().to_vec(), data);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let av = self.value(a);
        let out = Tensor::raw(av.shape().to_vec(), av.data().iter().map(|x| x * k).collect());
        self.push(out, Op::Scale(a, k))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let out = Tensor::raw(av.shape().to_vec(), av.data().iter().map(|x| x.max(0.0)).collect());
        self.push(out, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let out = Tensor::raw(av.shape().to_vec(), av.data().iter().map(|x| x.tanh()).collect());
        self.push(out, Op::Tanh(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let s = av.data().iter().sum::<f64>() / av.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// `sum |a_i|`, with subgradient 0 at exactly-zero coordinates.
    pub fn abs_sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().map(|x| x.abs()).sum();
        self.push(Tensor::scalar(s), Op::AbsSum(a))
    }

    /// Per-sample cross-entropy of `[n, C]` logits against integer labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        let (n, c) = (lv.rows(), lv.cols());
        if labels.len() != n {
            return Err(Error::shape(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::shape(format!("label {y} out of range for {c} classes")));
        }
        let floor = PROB_FLOOR.ln();
        let losses = (0..n)
            .map(|i| -log_softmax(lv.row(i), 1.0)[labels[i]].max(floor))
            .collect();
        let out = Tensor::raw(vec![n], losses);
        Ok(self.push(out, Op::CrossEntropy { logits, labels: labels.to_vec() }))
    }

    /// Per-sample `KL(teacher || softmax(logits / T))` with a fixed teacher distribution.
    pub fn kl_div(&mut self, logits: Var, teacher: &Tensor, temperature: f64) -> Result<Var> {
        let lv = self.value(logits);
        if lv.shape() != teacher.shape() || lv.shape().len() != 2 {
            return Err(Error::shape(format!(
                "kl between {:?} and {:?}",
                lv.shape(),
                teacher.shape()
            )));
        }
        if temperature <= 0.0 || !temperature.is_finite() {
            return Err(Error::config(format!("temperature must be > 0, got {temperature}")));
        }
        let losses = (0..lv.rows())
            .map(|i| kl_row(teacher.row(i), &log_softmax(lv.row(i), temperature)))
            .collect();
        let out = Tensor::raw(vec![lv.rows()], losses);
        Ok(self.push(
            out,
            Op::KlDiv { logits, teacher: teacher.clone(), temperature },
        ))
    }

    /// Per-row mean squared distance to a fixed target.
    pub fn sq_dist(&mut self, src: Var, target: &Tensor) -> Result<Var> {
        let sv = self.value(src);
        if sv.shape() != target.shape() {
            return Err(Error::shape(format!(
                "distance between {:?} and {:?}",
                sv.shape(),
                target.shape()
            )));
        }
        let c = sv.cols();
        let out: Vec<f64> = (0..sv.rows())
            .map(|i| {
                sv.row(i)
                    .iter()
                    .zip(target.row(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / c as f64
            })
            .collect();
        let out = Tensor::raw(vec![sv.rows()], out);
        Ok(self.push(out, Op::SqDist { src, target: target.clone() }))
    }

    /// `sum_i w_i x_i / n` over a length-`n` vector with constant weights.
    pub fn weighted_mean(&mut self, src: Var, weights: &[f64]) -> Result<Var> {
        let sv = self.value(src);
        if sv.len() != weights.len() {
            return Err(Error::shape(format!(
                "{} weights for {} values",
                weights.len(),
                sv.len()
            )));
        }
        let s = sv.data().iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / sv.len() as f64;
        Ok(self.push(
            Tensor::scalar(s),
            Op::WeightedMean { src, weights: weights.to_vec() },
        ))
    }

    /// Accumulates d(loss)/d(node) for every node reachable from `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut slots: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        slots[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = slots[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut slots);
            slots[idx] = Some(g);
        }
        Ok(Gradients { slots })
    }

    fn propagate(&self, node: &Node, g: &Tensor, slots: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Slice { src, offset } => {
                let sv = self.value(*src);
                let slot = slot(slots, *src, sv);
                for (d, x) in slot.data_mut()[*offset..*offset + gd.len()].iter_mut().zip(gd) {
                    *d += x;
                }
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = matmul(g, &transpose(bv));
                accumulate(slots, *a, av, ga.data());
                let gb = matmul(&transpose(av), g);
                accumulate(slots, *b, bv, gb.data());
            }
            Op::Transpose(a) => {
                let ga = transpose(g);
                accumulate(slots, *a, self.value(*a), ga.data());
            }
            Op::Add(a, b) => {
                accumulate(slots, *a, self.value(*a), gd);
                accumulate(slots, *b, self.value(*b), gd);
            }
            Op::AddRow(a, b) => {
                accumulate(slots, *a, self.value(*a), gd);
                let bv = self.value(*b);
                let m = bv.len();
                let mut gb = vec![0.0; m];
                for row in gd.chunks(m) {
                    for (acc, x) in gb.iter_mut().zip(row) {
                        *acc += x;
                    }
                }
                accumulate(slots, *b, bv, &gb);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga: Vec<f64> = gd.iter().zip(bv.data()).map(|(g, y)| g * y).collect();
                let gb: Vec<f64> = gd.iter().zip(av.data()).map(|(g, x)| g * x).collect();
                accumulate(slots, *a, av, &ga);
                accumulate(slots, *b, bv, &gb);
            }
            Op::Scale(a, k) => {
                let ga: Vec<f64> = gd.iter().map(|g| g * k).collect();
                accumulate(slots, *a, self.value(*a), &ga);
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                let ga: Vec<f64> = gd
                    .iter()
                    .zip(av.data())
                    .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                    .collect();
                accumulate(slots, *a, av, &ga);
            }
            Op::Tanh(a) => {
                let ga: Vec<f64> = gd
                    .iter()
                    .zip(node.value.data())
                    .map(|(g, y)| g * (1.0 - y * y))
                    .collect();
                accumulate(slots, *a, self.value(*a), &ga);
            }
            Op::Sum(a) => {
                let av = self.value(*a);
                accumulate(slots, *a, av, &vec![gd[0]; av.len()]);
            }
            Op::Mean(a) => {
                let av = self.value(*a);
                accumulate(slots, *a, av, &vec![gd[0] / av.len() as f64; av.len()]);
            }
            Op::AbsSum(a) => {
                let av = self.value(*a);
                let ga: Vec<f64> = av
                    .data()
                    .iter()
                    .map(|x| {
                        if *x > 0.0 {
                            gd[0]
                        } else if *x < 0.0 {
                            -gd[0]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                accumulate(slots, *a, av, &ga);
            }
            Op::CrossEntropy { logits, labels } => {
                let lv = self.value(*logits);
                let c = lv.cols();
                let mut gl = vec![0.0; lv.len()];
                for (i, &y) in labels.iter().enumerate() {
                    let q = softmax(lv.row(i), 1.0);
                    let row = &mut gl[i * c..(i + 1) * c];
                    for (k, r) in row.iter_mut().enumerate() {
                        let ind = if k == y { 1.0 } else { 0.0 };
                        *r = gd[i] * (q[k] - ind);
                    }
                }
                accumulate(slots, *logits, lv, &gl);
            }
            Op::KlDiv { logits, teacher, temperature } => {
                let lv = self.value(*logits);
                let c = lv.cols();
                let mut gl = vec![0.0; lv.len()];
                for i in 0..lv.rows() {
                    let q = softmax(lv.row(i), *temperature);
                    let p = teacher.row(i);
                    let row = &mut gl[i * c..(i + 1) * c];
                    for k in 0..c {
                        row[k] = gd[i] * (q[k] - p[k]) / temperature;
                    }
                }
                accumulate(slots, *logits, lv, &gl);
            }
            Op::SqDist { src, target } => {
                let sv = self.value(*src);
                let c = sv.cols();
                let ga: Vec<f64> = sv
                    .data()
                    .iter()
                    .zip(target.data())
                    .enumerate()
                    .map(|(j, (a, b))| gd[j / c] * 2.0 * (a - b) / c as f64)
                    .collect();
                accumulate(slots, *src, sv, &ga);
            }
            Op::WeightedMean { src, weights } => {
                let n = weights.len() as f64;
                let ga: Vec<f64> = weights.iter().map(|w| gd[0] * w / n).collect();
                accumulate(slots, *src, self.value(*src), &ga);
            }
        }
    }
}

fn slot<'a>(slots: &'a mut [Option<Tensor>], v: Var, like: &Tensor) -> &'a mut Tensor {
    slots[v.0].get_or_insert_with(|| Tensor::zeros(like.shape().to_vec()))
}

fn accumulate(slots: &mut [Option<Tensor>], v: Var, like: &Tensor, g: &[f64]) {
    let s = slot(slots, v, like);
    for (d, x) in s.data_mut().iter_mut().zip(g) {
        *d += x;
    }
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (n, k) = (a.shape()[0], a.shape()[1]);
    let m = b.shape()[1];
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let x = ad[i * k + p];
            if x == 0.0 {
                continue;
            }
            for (o, y) in orow.iter_mut().zip(&bd[p * m..(p + 1) * m]) {
                *o += x * y;
            }
        }
    }
    Tensor::raw(vec![n, m], out)
}

pub(crate) fn transpose(a: &Tensor) -> Tensor {
    let (n, m) = (a.shape()[0], a.shape()[1]);
    let d = a.data();
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[j * n + i] = d[i * m + j];
        }
    }
    Tensor::raw(vec![m, n], out)
}

/// `sum_j p_j (ln p_j - ln q_j)` with both logs floored at [`PROB_FLOOR`].
pub(crate) fn kl_row(p: &[f64], log_q: &[f64]) -> f64 {
    let floor = PROB_FLOOR.ln();
    p.iter()
        .zip(log_q)
        .map(|(&pj, &lq)| {
            let pj = pj.clamp(PROB_FLOOR, 1.0);
            pj * (pj.ln() - lq.max(floor))
        })
        .sum::<f64>()
        .max(0.0)
}

/// Probabilities `softmax(row / T)` for use as a fixed teacher target.
pub fn teacher_probs(logits: &Tensor, temperature: f64) -> Tensor {
    let c = logits.cols();
    let mut out = Vec::with_capacity(logits.len());
    for i in 0..logits.rows() {
        out.extend(softmax(logits.row(i), temperature));
    }
    Tensor::raw(vec![logits.rows(), c], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient_at_three() {
        let mut t = Tape::new();
        let w = t.leaf(Tensor::scalar(3.0));
        let y = t.mul(w, w).unwrap();
        let g = t.backward(y).unwrap();
        assert!((g.get(w, t.value(w)).data()[0] - 6.0).abs() < 1e-4);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let w = t.leaf(Tensor::zeros(vec![2]));
        assert!(matches!(t.backward(w), Err(Error::Shape(_))));
    }

    #[test]
    fn shared_input_accumulates() {
        // y = sum(a + a) => dy/da = 2
        let mut t = Tape::new();
        let a = t.leaf(Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap());
        let b = t.add(a, a).unwrap();
        let y = t.sum(b);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(a, t.value(a)).data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn abs_sum_zero_subgradient() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap());
        let y = t.abs_sum(a);
        assert_eq!(t.scalar(y), 3.0);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(a, t.value(a)).data(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(vec![1, 2]));
        assert!(t.cross_entropy(a, &[2]).is_err());
    }
}

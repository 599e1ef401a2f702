use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::synth::SynthSpec;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::{stream_rng, Stream};

pub const MIN_DEL_RATIO: u32 = 1;
pub const MAX_DEL_RATIO: u32 = 10;

/// Train/test data plus the deletion set `D_f`. `D_r` is everything else in train.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    spec: SynthSpec,
    train_x: Tensor,
    train_y: Vec<usize>,
    test_x: Tensor,
    test_y: Vec<usize>,
    del_indices: Vec<usize>,
    del_ratio: u32,
    del_seed: u64,
}

impl DatasetSplit {
    pub fn new(
        spec: SynthSpec,
        train_x: Tensor,
        train_y: Vec<usize>,
        test_x: Tensor,
        test_y: Vec<usize>,
    ) -> Result<Self> {
        if train_x.rows() != train_y.len() || test_x.rows() != test_y.len() {
            return Err(Error::shape("feature rows and label counts differ"));
        }
        if train_x.cols() != test_x.cols() {
            return Err(Error::shape("train and test widths differ"));
        }
        let c = spec.num_classes;
        if train_y.iter().chain(&test_y).any(|&y| y >= c) {
            return Err(Error::shape(format!("label outside [0, {c})")));
        }
        Ok(DatasetSplit {
            spec,
            train_x,
            train_y,
            test_x,
            test_y,
            del_indices: Vec::new(),
            del_ratio: 0,
            del_seed: 0,
        })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn dim(&self) -> usize {
        self.train_x.cols()
    }

    pub fn train_x(&self) -> &Tensor {
        &self.train_x
    }

    pub fn train_y(&self) -> &[usize] {
        &self.train_y
    }

    pub fn test_x(&self) -> &Tensor {
        &self.test_x
    }

    pub fn test_y(&self) -> &[usize] {
        &self.test_y
    }

    pub fn train_len(&self) -> usize {
        self.train_y.len()
    }

    pub fn test_len(&self) -> usize {
        self.test_y.len()
    }

    pub fn del_indices(&self) -> &[usize] {
        &self.del_indices
    }

    pub fn del_ratio(&self) -> u32 {
        self.del_ratio
    }

    pub fn del_seed(&self) -> u64 {
        self.del_seed
    }

    /// Sets `D_f` to the standard deletion set for `ratio` percent.
    pub fn with_deletion(mut self, ratio: u32, seed: u64) -> Result<Self> {
        self.del_indices = sample_deletion_set(self.train_len(), ratio, seed)?;
        self.del_ratio = ratio;
        self.del_seed = seed;
        Ok(self)
    }

    /// Installs an explicit deletion set (sorted, unique, in range).
    pub fn with_del_indices(mut self, mut indices: Vec<usize>, ratio: u32, seed: u64) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.last().is_some_and(|&i| i >= self.train_len()) {
            return Err(Error::shape("deletion index out of range"));
        }
        self.del_indices = indices;
        self.del_ratio = ratio;
        self.del_seed = seed;
        Ok(self)
    }

    pub fn is_deleted_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.train_len()];
        for &i in &self.del_indices {
            m[i] = true;
        }
        m
    }

    /// Indices of `D_r = D_train \ D_f`, ascending.
    pub fn retain_indices(&self) -> Vec<usize> {
        let deleted = self.is_deleted_mask();
        (0..self.train_len()).filter(|&i| !deleted[i]).collect()
    }

    pub fn all_train_indices(&self) -> Vec<usize> {
        (0..self.train_len()).collect()
    }

    /// Features and labels of the given training rows.
    pub fn train_subset(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        (
            self.train_x.select_rows(indices),
            indices.iter().map(|&i| self.train_y[i]).collect(),
        )
    }

    pub fn forget_set(&self) -> (Tensor, Vec<usize>) {
        self.train_subset(&self.del_indices)
    }

    pub fn retain_set(&self) -> (Tensor, Vec<usize>) {
        self.train_subset(&self.retain_indices())
    }
}

/// Number of deleted samples for `ratio` percent of `train_len`, rounded half up.
pub fn deletion_count(train_len: usize, ratio: u32) -> usize {
    (train_len as f64 * ratio as f64 / 100.0).round() as usize
}

/// Prefix of a seed-determined permutation of `0..train_len`, sorted.
/// Sets for smaller ratios are subsets of those for larger ones.
pub fn sample_deletion_set(train_len: usize, ratio: u32, seed: u64) -> Result<Vec<usize>> {
    if !(MIN_DEL_RATIO..=MAX_DEL_RATIO).contains(&ratio) {
        return Err(Error::config(format!(
            "del_ratio must be in {MIN_DEL_RATIO}..={MAX_DEL_RATIO}, got {ratio}"
        )));
    }
    let mut perm: Vec<usize> = (0..train_len).collect();
    perm.shuffle(&mut stream_rng(seed, Stream::Deletion));
    let mut picked = perm[..deletion_count(train_len, ratio)].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Replacement labels for `D_f`, each drawn uniformly from the other `C - 1` classes.
pub fn corrupt_labels(split: &DatasetSplit, del_indices: &[usize], seed: u64) -> Result<Vec<usize>> {
    let c = split.num_classes();
    if c < 2 {
        return Err(Error::config("label corruption needs at least 2 classes"));
    }
    let mut rng = stream_rng(seed, Stream::Corrupt);
    Ok(del_indices
        .iter()
        .map(|&i| redraw_label(split.train_y()[i], c, &mut rng))
        .collect())
}

pub(crate) fn redraw_label(y: usize, num_classes: usize, rng: &mut impl Rng) -> usize {
    let k = rng.random_range(0..num_classes - 1);
    if k >= y {
        k + 1
    } else {
        k
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Noise,
    Rotate,
    Scale,
}

impl ShiftKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(ShiftKind::Noise),
            "rotate" => Ok(ShiftKind::Rotate),
            "scale" => Ok(ShiftKind::Scale),
            other => Err(Error::config(format!("unknown shift '{other}' (noise, rotate, scale)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftKind::Noise => "noise",
            ShiftKind::Rotate => "rotate",
            ShiftKind::Scale => "scale",
        }
    }
}

/// Shifted copy of the test features; labels are unchanged.
///
/// `noise` adds `magnitude * N(0, 1)` per coordinate, `rotate` turns the first
/// two coordinates by `magnitude` radians, `scale` multiplies by `1 + magnitude`.
pub fn shift_testset(split: &DatasetSplit, kind: ShiftKind, magnitude: f64, seed: u64) -> Result<Tensor> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::config(format!("shift magnitude must be >= 0, got {magnitude}")));
    }
    let x = split.test_x();
    if magnitude == 0.0 {
        return Ok(x.clone());
    }
    let mut data = x.data().to_vec();
    let d = x.cols();
    match kind {
        ShiftKind::Noise => {
            let mut rng = stream_rng(seed, Stream::Shift);
            for v in &mut data {
                let z: f64 = rng.sample(StandardNormal);
                *v += magnitude * z;
            }
        }
        ShiftKind::Rotate => {
            let angle = magnitude % (2.0 * PI);
            let (s, c) = angle.sin_cos();
            for row in data.chunks_mut(d) {
                let (a, b) = (row[0], row[1]);
                row[0] = c * a - s * b;
                row[1] = s * a + c * b;
            }
        }
        ShiftKind::Scale => {
            for v in &mut data {
                *v *= 1.0 + magnitude;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::generate;

    #[test]
    fn ten_percent_of_thousand() {
        assert_eq!(sample_deletion_set(1000, 10, 3).unwrap().len(), 100);
    }

    #[test]
    fn ratio_out_of_range() {
        assert!(matches!(sample_deletion_set(100, 0, 0), Err(Error::Config(_))));
        assert!(matches!(sample_deletion_set(100, 11, 0), Err(Error::Config(_))));
    }

    #[test]
    fn nested_ratios() {
        let a = sample_deletion_set(500, 1, 9).unwrap();
        let b = sample_deletion_set(500, 2, 9).unwrap();
        assert!(a.iter().all(|i| b.binary_search(i).is_ok()));
    }

    #[test]
    fn two_class_corruption_is_forced() {
        let split = generate(&SynthSpec::blobs(2, 20, 0.1, 2, 0)).unwrap();
        let idx: Vec<usize> = (0..split.train_len()).collect();
        let y2 = corrupt_labels(&split, &idx, 1).unwrap();
        for (i, &y) in idx.iter().zip(&y2) {
            assert_eq!(y, 1 - split.train_y()[*i]);
        }
    }

    #[test]
    fn three_class_alternatives() {
        let mut rng = stream_rng(0, Stream::Corrupt);
        for _ in 0..200 {
            let y = redraw_label(1, 3, &mut rng);
            assert!(y == 0 || y == 2);
        }
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let split = generate(&SynthSpec::blobs(3, 20, 0.3, 4, 0)).unwrap();
        for kind in [ShiftKind::Noise, ShiftKind::Rotate, ShiftKind::Scale] {
            assert_eq!(&shift_testset(&split, kind, 0.0, 5).unwrap(), split.test_x());
        }
    }

    #[test]
    fn full_turn_rotation() {
        let split = generate(&SynthSpec::blobs(3, 20, 0.3, 2, 0)).unwrap();
        let r = shift_testset(&split, ShiftKind::Rotate, 2.0 * PI, 0).unwrap();
        for (a, b) in r.data().iter().zip(split.test_x().data()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(ShiftKind::parse("blur").is_err());
    }
}

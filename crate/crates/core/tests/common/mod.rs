//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use unlearnkit::data::{generate, DatasetSplit, SynthSpec};
use unlearnkit::nn::{Activation, Layer, Model, Tensor};
use unlearnkit::unlearn::{train_original, TrainConfig, TrainedModel};

/// Forward pass written with plain loops over the layer descriptors.
pub fn dense_forward(model: &Model, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = model.params();
    let mut rows: Vec<Vec<f64>> = x.to_vec();
    let mut linear_idx = 0;
    for layer in model.layers() {
        match *layer {
            Layer::Linear { in_dim, out_dim, offset } => {
                let delta = model.adapter_delta(linear_idx);
                rows = rows
                    .iter()
                    .map(|r| {
                        (0..out_dim)
                            .map(|o| {
                                let mut acc = p[offset + in_dim * out_dim + o];
                                for i in 0..in_dim {
                                    let mut w = p[offset + o * in_dim + i];
                                    if let Some(d) = &delta {
                                        w += d[o * in_dim + i];
                                    }
                                    acc += w * r[i];
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect();
                linear_idx += 1;
            }
            Layer::Activation { activation } => {
                for r in rows.iter_mut() {
                    for v in r.iter_mut() {
                        *v = match activation {
                            Activation::Relu => v.max(0.0),
                            Activation::Tanh => v.tanh(),
                        };
                    }
                }
            }
        }
    }
    rows
}

pub fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

/// Central finite differences of `f` at `x`.
pub fn finite_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error with an absolute floor for near-zero gradients.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Principal Lambert W by Halley iteration from a log-based start.
pub fn halley_w(x: f64) -> f64 {
    let mut w = if x < 1.0 { x / (1.0 + x).max(0.5) } else { x.ln() - x.ln().ln().max(0.0) };
    for _ in 0..200 {
        let e = w.exp();
        let f = w * e - x;
        let wp1 = w + 1.0;
        let step = f / (e * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() < 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Lambert W on `[0, inf)` by bisection on `w * e^w = x`.
pub fn bisect_w(x: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, x.max(1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force deletion capacity: the largest ratio such that it and every
/// smaller ratio in the sweep stay within tolerance.
pub fn capacity_oracle(sweep: &[(u32, f64)], baseline: f64, tol: f64) -> u32 {
    let ok = |i: usize| sweep[..=i].iter().all(|&(_, a)| a >= baseline - tol);
    (0..sweep.len()).filter(|&i| ok(i)).map(|i| sweep[i].0).max().unwrap_or(0)
}

/// Singular values of an `[rows, cols]` row-major matrix by one-sided
/// Jacobi rotations on its columns.
pub fn singular_values(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut c: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| m[i * cols + j]).collect()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta, gamma) = (dot(&c[p], &c[p]), dot(&c[q], &c[q]), dot(&c[p], &c[q]));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..rows {
                    let (a, b) = (c[p][i], c[q][i]);
                    c[p][i] = cs * a - sn * b;
                    c[q][i] = sn * a + cs * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    c.iter().map(|col| dot(col, col).sqrt()).collect()
}

/// Numerical rank: singular values above `rel_tol` times the largest.
pub fn numerical_rank(m: &[f64], rows: usize, cols: usize, rel_tol: f64) -> usize {
    let sv = singular_values(m, rows, cols);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Index of the nearest class centroid for each row.
pub fn nearest_centroid(centers: &[Vec<f64>], x: &Tensor) -> Vec<usize> {
    (0..x.rows())
        .map(|i| {
            let r = x.row(i);
            let d = |c: &Vec<f64>| c.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (0..centers.len()).min_by(|&a, &b| d(&centers[a]).total_cmp(&d(&centers[b]))).unwrap()
        })
        .collect()
}

pub fn percent_correct(pred: &[usize], y: &[usize]) -> f64 {
    100.0 * pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Three-class blobs with 300 training rows.
pub fn small_blobs(noise: f64, seed: u64) -> DatasetSplit {
    generate(&SynthSpec::blobs(3, 125, noise, 2, seed)).unwrap()
}

/// Higher-dimensional blobs used for the method comparisons.
pub fn method_blobs(seed: u64) -> DatasetSplit {
    generate(&SynthSpec::blobs(3, 250, 0.5, 64, seed)).unwrap()
}

pub fn trained(split: &DatasetSplit, seed: u64) -> TrainedModel {
    train_original(split, &TrainConfig { seed, ..TrainConfig::default() }).unwrap()
}

/// Fast recipe for tests that only need a reasonable original model.
pub fn quick_recipe(seed: u64) -> TrainConfig {
    TrainConfig { seed, epochs: 10, hidden: vec![16], ..TrainConfig::default() }
}

pub mod gradcheck;

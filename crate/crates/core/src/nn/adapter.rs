//! Low-rank adapters: `W_eff = W + scale * up * down` on a linear layer.
//!
//! Adapter matrices are appended to the model's flat parameter vector. While
//! any adapter is attached, [`Model::trainable_mask`] selects only adapter
//! entries so the base weights stay frozen.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::Model;
use crate::nn::optim::ParamMask;
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowRankAdapter {
    /// Index among the model's linear layers.
    pub target_layer: usize,
    pub rank: usize,
    pub scale: f64,
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[rank, in_dim]` block.
    pub down_offset: usize,
    /// `[out_dim, rank]` block.
    pub up_offset: usize,
}

impl LowRankAdapter {
    pub fn param_count(&self) -> usize {
        self.rank * (self.in_dim + self.out_dim)
    }
}

impl Model {
    /// Attaches a rank-`rank` adapter to linear layer `layer`. `down` is drawn
    /// from a fan-in uniform, `up` starts at zero so the forward pass is unchanged.
    pub fn attach_adapter(&mut self, layer: usize, rank: usize, scale: f64) -> Result<()> {
        let linears = self.linear_layers();
        let &(_, in_dim, out_dim, _) = linears
            .get(layer)
            .ok_or_else(|| Error::config(format!("no linear layer {layer}")))?;
        if rank == 0 || rank > in_dim.min(out_dim) {
            return Err(Error::config(format!(
                "adapter rank {rank} must be in 1..={} for a {out_dim}x{in_dim} layer",
                in_dim.min(out_dim)
            )));
        }
        if self.adapters().iter().any(|a| a.target_layer == layer) {
            return Err(Error::config(format!("layer {layer} already has an adapter")));
        }
        let mut rng = stream_rng(self.seed(), Stream::Adapter(layer));
        let bound = 1.0 / (in_dim as f64).sqrt();
        let params = self.params_vec_mut();
        let down_offset = params.len();
        params.extend((0..rank * in_dim).map(|_| rng.random_range(-bound..=bound)));
        let up_offset = params.len();
        params.extend(std::iter::repeat_n(0.0, out_dim * rank));
        self.adapters_mut().push(LowRankAdapter {
            target_layer: layer,
            rank,
            scale,
            in_dim,
            out_dim,
            down_offset,
            up_offset,
        });
        Ok(())
    }

    /// Attaches an adapter of rank `min(rank, in, out)` to every linear layer.
    pub fn attach_adapters_everywhere(&mut self, rank: usize, scale: f64) -> Result<()> {
        if rank == 0 {
            return Err(Error::config("adapter rank must be positive"));
        }
        for (i, (_, in_dim, out_dim, _)) in self.linear_layers().into_iter().enumerate() {
            self.attach_adapter(i, rank.min(in_dim).min(out_dim), scale)?;
        }
        Ok(())
    }

    /// Folds every adapter into its base weight and drops the adapter parameters.
    pub fn merge_adapters(&mut self) {
        let adapters = std::mem::take(self.adapters_mut());
        let linears = self.linear_layers();
        let base = self.base_param_count();
        let params = self.params_vec_mut();
        for ad in &adapters {
            let (_, in_dim, out_dim, offset) = linears[ad.target_layer];
            let delta = adapter_delta(params, ad);
            for (w, d) in params[offset..offset + in_dim * out_dim].iter_mut().zip(&delta) {
                *w += d;
            }
        }
        params.truncate(base);
    }

    /// Selects adapter parameters when adapters are attached, otherwise everything.
    pub fn trainable_mask(&self) -> ParamMask {
        if self.adapters().is_empty() {
            return ParamMask::all(self.param_count());
        }
        let mut selected = vec![false; self.param_count()];
        for ad in self.adapters() {
            let start = ad.down_offset.min(ad.up_offset);
            selected[start..start + ad.param_count()].iter_mut().for_each(|s| *s = true);
        }
        ParamMask::new(selected)
    }

    /// `(adapter parameters, base weight parameters)` for linear layer `layer`.
    pub fn adapter_fraction(&self, layer: usize) -> Option<(usize, usize)> {
        let ad = self.adapters().iter().find(|a| a.target_layer == layer)?;
        Some((ad.param_count(), ad.in_dim * ad.out_dim))
    }

    /// Dense `scale * up * down` for the adapter on `layer`, `[out, in]` row-major.
    pub fn adapter_delta(&self, layer: usize) -> Option<Vec<f64>> {
        let ad = self.adapters().iter().find(|a| a.target_layer == layer)?;
        Some(adapter_delta(self.params(), ad))
    }
}

fn adapter_delta(params: &[f64], ad: &LowRankAdapter) -> Vec<f64> {
    let down = &params[ad.down_offset..ad.down_offset + ad.rank * ad.in_dim];
    let up = &params[ad.up_offset..ad.up_offset + ad.out_dim * ad.rank];
    let mut out = vec![0.0; ad.out_dim * ad.in_dim];
    for o in 0..ad.out_dim {
        for k in 0..ad.rank {
            let u = up[o * ad.rank + k] * ad.scale;
            for i in 0..ad.in_dim {
                out[o * ad.in_dim + i] += u * down[k * ad.in_dim + i];
            }
        }
    }
    out
}

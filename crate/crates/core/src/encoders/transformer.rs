use rand::Rng;

use super::{AttentionCache, Linear, MultiHeadAttention};
use crate::error::{Error, Result};
use crate::numerics::{join, Params, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row normalisation with learned gain and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Tensor::full(&[dim], 1.0),
            beta: Tensor::zeros(&[dim]),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        LayerNorm {
            gamma: Tensor::zeros(&[dim]),
            beta: Tensor::zeros(&[dim]),
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LayerNormCache) {
        let d = x.cols() as f64;
        let mut xhat = x.clone();
        let mut y = x.zeros_like();
        let mut inv_std = Vec::with_capacity(x.rows());
        for t in 0..x.rows() {
            let row = xhat.row_mut(t);
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
            inv_std.push(inv);
            let out = y.row_mut(t);
            for (j, o) in out.iter_mut().enumerate() {
                *o = self.gamma.data()[j] * xhat.row(t)[j] + self.beta.data()[j];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &Tensor, grads: &mut LayerNorm) -> Tensor {
        let d = dy.cols();
        let mut dx = dy.zeros_like();
        let mut dxhat = vec![0.0; d];
        for t in 0..dy.rows() {
            let xh = cache.xhat.row(t);
            let g = dy.row(t);
            for j in 0..d {
                grads.gamma.data_mut()[j] += g[j] * xh[j];
                grads.beta.data_mut()[j] += g[j];
                dxhat[j] = g[j] * self.gamma.data()[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / d as f64;
            let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            let inv = cache.inv_std[t];
            for (j, o) in dx.row_mut(t).iter_mut().enumerate() {
                *o = inv * (dxhat[j] - mean_d - xh[j] * mean_dx);
            }
        }
        dx
    }
}

impl Params for LayerNorm {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "gamma"), &self.gamma);
        f(join(prefix, "beta"), &self.beta);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "gamma"), &mut self.gamma);
        f(join(prefix, "beta"), &mut self.beta);
    }
}

/// Position-wise `W2 relu(W1 x + b1) + b2`; equivalent to a pair of
/// width-1 convolutions with `filters` channels in between.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

#[derive(Debug, Clone)]
pub struct FeedForwardCache {
    x: Tensor,
    hidden: Tensor,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(dim: usize, filters: usize, rng: &mut R) -> Self {
        FeedForward {
            inner: Linear::new(dim, filters, rng),
            outer: Linear::new(filters, dim, rng),
        }
    }

    pub fn zeros(dim: usize, filters: usize) -> Self {
        FeedForward {
            inner: Linear::zeros(dim, filters),
            outer: Linear::zeros(filters, dim),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, FeedForwardCache)> {
        let hidden = self.inner.forward(x)?.map(|v| v.max(0.0));
        let y = self.outer.forward(&hidden)?;
        Ok((y, FeedForwardCache { x: x.clone(), hidden }))
    }

    pub fn backward(&self, cache: &FeedForwardCache, dy: &Tensor, grads: &mut FeedForward) -> Tensor {
        let mut dh = self.outer.backward(&cache.hidden, dy, &mut grads.outer);
        for (g, h) in dh.data_mut().iter_mut().zip(cache.hidden.data()) {
            if *h <= 0.0 {
                *g = 0.0;
            }
        }
        self.inner.backward(&cache.x, &dh, &mut grads.inner)
    }
}

impl Params for FeedForward {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.inner.visit(&join(prefix, "inner"), f);
        self.outer.visit(&join(prefix, "outer"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.inner.visit_mut(&join(prefix, "inner"), f);
        self.outer.visit_mut(&join(prefix, "outer"), f);
    }
}

/// Sinusoid for one coordinate: `sin(pos / 10000^(2i/d))` on even `j = 2i`,
/// `cos` of the same angle on odd `j = 2i+1`.
pub fn sinusoid(pos: usize, j: usize, dim: usize) -> f64 {
    let pair = (j / 2) as f64;
    let angle = pos as f64 / 10000f64.powf(2.0 * pair / dim as f64);
    if j.is_multiple_of(2) {
        angle.sin()
    } else {
        angle.cos()
    }
}

/// Position signal for rows `0..steps` plus the recurrence-step signal for `hop`.
pub fn timing_signal(steps: usize, dim: usize, hop: usize) -> Tensor {
    let mut out = Tensor::zeros(&[steps, dim]);
    for t in 0..steps {
        for (j, v) in out.row_mut(t).iter_mut().enumerate() {
            *v = sinusoid(t, j, dim) + sinusoid(hop, j, dim);
        }
    }
    out
}

/// Universal-transformer encoder: one post-norm transformer layer applied
/// `hops` times with the same weights, timing signals added before each hop.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalTransformer {
    pub hops: usize,
    pub attention: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ffn: FeedForward,
    pub norm2: LayerNorm,
}

#[derive(Debug, Clone)]
struct HopCache {
    attention: AttentionCache,
    norm1: LayerNormCache,
    ffn: FeedForwardCache,
    norm2: LayerNormCache,
}

#[derive(Debug, Clone)]
pub struct UniversalTransformerCache {
    hops: Vec<HopCache>,
}

impl UniversalTransformer {
    pub fn new<R: Rng + ?Sized>(dim: usize, n_heads: usize, filters: usize, hops: usize, rng: &mut R) -> Result<Self> {
        if hops < 1 {
            return Err(Error::InvalidArgument("universal transformer needs at least one hop".into()));
        }
        Ok(UniversalTransformer {
            hops,
            attention: MultiHeadAttention::new(dim, n_heads, rng)?,
            norm1: LayerNorm::new(dim),
            ffn: FeedForward::new(dim, filters, rng),
            norm2: LayerNorm::new(dim),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.zero();
        g
    }

    pub fn dim(&self) -> usize {
        self.attention.dim()
    }

    pub fn forward(&self, x: &Tensor, mask: &[bool]) -> Result<(Tensor, UniversalTransformerCache)> {
        if self.hops < 1 {
            return Err(Error::InvalidArgument("universal transformer needs at least one hop".into()));
        }
        if x.cols() != self.dim() {
            return Err(Error::Shape(format!("expected width {}, got {:?}", self.dim(), x.shape())));
        }
        let mut state = x.clone();
        let mut caches = Vec::with_capacity(self.hops);
        for hop in 1..=self.hops {
            let input = state.add(&timing_signal(x.rows(), self.dim(), hop))?;
            let (attn, attention) = self.attention.forward(&input, mask)?;
            let (mid, norm1) = self.norm1.forward(&input.add(&attn)?);
            let (ff, ffn) = self.ffn.forward(&mid)?;
            let (out, norm2) = self.norm2.forward(&mid.add(&ff)?);
            caches.push(HopCache {
                attention,
                norm1,
                ffn,
                norm2,
            });
            state = out;
        }
        Ok((state, UniversalTransformerCache { hops: caches }))
    }

    pub fn backward(&self, cache: &UniversalTransformerCache, dy: &Tensor, grads: &mut UniversalTransformer) -> Tensor {
        let mut d = dy.clone();
        for hop in cache.hops.iter().rev() {
            let d_res2 = self.norm2.backward(&hop.norm2, &d, &mut grads.norm2);
            let d_mid = self.ffn.backward(&hop.ffn, &d_res2, &mut grads.ffn);
            let d_mid = d_mid.add(&d_res2).expect("same shape");
            let d_res1 = self.norm1.backward(&hop.norm1, &d_mid, &mut grads.norm1);
            let d_in = self.attention.backward(&hop.attention, &d_res1, &mut grads.attention);
            d = d_in.add(&d_res1).expect("same shape");
        }
        d
    }
}

impl Params for UniversalTransformer {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.attention.visit(&join(prefix, "attention"), f);
        self.norm1.visit(&join(prefix, "norm1"), f);
        self.ffn.visit(&join(prefix, "ffn"), f);
        self.norm2.visit(&join(prefix, "norm2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.attention.visit_mut(&join(prefix, "attention"), f);
        self.norm1.visit_mut(&join(prefix, "norm1"), f);
        self.ffn.visit_mut(&join(prefix, "ffn"), f);
        self.norm2.visit_mut(&join(prefix, "norm2"), f);
    }
}

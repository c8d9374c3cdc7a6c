use rand::Rng;

use super::Linear;
use crate::error::{Error, Result};
use crate::numerics::ops::{axpy, dot};
use crate::numerics::{join, Params, Tensor};

/// Scaled dot-product self-attention over `n_heads` slices of the model
/// dimension, followed by an output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub n_heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// Attention weights `[heads x T x T]`; masked keys hold 0.
    probs: Vec<f64>,
    ctx: Tensor,
}

impl AttentionCache {
    /// Weights of head `head`, query `i`, over all keys.
    pub fn weights(&self, head: usize, i: usize) -> &[f64] {
        let t = self.x.rows();
        &self.probs[(head * t + i) * t..(head * t + i + 1) * t]
    }
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(dim: usize, n_heads: usize, rng: &mut R) -> Result<Self> {
        check_heads(dim, n_heads)?;
        Ok(MultiHeadAttention {
            n_heads,
            query: Linear::new(dim, dim, rng),
            key: Linear::new(dim, dim, rng),
            value: Linear::new(dim, dim, rng),
            output: Linear::new(dim, dim, rng),
        })
    }

    pub fn zeros(dim: usize, n_heads: usize) -> Result<Self> {
        check_heads(dim, n_heads)?;
        Ok(MultiHeadAttention {
            n_heads,
            query: Linear::zeros(dim, dim),
            key: Linear::zeros(dim, dim),
            value: Linear::zeros(dim, dim),
            output: Linear::zeros(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.query.input_dim()
    }

    pub fn head_dim(&self) -> usize {
        self.dim() / self.n_heads
    }

    pub fn forward(&self, x: &Tensor, mask: &[bool]) -> Result<(Tensor, AttentionCache)> {
        let steps = x.rows();
        if x.cols() != self.dim() || mask.len() != steps {
            return Err(Error::Shape(format!(
                "attention expects [T x {}] with T mask entries, got {:?} and {}",
                self.dim(),
                x.shape(),
                mask.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidArgument("self-attention over a fully masked sequence".into()));
        }
        let q = self.query.forward(x)?;
        let k = self.key.forward(x)?;
        let v = self.value.forward(x)?;
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut probs = vec![0.0; self.n_heads * steps * steps];
        let mut ctx = x.zeros_like();
        let mut scores = vec![0.0; steps];
        for head in 0..self.n_heads {
            let off = head * dh;
            for i in 0..steps {
                let qi = &q.row(i)[off..off + dh];
                let mut max = f64::NEG_INFINITY;
                for j in 0..steps {
                    scores[j] = if mask[j] {
                        dot(qi, &k.row(j)[off..off + dh]) * scale
                    } else {
                        f64::NEG_INFINITY
                    };
                    max = max.max(scores[j]);
                }
                let p = &mut probs[(head * steps + i) * steps..(head * steps + i + 1) * steps];
                let mut sum = 0.0;
                for j in 0..steps {
                    p[j] = if mask[j] { (scores[j] - max).exp() } else { 0.0 };
                    sum += p[j];
                }
                let out = &mut ctx.row_mut(i)[off..off + dh];
                for j in 0..steps {
                    p[j] /= sum;
                    if p[j] != 0.0 {
                        axpy(p[j], &v.row(j)[off..off + dh], out);
                    }
                }
            }
        }
        let y = self.output.forward(&ctx)?;
        let cache = AttentionCache {
            x: x.clone(),
            q,
            k,
            v,
            probs,
            ctx,
        };
        Ok((y, cache))
    }

    pub fn backward(&self, cache: &AttentionCache, dy: &Tensor, grads: &mut MultiHeadAttention) -> Tensor {
        let steps = cache.x.rows();
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let dctx = self.output.backward(&cache.ctx, dy, &mut grads.output);
        let mut dq = cache.q.zeros_like();
        let mut dk = cache.k.zeros_like();
        let mut dv = cache.v.zeros_like();
        let mut dp = vec![0.0; steps];
        for head in 0..self.n_heads {
            let off = head * dh;
            for i in 0..steps {
                let p = cache.weights(head, i);
                let dci = &dctx.row(i)[off..off + dh];
                let mut weighted = 0.0;
                for j in 0..steps {
                    if p[j] == 0.0 {
                        dp[j] = 0.0;
                        continue;
                    }
                    dp[j] = dot(dci, &cache.v.row(j)[off..off + dh]);
                    weighted += p[j] * dp[j];
                    axpy(p[j], dci, &mut dv.row_mut(j)[off..off + dh]);
                }
                for j in 0..steps {
                    if p[j] == 0.0 {
                        continue;
                    }
                    let ds = p[j] * (dp[j] - weighted) * scale;
                    axpy(ds, &cache.k.row(j)[off..off + dh], &mut dq.row_mut(i)[off..off + dh]);
                    axpy(ds, &cache.q.row(i)[off..off + dh], &mut dk.row_mut(j)[off..off + dh]);
                }
            }
        }
        let mut dx = self.query.backward(&cache.x, &dq, &mut grads.query);
        let dxk = self.key.backward(&cache.x, &dk, &mut grads.key);
        let dxv = self.value.backward(&cache.x, &dv, &mut grads.value);
        for ((a, b), c) in dx.data_mut().iter_mut().zip(dxk.data()).zip(dxv.data()) {
            *a += b + c;
        }
        dx
    }
}

fn check_heads(dim: usize, n_heads: usize) -> Result<()> {
    if n_heads == 0 || !dim.is_multiple_of(n_heads) {
        return Err(Error::InvalidArgument(format!(
            "model dimension {dim} is not divisible into {n_heads} heads"
        )));
    }
    Ok(())
}

impl Params for MultiHeadAttention {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.query.visit(&join(prefix, "query"), f);
        self.key.visit(&join(prefix, "key"), f);
        self.value.visit(&join(prefix, "value"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.query.visit_mut(&join(prefix, "query"), f);
        self.key.visit_mut(&join(prefix, "key"), f);
        self.value.visit_mut(&join(prefix, "value"), f);
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}

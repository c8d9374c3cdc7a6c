use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::ops::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::{join, Params, Tensor};

/// Additive word-level attention: `e_t = v . tanh(W h_t)`,
/// `alpha = softmax(e)` over unmasked steps, output `sum_t alpha_t h_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionPool {
    pub w: Tensor,
    pub v: Tensor,
}

#[derive(Debug, Clone)]
pub struct AttentionPoolCache {
    h: Tensor,
    mask: Vec<bool>,
    /// `tanh(W h_t)` per step, `[T x d]`.
    u: Vec<f64>,
    alpha: Vec<f64>,
}

impl AttentionPoolCache {
    pub fn weights(&self) -> &[f64] {
        &self.alpha
    }
}

impl AttentionPool {
    pub fn new<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        AttentionPool {
            w: Tensor::uniform(&[dim, dim], -bound, bound, rng),
            v: Tensor::uniform(&[dim], -bound, bound, rng),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        AttentionPool {
            w: Tensor::zeros(&[dim, dim]),
            v: Tensor::zeros(&[dim]),
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn forward(&self, h: &Tensor, mask: &[bool]) -> Result<(Vec<f64>, AttentionPoolCache)> {
        let d = self.dim();
        let steps = h.rows();
        if h.cols() != d || mask.len() != steps {
            return Err(Error::Shape(format!(
                "attention pool expects [T x {d}] with T mask entries, got {:?} and {}",
                h.shape(),
                mask.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidArgument("attention pool over a fully masked sequence".into()));
        }
        let mut u = vec![0.0; steps * d];
        let mut scores = vec![f64::NEG_INFINITY; steps];
        for t in (0..steps).filter(|&t| mask[t]) {
            let ut = &mut u[t * d..(t + 1) * d];
            matvec_acc(self.w.data(), h.row(t), ut);
            ut.iter_mut().for_each(|x| *x = x.tanh());
            scores[t] = dot(self.v.data(), ut);
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = vec![0.0; steps];
        let mut sum = 0.0;
        for t in (0..steps).filter(|&t| mask[t]) {
            alpha[t] = (scores[t] - max).exp();
            sum += alpha[t];
        }
        alpha.iter_mut().for_each(|a| *a /= sum);
        let mut s = vec![0.0; d];
        for t in (0..steps).filter(|&t| mask[t]) {
            axpy(alpha[t], h.row(t), &mut s);
        }
        let cache = AttentionPoolCache {
            h: h.clone(),
            mask: mask.to_vec(),
            u,
            alpha,
        };
        Ok((s, cache))
    }

    pub fn backward(&self, cache: &AttentionPoolCache, ds: &[f64], grads: &mut AttentionPool) -> Tensor {
        let d = self.dim();
        let h = &cache.h;
        let steps = h.rows();
        let mut dh = h.zeros_like();
        let valid: Vec<usize> = (0..steps).filter(|&t| cache.mask[t]).collect();
        let d_alpha: Vec<f64> = (0..steps)
            .map(|t| if cache.mask[t] { dot(ds, h.row(t)) } else { 0.0 })
            .collect();
        let mean: f64 = valid.iter().map(|&t| cache.alpha[t] * d_alpha[t]).sum();
        let mut dz = vec![0.0; d];
        for &t in &valid {
            let a = cache.alpha[t];
            axpy(a, ds, dh.row_mut(t));
            let de = a * (d_alpha[t] - mean);
            let ut = &cache.u[t * d..(t + 1) * d];
            axpy(de, ut, grads.v.data_mut());
            for ((z, &uj), &vj) in dz.iter_mut().zip(ut).zip(self.v.data()) {
                *z = de * vj * (1.0 - uj * uj);
            }
            outer_acc(grads.w.data_mut(), &dz, h.row(t));
            matvec_t_acc(self.w.data(), &dz, dh.row_mut(t));
        }
        dh
    }
}

impl Params for AttentionPool {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "w"), &self.w);
        f(join(prefix, "v"), &self.v);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "w"), &mut self.w);
        f(join(prefix, "v"), &mut self.v);
    }
}

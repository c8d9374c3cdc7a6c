use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::ops::{axpy, matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::{join, Params, Tensor};

/// Affine map `y = W x + b`, `W` stored `[out x in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Linear {
            w: Tensor::uniform(&[output, input], -bound, bound, rng),
            b: Tensor::zeros(&[output]),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            w: Tensor::zeros(&[output, input]),
            b: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn forward_row(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(self.b.data());
        matvec_acc(self.w.data(), x, y);
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "linear expects {} inputs, got {:?}",
                self.input_dim(),
                x.shape()
            )));
        }
        let mut out = Tensor::zeros(&[x.rows(), self.output_dim()]);
        for t in 0..x.rows() {
            self.forward_row(x.row(t), out.row_mut(t));
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads`; adds `W^T dy` to `dx`.
    pub fn backward_row(&self, x: &[f64], dy: &[f64], grads: &mut Linear, dx: Option<&mut [f64]>) {
        axpy(1.0, dy, grads.b.data_mut());
        outer_acc(grads.w.data_mut(), dy, x);
        if let Some(dx) = dx {
            matvec_t_acc(self.w.data(), dy, dx);
        }
    }

    pub fn backward(&self, x: &Tensor, dy: &Tensor, grads: &mut Linear) -> Tensor {
        let mut dx = x.zeros_like();
        for t in 0..x.rows() {
            self.backward_row(x.row(t), dy.row(t), grads, Some(dx.row_mut(t)));
        }
        dx
    }
}

impl Params for Linear {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "w"), &self.w);
        f(join(prefix, "b"), &self.b);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "w"), &mut self.w);
        f(join(prefix, "b"), &mut self.b);
    }
}

/// Row gather from an embedding table.
pub fn embed(ids: &[usize], table: &Tensor) -> Result<Tensor> {
    if ids.is_empty() {
        return Err(Error::InvalidArgument("cannot embed an empty sequence".into()));
    }
    let dim = table.cols();
    let mut out = Tensor::zeros(&[ids.len(), dim]);
    for (t, &id) in ids.iter().enumerate() {
        if id >= table.rows() {
            return Err(Error::InvalidArgument(format!(
                "token id {id} out of range for {} embeddings",
                table.rows()
            )));
        }
        out.row_mut(t).copy_from_slice(table.row(id));
    }
    Ok(out)
}

/// Scatter-adds row gradients back into the table gradient.
pub fn embed_backward(ids: &[usize], d_out: &Tensor, grad_table: &mut Tensor) {
    for (t, &id) in ids.iter().enumerate() {
        axpy(1.0, d_out.row(t), grad_table.row_mut(id));
    }
}

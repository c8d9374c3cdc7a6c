use super::Tensor;
use crate::error::{Error, Result};

/// A named collection of trainable tensors visited in a fixed order.
///
/// Gradient containers reuse the parameter type, so a layer's gradients are
/// simply another instance of the layer with every tensor zeroed.
pub trait Params {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.len());
        n
    }

    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, t| out.push((name, t)));
        out
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit("", &mut |_, t| out.extend_from_slice(t.data()));
        out
    }

    fn assign(&mut self, values: &[f64]) -> Result<()> {
        let total = self.num_params();
        if values.len() != total {
            return Err(Error::Shape(format!("expected {total} values, got {}", values.len())));
        }
        let mut offset = 0;
        self.visit_mut("", &mut |_, t| {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        });
        Ok(())
    }

    fn zero(&mut self) {
        self.visit_mut("", &mut |_, t| t.fill(0.0));
    }

    fn scale_all(&mut self, factor: f64) {
        self.visit_mut("", &mut |_, t| t.scale(factor));
    }

    /// Round every value to the nearest `f32`, so checkpoints are lossless.
    fn round_to_f32(&mut self) {
        self.visit_mut("", &mut |_, t| {
            t.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64)
        });
    }

    fn grad_norm(&self) -> f64 {
        let mut s = 0.0;
        self.visit("", &mut |_, t| s += t.sum_sq());
        s.sqrt()
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, t| ok &= t.is_finite());
        ok
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl<P: Params> Params for Option<P> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        if let Some(p) = self {
            p.visit(prefix, f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        if let Some(p) = self {
            p.visit_mut(prefix, f);
        }
    }
}

impl Params for Tensor {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(prefix.to_string(), self);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(prefix.to_string(), self);
    }
}

impl<A: Params, B: Params> Params for (A, B) {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.0.visit(&join(prefix, "0"), f);
        self.1.visit(&join(prefix, "1"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.0.visit_mut(&join(prefix, "0"), f);
        self.1.visit_mut(&join(prefix, "1"), f);
    }
}

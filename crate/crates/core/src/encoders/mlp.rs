use rand::Rng;

use super::Linear;
use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::numerics::{join, Params, Tensor};

/// Classifier head: one ReLU hidden layer, then four logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    pub hidden: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    x: Vec<f64>,
    h: Vec<f64>,
}

impl MlpHead {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        MlpHead {
            hidden: Linear::new(input, hidden, rng),
            output: Linear::new(hidden, NUM_CLASSES, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        MlpHead {
            hidden: Linear::zeros(input, hidden),
            output: Linear::zeros(hidden, NUM_CLASSES),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<([f64; NUM_CLASSES], MlpCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "mlp head expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut h = vec![0.0; self.hidden.output_dim()];
        self.hidden.forward_row(x, &mut h);
        h.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut logits = [0.0; NUM_CLASSES];
        self.output.forward_row(&h, &mut logits);
        Ok((logits, MlpCache { x: x.to_vec(), h }))
    }

    pub fn backward(&self, cache: &MlpCache, d_logits: &[f64], grads: &mut MlpHead) -> Vec<f64> {
        let mut dh = vec![0.0; cache.h.len()];
        self.output.backward_row(&cache.h, d_logits, &mut grads.output, Some(&mut dh));
        for (g, h) in dh.iter_mut().zip(&cache.h) {
            if *h <= 0.0 {
                *g = 0.0;
            }
        }
        let mut dx = vec![0.0; cache.x.len()];
        self.hidden.backward_row(&cache.x, &dh, &mut grads.hidden, Some(&mut dx));
        dx
    }
}

impl Params for MlpHead {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.hidden.visit(&join(prefix, "hidden"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.hidden.visit_mut(&join(prefix, "hidden"), f);
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}

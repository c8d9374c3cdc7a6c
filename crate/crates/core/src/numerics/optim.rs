use serde::{Deserialize, Serialize};

use super::{Params, Tensor};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(like: &Tensor) -> Self {
        AdamState {
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(param: &mut Tensor, grad: &Tensor, state: &mut AdamState, lr: f64) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(Error::Shape(format!(
            "adam: param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.m.shape()
        )));
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (((p, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam over every tensor of a [`Params`] collection.
#[derive(Debug, Clone)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new<P: Params>(params: &P) -> Self {
        let mut states = Vec::new();
        params.visit("", &mut |_, t| states.push(AdamState::new(t)));
        Adam { states }
    }

    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<()> {
        let mut grad_refs = Vec::with_capacity(self.states.len());
        grads.visit("", &mut |_, t| grad_refs.push(t));
        if grad_refs.len() != self.states.len() {
            return Err(Error::Shape("gradient structure differs from parameters".into()));
        }
        let mut idx = 0;
        let mut result = Ok(());
        let states = &mut self.states;
        params.visit_mut("", &mut |_, p| {
            if result.is_ok() {
                result = adam_step(p, grad_refs[idx], &mut states[idx], lr);
            }
            idx += 1;
        });
        result
    }

    pub fn steps_taken(&self) -> u64 {
        self.states.first().map_or(0, |s| s.step)
    }
}

/// `d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)`
pub fn noam_lr(step: u64, d_model: usize, warmup: u64) -> Result<f64> {
    if step == 0 {
        return Err(Error::InvalidArgument("noam schedule starts at step 1".into()));
    }
    if d_model == 0 || warmup == 0 {
        return Err(Error::InvalidArgument("d_model and warmup must be positive".into()));
    }
    let s = step as f64;
    let w = warmup as f64;
    Ok((d_model as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    Fixed { lr: f64 },
    Noam {
        d_model: usize,
        warmup: u64,
        #[serde(default = "one")]
        factor: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl LrSchedule {
    /// Learning rate for the 1-based optimizer step.
    pub fn lr(&self, step: u64) -> Result<f64> {
        match *self {
            LrSchedule::Fixed { lr } => Ok(lr),
            LrSchedule::Noam {
                d_model,
                warmup,
                factor,
            } => Ok(factor * noam_lr(step, d_model, warmup)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = Tensor::uniform(&[3, 2], -1.0, 1.0, &mut rng);
        let orig = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(&p);
        for k in 1..=20 {
            adam_step(&mut p, &g, &mut s, 0.1).unwrap();
            assert_eq!(s.step, k);
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = Tensor::vector(vec![0.0, 0.0, 0.0]).unwrap();
        let g = Tensor::vector(vec![3.0, -0.5, 1e-3]).unwrap();
        let mut s = AdamState::new(&p);
        s.eps = 1e-12;
        adam_step(&mut p, &g, &mut s, 0.01).unwrap();
        let expect = [-0.01, 0.01, -0.01];
        for (a, b) in p.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn deterministic_updates() {
        let p0 = Tensor::vector(vec![0.3, -0.2]).unwrap();
        let g = Tensor::vector(vec![0.1, 0.4]).unwrap();
        let run = || {
            let mut p = p0.clone();
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &g, &mut s, 0.05).unwrap();
            adam_step(&mut p, &g, &mut s, 0.05).unwrap();
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut p = Tensor::zeros(&[2]);
        let g = Tensor::zeros(&[3]);
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &g, &mut s, 0.1).is_err());
    }

    #[test]
    fn noam_values() {
        assert!(noam_lr(0, 512, 4000).is_err());
        let peak = noam_lr(4000, 512, 4000).unwrap();
        // 512^-0.5 * 4000^-0.5
        assert!((peak - 6.987712429686844e-4).abs() < 1e-15);
        let s = 4000f64;
        assert!((s.powf(-0.5) - s * s.powf(-1.5)).abs() < 1e-15 * s.powf(-0.5));
        let mut prev = 0.0;
        for step in 1..4000 {
            let lr = noam_lr(step, 512, 4000).unwrap();
            assert!(lr > prev);
            assert!(lr < peak);
            prev = lr;
        }
        assert!(noam_lr(4001, 512, 4000).unwrap() < peak);
    }
}

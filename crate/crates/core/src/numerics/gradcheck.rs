use super::Params;
use crate::error::{Error, Result};

/// A scalar function of a flat parameter vector with an analytic gradient.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, point: &[f64]) -> Result<f64>;
    fn value_and_grad(&self, point: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Closure-backed [`Objective`].
pub struct FnObjective<V, G> {
    dim: usize,
    value: V,
    grad: G,
}

impl<V, G> FnObjective<V, G>
where
    V: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    pub fn new(dim: usize, value: V, grad: G) -> Self {
        FnObjective { dim, value, grad }
    }
}

impl<V, G> Objective for FnObjective<V, G>
where
    V: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, point: &[f64]) -> Result<f64> {
        (self.value)(point)
    }

    fn value_and_grad(&self, point: &[f64]) -> Result<(f64, Vec<f64>)> {
        (self.grad)(point)
    }
}

/// Objective over the flattened tensors of a [`Params`] value.
///
/// `loss(params, grads)` returns the loss and, when `grads` is given,
/// accumulates the analytic gradient into it.
pub struct ParamObjective<P, F> {
    template: P,
    loss: F,
}

impl<P, F> ParamObjective<P, F>
where
    P: Params + Clone,
    F: Fn(&P, Option<&mut P>) -> Result<f64>,
{
    pub fn new(template: P, loss: F) -> Self {
        ParamObjective { template, loss }
    }

    /// The template's own parameter values, the natural check point.
    pub fn point(&self) -> Vec<f64> {
        self.template.flatten()
    }

    fn at(&self, point: &[f64]) -> Result<P> {
        let mut p = self.template.clone();
        p.assign(point)?;
        Ok(p)
    }
}

impl<P, F> Objective for ParamObjective<P, F>
where
    P: Params + Clone,
    F: Fn(&P, Option<&mut P>) -> Result<f64>,
{
    fn dim(&self) -> usize {
        self.template.num_params()
    }

    fn value(&self, point: &[f64]) -> Result<f64> {
        (self.loss)(&self.at(point)?, None)
    }

    fn value_and_grad(&self, point: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.at(point)?;
        let mut grads = p.clone();
        grads.zero();
        let value = (self.loss)(&p, Some(&mut grads))?;
        Ok((value, grads.flatten()))
    }
}

/// Denominator floor for the relative error. Coordinates whose derivative is
/// structurally zero (a key bias under softmax, say) still show central
/// difference round-off around 1e-10, so below this magnitude the error is
/// judged in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

/// Compares the analytic gradient with central differences
/// `(f(x+eps) - f(x-eps)) / 2eps` per coordinate and returns the largest
/// relative error `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn grad_check(objective: &dyn Objective, point: &[f64], epsilon: f64) -> Result<f64> {
    if point.len() != objective.dim() {
        return Err(Error::Shape(format!(
            "point has {} coordinates, objective expects {}",
            point.len(),
            objective.dim()
        )));
    }
    let (f0, analytic) = objective.value_and_grad(point)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite("loss at check point".into()));
    }
    if analytic.len() != point.len() {
        return Err(Error::Shape("analytic gradient has wrong length".into()));
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + epsilon;
        let plus = objective.value(&x)?;
        x[i] = orig - epsilon;
        let minus = objective.value(&x)?;
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("loss near coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}

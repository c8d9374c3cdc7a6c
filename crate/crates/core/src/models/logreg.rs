use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use crate::data::{FeatureMatrix, Label, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::numerics::ops::{axpy, matvec_acc};
use crate::numerics::{join, softmax_in_place, Params, Tensor};

pub const LOGREG_KIND: &str = "logreg";

/// Multinomial logistic regression `W x + b` over the four labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub w: Tensor,
    pub b: Tensor,
}

impl Params for LogisticRegression {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "w"), &self.w);
        f(join(prefix, "b"), &self.b);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "w"), &mut self.w);
        f(join(prefix, "b"), &mut self.b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrOptions {
    /// Weight of the `l2/2 * (||W||^2 + ||b||^2)` penalty.
    pub l2: f64,
    pub epochs: usize,
    /// Gradient-descent step; `None` picks `1/L` from a bound on the curvature.
    pub step: Option<f64>,
    /// Stop once the full gradient norm falls below this.
    pub tol: f64,
}

impl Default for LrOptions {
    fn default() -> Self {
        LrOptions {
            l2: 1e-2,
            epochs: 200_000,
            step: None,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrReport {
    pub losses: Vec<f64>,
    pub grad_norm: f64,
    pub epochs_run: usize,
    pub converged: bool,
    pub train_accuracy: f64,
}

impl LogisticRegression {
    pub fn zeros(dim: usize) -> Self {
        LogisticRegression {
            w: Tensor::zeros(&[NUM_CLASSES, dim]),
            b: Tensor::zeros(&[NUM_CLASSES]),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.cols()
    }

    pub fn lr_forward(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("expected {} features, got {}", self.dim(), x.len())));
        }
        let mut logits = [0.0; NUM_CLASSES];
        logits.copy_from_slice(self.b.data());
        matvec_acc(self.w.data(), x, &mut logits);
        Ok(logits)
    }

    pub fn predict(&self, x: &[f64]) -> Result<(Label, [f64; NUM_CLASSES])> {
        let mut probs = self.lr_forward(x)?;
        softmax_in_place(&mut probs);
        let mut best = 0;
        for k in 1..NUM_CLASSES {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        Ok((Label::from_index(best).expect("class index"), probs))
    }

    /// Mean cross-entropy plus the L2 penalty; writes the gradient into
    /// `grads` when given.
    pub fn objective(
        &self,
        x: &Tensor,
        labels: &[Label],
        l2: f64,
        mut grads: Option<&mut LogisticRegression>,
    ) -> Result<f64> {
        if x.rows() != labels.len() {
            return Err(Error::Alignment(format!(
                "{} feature rows but {} labels",
                x.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument("no training examples".into()));
        }
        let n = labels.len() as f64;
        if let Some(g) = grads.as_deref_mut() {
            g.zero();
        }
        let mut loss = 0.0;
        for (i, &gold) in labels.iter().enumerate() {
            let row = x.row(i);
            let mut p = self.lr_forward(row)?;
            let lse = crate::numerics::log_sum_exp(&p);
            loss += lse - p[gold.index()];
            if let Some(g) = grads.as_deref_mut() {
                softmax_in_place(&mut p);
                p[gold.index()] -= 1.0;
                for k in 0..NUM_CLASSES {
                    let coef = p[k] / n;
                    g.b.data_mut()[k] += coef;
                    axpy(coef, row, g.w.row_mut(k));
                }
            }
        }
        let penalty = 0.5 * l2 * (self.w.sum_sq() + self.b.sum_sq());
        if let Some(g) = grads {
            axpy(l2, self.w.data(), g.w.data_mut());
            axpy(l2, self.b.data(), g.b.data_mut());
        }
        Ok(loss / n + penalty)
    }

    pub fn to_checkpoint(&self, options: &LrOptions) -> Result<Checkpoint> {
        Ok(Checkpoint {
            kind: LOGREG_KIND.into(),
            config: serde_json::json!({ "dim": self.dim(), "options": options }),
            vocab: None,
            tensors: self.named_tensors().into_iter().map(|(n, t)| (n, t.clone())).collect(),
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.kind != LOGREG_KIND {
            return Err(Error::Checkpoint(format!("expected a {LOGREG_KIND} checkpoint, found {}", ckpt.kind)));
        }
        let dim = ckpt.config["dim"]
            .as_u64()
            .ok_or_else(|| Error::Checkpoint("logreg checkpoint lacks its dimension".into()))?;
        let mut model = LogisticRegression::zeros(dim as usize);
        ckpt.restore(&mut model)?;
        Ok(model)
    }
}

/// Full-batch gradient descent on the penalised cross-entropy, starting from zero.
pub fn lr_train(
    features: &FeatureMatrix,
    labels: &[Label],
    options: &LrOptions,
) -> Result<(LogisticRegression, LrReport)> {
    if features.len() != labels.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if !(options.l2 >= 0.0) || !(options.tol > 0.0) {
        return Err(Error::InvalidArgument("l2 must be non-negative and tol positive".into()));
    }
    let x = &features.values;
    let step = match options.step {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::InvalidArgument(format!("step must be positive, got {s}"))),
        None => {
            let max_sq = (0..x.rows())
                .map(|i| 1.0 + x.row(i).iter().map(|v| v * v).sum::<f64>())
                .fold(0.0, f64::max);
            1.0 / (0.5 * max_sq + options.l2)
        }
    };
    let mut model = LogisticRegression::zeros(features.dim());
    let mut grads = model.clone();
    let mut losses = Vec::new();
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    for _ in 0..options.epochs {
        let loss = model.objective(x, labels, options.l2, Some(&mut grads))?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch: losses.len() + 1,
                message: "logistic regression loss is not finite".into(),
            });
        }
        losses.push(loss);
        grad_norm = grads.grad_norm();
        if grad_norm < options.tol {
            converged = true;
            break;
        }
        axpy(-step, grads.w.data(), model.w.data_mut());
        axpy(-step, grads.b.data(), model.b.data_mut());
    }
    let correct = labels
        .iter()
        .enumerate()
        .filter(|(i, &l)| model.predict(x.row(*i)).map(|p| p.0 == l).unwrap_or(false))
        .count();
    let report = LrReport {
        epochs_run: losses.len(),
        losses,
        grad_norm,
        converged,
        train_accuracy: correct as f64 / labels.len() as f64,
    };
    Ok((model, report))
}

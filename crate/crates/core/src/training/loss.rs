use crate::data::{Label, NUM_CLASSES};
use crate::numerics::{log_sum_exp, softmax_in_place};

/// `-log softmax(logits)[gold]`
pub fn cross_entropy(logits: &[f64; NUM_CLASSES], gold: Label) -> f64 {
    log_sum_exp(logits) - logits[gold.index()]
}

/// Loss and its gradient `softmax(logits) - onehot(gold)`.
pub fn cross_entropy_with_grad(logits: &[f64; NUM_CLASSES], gold: Label) -> (f64, [f64; NUM_CLASSES]) {
    let loss = cross_entropy(logits, gold);
    let mut grad = *logits;
    softmax_in_place(&mut grad);
    grad[gold.index()] -= 1.0;
    (loss, grad)
}

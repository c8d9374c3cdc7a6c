//! Loss, the mini-batch training loop with early stopping, and voting
//! committees trained on independent shuffles.

mod committee;
mod loss;
mod trainer;

pub use committee::{train_committee, CommitteeMember};
pub use loss::{cross_entropy, cross_entropy_with_grad};
pub use trainer::{evaluate_encoded, train, EpochReport, TrainOptions, TrainReport};

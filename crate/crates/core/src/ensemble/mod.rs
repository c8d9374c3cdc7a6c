//! Hard majority voting over prediction files, for committees and for
//! ensembles of committees.

mod predictions;
mod vote;

pub use predictions::{load_predictions, parse_predictions, PredictionSet};
pub use vote::{final_ensemble, majority_vote, vote_committee};

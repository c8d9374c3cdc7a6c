use rayon::prelude::*;
use rayon::ThreadPoolBuilder;

use super::trainer::{train, TrainOptions, TrainReport};
use crate::data::{split_shuffle, Dialogue};
use crate::error::{Error, Result};
use crate::models::Classifier;

/// One committee member: the split seed that produced its train/validation
/// partition, and the trained model.
#[derive(Debug, Clone)]
pub struct CommitteeMember {
    pub split_seed: u64,
    pub model: Classifier,
    pub report: TrainReport,
}

/// Trains `k` models on `k` independent shuffles of `dataset`.
///
/// Member `i` uses seed `base_seed + i` for its split, its initialisation
/// (through `build`) and its training order. Members run on up to `jobs`
/// threads and come back in seed order.
pub fn train_committee<F>(
    dataset: &[Dialogue],
    k: usize,
    val_fraction: f64,
    base_seed: u64,
    jobs: usize,
    opts: &TrainOptions,
    build: F,
) -> Result<Vec<CommitteeMember>>
where
    F: Fn(u64) -> Result<Classifier> + Sync,
{
    if k < 1 {
        return Err(Error::InvalidArgument("committee needs at least one member".into()));
    }
    let member = |i: usize| -> Result<CommitteeMember> {
        let seed = base_seed + i as u64;
        let (train_set, val_set) = split_shuffle(dataset, seed, val_fraction)?;
        let opts = TrainOptions { seed, ..*opts };
        let (model, report) = train(build(seed)?, &train_set, &val_set, &opts)?;
        Ok(CommitteeMember {
            split_seed: seed,
            model,
            report,
        })
    };
    let pool = ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..k).into_par_iter().map(member).collect())
}

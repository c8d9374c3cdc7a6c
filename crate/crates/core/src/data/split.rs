use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Shuffles under `seed` and cuts off the last `val_fraction` as validation.
///
/// With two or more examples both sides are non-empty.
pub fn split_shuffle<T: Clone>(dataset: &[T], seed: u64, val_fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction must be in (0,1), got {val_fraction}"
        )));
    }
    let n = dataset.len();
    let mut n_val = (n as f64 * val_fraction).round() as usize;
    if n >= 2 {
        n_val = n_val.clamp(1, n - 1);
    } else {
        n_val = 0;
    }
    let perm = permutation(n, seed);
    let (train, val) = perm.split_at(n - n_val);
    Ok((
        train.iter().map(|&i| dataset[i].clone()).collect(),
        val.iter().map(|&i| dataset[i].clone()).collect(),
    ))
}

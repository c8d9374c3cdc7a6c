use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gp_fit, propose_next, Assignment, SearchSpace, DEFAULT_XI};
use crate::error::{Error, Result};

/// One evaluated point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Encoded coordinates in `[0, 1]^d`.
    pub x: Vec<f64>,
    pub config: Assignment,
    pub y: f64,
    /// Set when the objective errored; `y` is then 0.
    pub failed: bool,
    /// Best `y` over this and all earlier trials.
    pub f_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoOptions {
    pub n_iter: usize,
    pub n_init: usize,
    pub seed: u64,
    pub xi: f64,
    pub restarts: usize,
}

impl Default for BoOptions {
    fn default() -> Self {
        BoOptions {
            n_iter: 100,
            n_init: 5,
            seed: 0,
            xi: DEFAULT_XI,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoResult {
    pub best: Trial,
    pub history: Vec<Trial>,
}

impl BoResult {
    pub fn best_so_far(&self) -> Vec<f64> {
        self.history.iter().map(|t| t.f_best).collect()
    }
}

/// `n` points in `[0, 1]^dims`, one per stratum along every axis.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, dims: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(strata) {
            p[d] = (s as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    points
}

fn evaluate<F>(objective: &mut F, space: &SearchSpace, x: Vec<f64>, history: &mut Vec<Trial>) -> Result<()>
where
    F: FnMut(&Assignment) -> Result<f64>,
{
    let config = space.decode(&x)?;
    let (y, failed) = match objective(&config) {
        Ok(y) if y.is_finite() => (y, false),
        Ok(y) => {
            log::warn!("objective returned {y}; recording 0");
            (0.0, true)
        }
        Err(e) => {
            log::warn!("objective failed: {e}; recording 0");
            (0.0, true)
        }
    };
    let prev = history.last().map_or(f64::NEG_INFINITY, |t| t.f_best);
    history.push(Trial {
        x,
        config,
        y,
        failed,
        f_best: prev.max(y),
    });
    Ok(())
}

fn best_of(history: &[Trial]) -> Result<Trial> {
    let mut best: Option<&Trial> = None;
    for t in history {
        if best.is_none_or(|b| t.y > b.y) {
            best = Some(t);
        }
    }
    best.cloned()
        .ok_or_else(|| Error::InvalidArgument("no trials were evaluated".into()))
}

/// Maximises `objective` over `space`: a Latin-hypercube design, then
/// `n_iter` rounds of GP fit, EI proposal and evaluation.
pub fn bo_loop<F>(mut objective: F, space: &SearchSpace, opts: &BoOptions) -> Result<BoResult>
where
    F: FnMut(&Assignment) -> Result<f64>,
{
    space.validate()?;
    if opts.n_init == 0 {
        return Err(Error::InvalidArgument("n_init must be at least 1".into()));
    }
    if !(opts.xi >= 0.0) {
        return Err(Error::InvalidArgument(format!("xi must be non-negative, got {}", opts.xi)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut history = Vec::with_capacity(opts.n_init + opts.n_iter);
    for x in latin_hypercube(opts.n_init, space.len(), &mut rng) {
        evaluate(&mut objective, space, space.snap(&x), &mut history)?;
    }
    for _ in 0..opts.n_iter {
        let x = if history.len() < 2 {
            space.sample(&mut rng)
        } else {
            let xs: Vec<Vec<f64>> = history.iter().map(|t| t.x.clone()).collect();
            let ys: Vec<f64> = history.iter().map(|t| t.y).collect();
            let model = gp_fit(&xs, &ys, opts.restarts, &mut rng)?;
            propose_next(&model, space, opts.xi, &mut rng)?.0
        };
        evaluate(&mut objective, space, x, &mut history)?;
    }
    Ok(BoResult {
        best: best_of(&history)?,
        history,
    })
}

/// Uniform random search with the same bookkeeping, as a baseline.
pub fn random_search<F>(mut objective: F, space: &SearchSpace, n: usize, seed: u64) -> Result<BoResult>
where
    F: FnMut(&Assignment) -> Result<f64>,
{
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(n);
    for _ in 0..n {
        let x = space.sample(&mut rng);
        evaluate(&mut objective, space, x, &mut history)?;
    }
    Ok(BoResult {
        best: best_of(&history)?,
        history,
    })
}

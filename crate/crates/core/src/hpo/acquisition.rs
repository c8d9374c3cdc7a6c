use rand::Rng;

use super::{GpModel, SearchSpace};
use crate::error::{Error, Result};

/// Exploration offset used by default.
pub const DEFAULT_XI: f64 = 0.05;

pub const N_CANDIDATES: usize = 1000;
const N_REFINE: usize = 10;
const REFINE_ROUNDS: usize = 20;

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement over `f_best` for a maximised objective.
pub fn expected_improvement(mu: f64, sigma: f64, f_best: f64, xi: f64) -> Result<f64> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(Error::InvalidArgument(format!("standard deviation {sigma} is negative")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let delta = mu - f_best - xi;
    let z = delta / sigma;
    Ok((delta * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0))
}

fn score(model: &GpModel, x: &[f64], f_best: f64, xi: f64) -> Result<f64> {
    let (mu, var) = model.posterior(x)?;
    expected_improvement(mu, var.sqrt(), f_best, xi)
}

/// Coordinate search around `x`: continuous coordinates try shrinking steps,
/// grid coordinates try their neighbours.
fn refine(model: &GpModel, space: &SearchSpace, mut x: Vec<f64>, mut best: f64, f_best: f64, xi: f64) -> Result<(Vec<f64>, f64)> {
    let mut step = 0.1;
    for _ in 0..REFINE_ROUNDS {
        let mut moved = false;
        for (d, dim) in space.dims.iter().enumerate() {
            let delta = dim.dim.grid_step().unwrap_or(step);
            if delta == 0.0 {
                continue;
            }
            for sign in [-1.0, 1.0] {
                let mut cand = x.clone();
                cand[d] = dim.dim.snap(x[d] + sign * delta);
                if cand[d] == x[d] {
                    continue;
                }
                let s = score(model, &cand, f_best, xi)?;
                if s > best {
                    best = s;
                    x = cand;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((x, best))
}

/// Maximises EI over `space`: uniform candidates, then local refinement of
/// the best few. Returns the encoded point and its EI.
pub fn propose_next<R: Rng + ?Sized>(model: &GpModel, space: &SearchSpace, xi: f64, rng: &mut R) -> Result<(Vec<f64>, f64)> {
    if model.dim() != space.len() {
        return Err(Error::Shape(format!("model has {} inputs, space {}", model.dim(), space.len())));
    }
    let f_best = model.best_y();
    let mut scored = Vec::with_capacity(N_CANDIDATES);
    for i in 0..N_CANDIDATES {
        let x = space.sample(rng);
        let s = score(model, &x, f_best, xi)?;
        scored.push((s, i, x));
    }
    // Highest EI first, lowest index among equals.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for (s, i, x) in scored.into_iter().take(N_REFINE) {
        let (x, s) = refine(model, space, x, s, f_best, xi)?;
        let better = match &best {
            None => true,
            Some((bs, bi, _)) => s > *bs || (s == *bs && i < *bi),
        };
        if better {
            best = Some((s, i, x));
        }
    }
    let (s, _, x) = best.expect("at least one candidate");
    Ok((x, s))
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-exponential kernel hyper-parameters with one lengthscale per
/// input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub lengthscales: Vec<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyper {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::Shape(format!(
                "{} lengthscales for {dim}-dimensional inputs",
                self.lengthscales.len()
            )));
        }
        if self.lengthscales.iter().any(|l| !(*l > 0.0)) || !(self.signal_var > 0.0) {
            return Err(Error::InvalidArgument("lengthscales and signal variance must be positive".into()));
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::InvalidArgument("noise variance must be non-negative".into()));
        }
        Ok(())
    }

    /// `[log l_1 .. log l_D, log sf2, log sn2]`
    pub fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_var.ln());
        v.push(self.noise_var.ln());
        v
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        GpHyper {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_var: theta[d].exp(),
            noise_var: theta[d + 1].exp(),
        }
    }
}

/// `sf2 * exp(-1/2 sum_d (x_d - x'_d)^2 / l_d^2)`
pub fn kernel(x: &[f64], x2: &[f64], hyper: &GpHyper) -> Result<f64> {
    hyper.validate(x.len())?;
    if x2.len() != x.len() {
        return Err(Error::Shape("kernel inputs differ in length".into()));
    }
    Ok(kernel_unchecked(x, x2, hyper))
}

fn kernel_unchecked(x: &[f64], x2: &[f64], hyper: &GpHyper) -> f64 {
    let mut s = 0.0;
    for ((a, b), l) in x.iter().zip(x2).zip(&hyper.lengthscales) {
        let d = (a - b) / l;
        s += d * d;
    }
    hyper.signal_var * (-0.5 * s).exp()
}

/// Lower Cholesky factor of a row-major `n x n` matrix, or `None` if it is
/// not numerically positive definite.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L z = b` in place.
fn forward_sub(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `L^T z = b` in place.
fn backward_sub(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-2;

/// Factorises `K + sn2 I`, adding 1e-10, 1e-9, ... to the diagonal if needed.
fn factor(xs: &[Vec<f64>], hyper: &GpHyper) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = xs.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_unchecked(&xs[i], &xs[j], hyper);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let mut jitter = 0.0;
    loop {
        let mut a = k.clone();
        for i in 0..n {
            a[i * n + i] += hyper.noise_var + jitter;
        }
        if let Some(l) = cholesky(&a, n) {
            return Ok((k, l, jitter));
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX {
            return Err(Error::Numerical("kernel matrix is not positive definite".into()));
        }
    }
}

/// Log marginal likelihood of mean-centred targets and its gradient with
/// respect to [`GpHyper::to_log`] coordinates.
pub fn log_marginal_likelihood(xs: &[Vec<f64>], y: &[f64], hyper: &GpHyper) -> Result<(f64, Vec<f64>)> {
    let n = xs.len();
    let dim = xs.first().map_or(0, |x| x.len());
    hyper.validate(dim)?;
    if y.len() != n || n == 0 {
        return Err(Error::Shape(format!("{n} inputs but {} targets", y.len())));
    }
    let (k, l, jitter) = factor(xs, hyper)?;
    let mut alpha = y.to_vec();
    forward_sub(&l, n, &mut alpha);
    backward_sub(&l, n, &mut alpha);
    let log_det: f64 = (0..n).map(|i| 2.0 * l[i * n + i].ln()).sum();
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let lml = -0.5 * fit - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = alpha alpha^T - (K + sn2 I)^-1, column by column.
    let mut kinv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        forward_sub(&l, n, &mut e);
        backward_sub(&l, n, &mut e);
        for i in 0..n {
            kinv[i * n + j] = e[i];
        }
    }
    let w = |i: usize, j: usize| alpha[i] * alpha[j] - kinv[i * n + j];
    let mut grad = vec![0.0; dim + 2];
    for i in 0..n {
        for j in 0..n {
            let wij = w(i, j);
            let kij = k[i * n + j];
            for (d, g) in grad[..dim].iter_mut().enumerate() {
                let diff = (xs[i][d] - xs[j][d]) / hyper.lengthscales[d];
                *g += 0.5 * wij * kij * diff * diff;
            }
            grad[dim] += 0.5 * wij * kij;
        }
        grad[dim + 1] += 0.5 * w(i, i) * (hyper.noise_var + jitter);
    }
    // The jitter is not a hyper-parameter; only the sn2 share counts.
    if jitter > 0.0 {
        let share = hyper.noise_var / (hyper.noise_var + jitter);
        grad[dim + 1] *= share;
    }
    Ok((lml, grad))
}

/// Fitted Gaussian-process regressor.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub hyper: GpHyper,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    mean: f64,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    pub jitter: f64,
}

impl GpModel {
    /// Conditions on `(xs, ys)` with fixed hyper-parameters.
    pub fn with_hyper(xs: &[Vec<f64>], ys: &[f64], hyper: GpHyper) -> Result<Self> {
        let n = xs.len();
        if n == 0 || ys.len() != n {
            return Err(Error::Shape(format!("{n} inputs but {} targets", ys.len())));
        }
        let dim = xs[0].len();
        if xs.iter().any(|x| x.len() != dim) {
            return Err(Error::Shape("inputs differ in dimension".into()));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("gp targets".into()));
        }
        hyper.validate(dim)?;
        let mean = ys.iter().sum::<f64>() / n as f64;
        let (_, chol, jitter) = factor(xs, &hyper)?;
        let mut alpha: Vec<f64> = ys.iter().map(|y| y - mean).collect();
        forward_sub(&chol, n, &mut alpha);
        backward_sub(&chol, n, &mut alpha);
        Ok(GpModel {
            hyper,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            mean,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn best_y(&self) -> f64 {
        self.ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Posterior mean and variance (clamped at zero) at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!("query has {} coordinates, model {}", x.len(), self.dim())));
        }
        let n = self.len();
        let mut ks: Vec<f64> = self.xs.iter().map(|xi| kernel_unchecked(xi, x, &self.hyper)).collect();
        let mu = self.mean + ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        forward_sub(&self.chol, n, &mut ks);
        let var = self.hyper.signal_var - ks.iter().map(|v| v * v).sum::<f64>();
        Ok((mu, var.max(0.0)))
    }
}

/// Bounds on log hyper-parameters for inputs in the unit cube, relative to
/// the target variance `v`.
fn log_bounds(dim: usize, v: f64) -> Vec<(f64, f64)> {
    let mut b = vec![(0.01f64.ln(), 10f64.ln()); dim];
    b.push(((v * 1e-2).ln(), (v * 1e2).ln()));
    b.push(((v * 1e-10).max(1e-14).ln(), v.ln()));
    b
}

fn clamp_to(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, (lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(*lo, *hi);
    }
}

/// Hyper-parameters used when the targets carry no information.
pub fn fallback_hyper(dim: usize) -> GpHyper {
    GpHyper {
        lengthscales: vec![0.5; dim],
        signal_var: 1.0,
        noise_var: 1e-6,
    }
}

const ASCENT_ITERS: usize = 200;

/// Sign-based gradient ascent with per-coordinate steps (Rprop), projected
/// onto `bounds`. Returns the best point visited.
fn ascend(xs: &[Vec<f64>], y: &[f64], mut theta: Vec<f64>, bounds: &[(f64, f64)]) -> Option<(f64, Vec<f64>)> {
    clamp_to(&mut theta, bounds);
    let (mut value, mut grad) = log_marginal_likelihood(xs, y, &GpHyper::from_log(&theta)).ok()?;
    let mut best = (value, theta.clone());
    let mut steps = vec![0.1f64; theta.len()];
    let mut prev = vec![0.0; theta.len()];
    for _ in 0..ASCENT_ITERS {
        for i in 0..theta.len() {
            let g = grad[i];
            if g * prev[i] > 0.0 {
                steps[i] = (steps[i] * 1.2).min(1.0);
            } else if g * prev[i] < 0.0 {
                steps[i] *= 0.5;
            }
            theta[i] += steps[i] * g.signum();
            prev[i] = g;
        }
        clamp_to(&mut theta, bounds);
        match log_marginal_likelihood(xs, y, &GpHyper::from_log(&theta)) {
            Ok((v, g)) => {
                value = v;
                grad = g;
            }
            Err(_) => break,
        }
        if value > best.0 {
            best = (value, theta.clone());
        }
        if steps.iter().all(|s| *s < 1e-6) {
            break;
        }
    }
    Some(best)
}

/// Maximises the log marginal likelihood over the kernel hyper-parameters
/// from one default and `restarts` random starting points; best value wins.
pub fn gp_fit<R: Rng + ?Sized>(xs: &[Vec<f64>], ys: &[f64], restarts: usize, rng: &mut R) -> Result<GpModel> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("gp_fit needs at least two trials".into()));
    }
    if ys.len() != xs.len() {
        return Err(Error::Shape(format!("{} inputs but {} targets", xs.len(), ys.len())));
    }
    let dim = xs[0].len();
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    if !(var > 1e-14) {
        return GpModel::with_hyper(xs, ys, fallback_hyper(dim));
    }
    let centred: Vec<f64> = ys.iter().map(|y| y - mean).collect();
    let bounds = log_bounds(dim, var);
    let mut starts = vec![{
        let mut t = vec![0.3f64.ln(); dim];
        t.push(var.ln());
        t.push((var * 1e-4).ln());
        t
    }];
    for _ in 0..restarts {
        starts.push(bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect());
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        if let Some((v, theta)) = ascend(xs, &centred, start, &bounds) {
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, theta));
            }
        }
    }
    let (_, theta) = best.ok_or_else(|| Error::Numerical("no restart produced a valid fit".into()))?;
    GpModel::with_hyper(xs, ys, GpHyper::from_log(&theta))
}

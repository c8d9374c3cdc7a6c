use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::ops::{axpy, dot, matvec_acc, matvec_t_acc};
use crate::numerics::{join, sigmoid, Params, Tensor};

/// Single-layer LSTM. Gate blocks are stacked in the order input, forget,
/// output, candidate: `w` is `[4h x d]`, `u` is `[4h x h]`, `b` is `[4h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

/// Activations kept from the forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Tensor,
    mask: Vec<bool>,
    /// Post-nonlinearity gates per step, `[T x 4h]`.
    gates: Vec<f64>,
    /// Cell and hidden state after each step, `[T x h]`.
    c: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmOutput {
    /// Hidden state after every step; masked steps repeat the previous state.
    pub hidden: Tensor,
    pub h_last: Vec<f64>,
    pub c_last: Vec<f64>,
}

impl Lstm {
    /// Uniform(-1/sqrt(h), 1/sqrt(h)) weights; forget-gate bias 1, other biases 0.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        Lstm {
            w: Tensor::uniform(&[4 * hidden, input], -bound, bound, rng),
            u: Tensor::uniform(&[4 * hidden, hidden], -bound, bound, rng),
            b,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Lstm {
            w: Tensor::zeros(&[4 * hidden, input]),
            u: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.u.cols()
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    /// Runs from a zero initial state. `mask[t] == false` steps carry the
    /// state through unchanged.
    pub fn forward(&self, x: &Tensor, mask: &[bool]) -> Result<(LstmOutput, LstmCache)> {
        let h = self.hidden_size();
        let steps = x.rows();
        if x.cols() != self.input_size() || mask.len() != steps {
            return Err(Error::Shape(format!(
                "lstm expects [T x {}] input with T mask entries, got {:?} and {} entries",
                self.input_size(),
                x.shape(),
                mask.len()
            )));
        }
        let mut gates = vec![0.0; steps * 4 * h];
        for t in (0..steps).filter(|&t| mask[t]) {
            gates[t * 4 * h..(t + 1) * 4 * h].copy_from_slice(self.b.data());
        }
        project_rows(self.w.data(), x.data(), x.cols(), mask, &mut gates);
        let mut cs = vec![0.0; steps * h];
        let mut hs = vec![0.0; steps * h];
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for t in 0..steps {
            let (c_t, h_t) = (t * h, t * h);
            if !mask[t] {
                cs[c_t..c_t + h].copy_from_slice(&c_prev);
                hs[h_t..h_t + h].copy_from_slice(&h_prev);
                continue;
            }
            let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            matvec_acc(self.u.data(), &h_prev, g);
            for v in &mut g[..3 * h] {
                *v = sigmoid(*v);
            }
            for v in &mut g[3 * h..] {
                *v = v.tanh();
            }
            for j in 0..h {
                let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let c = f * c_prev[j] + i * cand;
                c_prev[j] = c;
                h_prev[j] = o * c.tanh();
            }
            cs[c_t..c_t + h].copy_from_slice(&c_prev);
            hs[h_t..h_t + h].copy_from_slice(&h_prev);
        }
        let output = LstmOutput {
            hidden: Tensor::new(vec![steps, h], hs.clone())?,
            h_last: h_prev,
            c_last: c_prev,
        };
        let cache = LstmCache {
            x: x.clone(),
            mask: mask.to_vec(),
            gates,
            c: cs,
            h: hs,
        };
        Ok((output, cache))
    }

    /// Backpropagation through time. `d_hidden` is the gradient on every
    /// step's output; `d_h_last`/`d_c_last` on the final state. Returns the
    /// gradient on the input sequence.
    pub fn backward(
        &self,
        cache: &LstmCache,
        d_hidden: &Tensor,
        d_h_last: &[f64],
        d_c_last: &[f64],
        grads: &mut Lstm,
    ) -> Tensor {
        let h = self.hidden_size();
        let steps = cache.x.rows();
        let mut dx = cache.x.zeros_like();
        let mut dh_next = d_h_last.to_vec();
        let mut dc_next = d_c_last.to_vec();
        let zeros = vec![0.0; h];
        let mut da = vec![0.0; steps * 4 * h];
        for t in (0..steps).rev() {
            for (d, g) in dh_next.iter_mut().zip(d_hidden.row(t)) {
                *d += g;
            }
            if !cache.mask[t] {
                continue;
            }
            let c_prev = if t == 0 { &zeros[..] } else { &cache.c[(t - 1) * h..t * h] };
            let c = &cache.c[t * h..(t + 1) * h];
            let g = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            let da_t = &mut da[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = c[j].tanh();
                let dh = dh_next[j];
                let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                da_t[j] = dc * cand * i * (1.0 - i);
                da_t[h + j] = dc * c_prev[j] * f * (1.0 - f);
                da_t[2 * h + j] = dh * tc * o * (1.0 - o);
                da_t[3 * h + j] = dc * i * (1.0 - cand * cand);
                dc_next[j] = dc * f;
            }
            dh_next.fill(0.0);
            matvec_t_acc(self.u.data(), da_t, &mut dh_next);
        }
        // Previous hidden state per step; zero before the first.
        let mut h_prev = vec![0.0; steps * h];
        if steps > 1 {
            h_prev[h..].copy_from_slice(&cache.h[..(steps - 1) * h]);
        }
        for da_t in da.chunks_exact(4 * h) {
            for (gb, d) in grads.b.data_mut().iter_mut().zip(da_t) {
                *gb += d;
            }
        }
        outer_rows(grads.w.data_mut(), &da, cache.x.data(), cache.x.cols(), &cache.mask);
        outer_rows(grads.u.data_mut(), &da, &h_prev, h, &cache.mask);
        back_project(self.w.data(), &da, dx.data_mut(), cache.x.cols(), &cache.mask);
        dx
    }
}

/// `out[t] += W x[t]` for every active step; `x` is `[T x d]`, `out` is
/// `[T x rows(W)]`. Walks `W` once, row by row.
fn project_rows(w: &[f64], x: &[f64], d: usize, active: &[bool], out: &mut [f64]) {
    let rows = w.len() / d;
    for (r, w_r) in w.chunks_exact(d).enumerate() {
        for (t, x_t) in x.chunks_exact(d).enumerate() {
            if active[t] {
                out[t * rows + r] += dot(w_r, x_t);
            }
        }
    }
}

/// `G += sum_t a[t] b[t]^T` over active steps, one row of `G` at a time.
fn outer_rows(g: &mut [f64], a: &[f64], b: &[f64], d: usize, active: &[bool]) {
    let rows = g.len() / d;
    for (r, g_r) in g.chunks_exact_mut(d).enumerate() {
        for (t, b_t) in b.chunks_exact(d).enumerate() {
            let coef = a[t * rows + r];
            if active[t] && coef != 0.0 {
                axpy(coef, b_t, g_r);
            }
        }
    }
}

/// `dx[t] += W^T a[t]` over active steps, walking `W` once.
fn back_project(w: &[f64], a: &[f64], dx: &mut [f64], d: usize, active: &[bool]) {
    let rows = w.len() / d;
    for (r, w_r) in w.chunks_exact(d).enumerate() {
        for (t, dx_t) in dx.chunks_exact_mut(d).enumerate() {
            let coef = a[t * rows + r];
            if active[t] && coef != 0.0 {
                axpy(coef, w_r, dx_t);
            }
        }
    }
}

impl Params for Lstm {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "w"), &self.w);
        f(join(prefix, "u"), &self.u);
        f(join(prefix, "b"), &self.b);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "w"), &mut self.w);
        f(join(prefix, "u"), &mut self.u);
        f(join(prefix, "b"), &mut self.b);
    }
}

fn reverse_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    let n = x.rows();
    for t in 0..n {
        out.row_mut(t).copy_from_slice(x.row(n - 1 - t));
    }
    out
}

/// LSTM sequence encoder with an optional right-to-left twin.
///
/// With the twin, per-step outputs and the final state are the
/// concatenation `[forward, backward]`; the backward final state is the one
/// reached after reading the first position.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmEncoder {
    pub forward: Lstm,
    pub backward: Option<Lstm>,
}

#[derive(Debug, Clone)]
pub struct LstmEncoderCache {
    forward: LstmCache,
    backward: Option<LstmCache>,
}

impl LstmEncoder {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, bidirectional: bool, rng: &mut R) -> Self {
        let forward = Lstm::new(input, hidden, rng);
        let backward = bidirectional.then(|| Lstm::new(input, hidden, rng));
        LstmEncoder { forward, backward }
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden_size() * if self.backward.is_some() { 2 } else { 1 }
    }

    pub fn forward(&self, x: &Tensor, mask: &[bool]) -> Result<(Tensor, Vec<f64>, LstmEncoderCache)> {
        let (fwd, fcache) = self.forward.forward(x, mask)?;
        let Some(bwd_lstm) = &self.backward else {
            return Ok((fwd.hidden, fwd.h_last, LstmEncoderCache { forward: fcache, backward: None }));
        };
        let rev_mask: Vec<bool> = mask.iter().rev().copied().collect();
        let (bwd, bcache) = bwd_lstm.forward(&reverse_rows(x), &rev_mask)?;
        let h = self.forward.hidden_size();
        let steps = x.rows();
        let mut out = Tensor::zeros(&[steps, 2 * h]);
        for t in 0..steps {
            let row = out.row_mut(t);
            row[..h].copy_from_slice(fwd.hidden.row(t));
            row[h..].copy_from_slice(bwd.hidden.row(steps - 1 - t));
        }
        let mut last = fwd.h_last;
        last.extend_from_slice(&bwd.h_last);
        Ok((
            out,
            last,
            LstmEncoderCache {
                forward: fcache,
                backward: Some(bcache),
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &LstmEncoderCache,
        d_out: &Tensor,
        d_last: &[f64],
        grads: &mut LstmEncoder,
    ) -> Tensor {
        let h = self.forward.hidden_size();
        let zeros = vec![0.0; h];
        match (&self.backward, &cache.backward, &mut grads.backward) {
            (Some(bwd), Some(bcache), Some(bgrads)) => {
                let steps = d_out.rows();
                let mut df = Tensor::zeros(&[steps, h]);
                let mut db = Tensor::zeros(&[steps, h]);
                for t in 0..steps {
                    df.row_mut(t).copy_from_slice(&d_out.row(t)[..h]);
                    db.row_mut(steps - 1 - t).copy_from_slice(&d_out.row(t)[h..]);
                }
                let mut dx = self.forward.backward(&cache.forward, &df, &d_last[..h], &zeros, &mut grads.forward);
                let dx_rev = bwd.backward(bcache, &db, &d_last[h..], &zeros, bgrads);
                for t in 0..steps {
                    for (a, b) in dx.row_mut(t).iter_mut().zip(dx_rev.row(steps - 1 - t)) {
                        *a += b;
                    }
                }
                dx
            }
            _ => self.forward.backward(&cache.forward, d_out, d_last, &zeros, &mut grads.forward),
        }
    }
}

impl Params for LstmEncoder {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.forward.visit(&join(prefix, "fwd"), f);
        self.backward.visit(&join(prefix, "bwd"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.forward.visit_mut(&join(prefix, "fwd"), f);
        self.backward.visit_mut(&join(prefix, "bwd"), f);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::ops::dot;
use crate::numerics::{grad_check, sigmoid, softmax_in_place, ParamObjective, Params, Tensor};
use crate::Result;

const EPS: f64 = 1e-5;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_mask(steps: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut mask: Vec<bool> = (0..steps).map(|_| rng.gen_bool(0.8)).collect();
    let keep = rng.gen_range(0..steps);
    mask[keep] = true;
    mask
}

fn check<P, F>(template: P, loss: F) -> f64
where
    P: Params + Clone,
    F: Fn(&P, Option<&mut P>) -> Result<f64>,
{
    let obj = ParamObjective::new(template, loss);
    let point = obj.point();
    grad_check(&obj, &point, EPS).unwrap()
}

#[test]
fn embed_gathers_rows() {
    let mut r = rng(0);
    let mut table = Tensor::uniform(&[6, 3], -1.0, 1.0, &mut r);
    table.row_mut(0).fill(0.0);
    let ids = [0, 4, 2, 4];
    let e = embed(&ids, &table).unwrap();
    assert_eq!(e.row(0), &[0.0; 3]);
    for (t, &id) in ids.iter().enumerate() {
        assert_eq!(e.row(t), table.row(id));
    }
    assert!(embed(&[6], &table).is_err());
    let mut g = table.zeros_like();
    embed_backward(&ids, &e, &mut g);
    assert_eq!(g.row(4), &table.row(4).iter().map(|v| 2.0 * v).collect::<Vec<_>>()[..]);
    assert_eq!(g.row(2), table.row(2));
}

#[test]
fn lstm_zero_params_give_zero_output() {
    let lstm = Lstm::zeros(3, 4);
    let x = Tensor::zeros(&[5, 3]);
    let (out, _) = lstm.forward(&x, &[true; 5]).unwrap();
    assert!(out.hidden.data().iter().all(|&v| v == 0.0));
}

#[test]
fn lstm_single_step_matches_scalar_oracle() {
    let mut r = rng(1);
    let (d, h) = (3, 2);
    let lstm = Lstm::new(d, h, &mut r);
    let x = Tensor::uniform(&[1, d], -1.0, 1.0, &mut r);
    let (out, _) = lstm.forward(&x, &[true]).unwrap();
    let pre = |row: usize| {
        let mut s = lstm.b.data()[row];
        for k in 0..d {
            s += lstm.w.get2(row, k) * x.data()[k];
        }
        s
    };
    for j in 0..h {
        let i = sigmoid(pre(j));
        let o = sigmoid(pre(2 * h + j));
        let g = pre(3 * h + j).tanh();
        let c = i * g;
        assert!((out.c_last[j] - c).abs() < 1e-14);
        assert!((out.h_last[j] - o * c.tanh()).abs() < 1e-14);
    }
}

#[test]
fn lstm_masking() {
    let mut r = rng(2);
    let lstm = Lstm::new(3, 4, &mut r);
    let x = Tensor::uniform(&[4, 3], -1.0, 1.0, &mut r);
    let (out, _) = lstm.forward(&x, &[false; 4]).unwrap();
    assert!(out.h_last.iter().chain(&out.c_last).all(|&v| v == 0.0));

    let (short, _) = lstm.forward(&x, &[true; 4]).unwrap();
    let mut padded = Tensor::zeros(&[7, 3]);
    for t in 0..4 {
        padded.row_mut(t).copy_from_slice(x.row(t));
    }
    let mask = [true, true, true, true, false, false, false];
    let (long, _) = lstm.forward(&padded, &mask).unwrap();
    assert_eq!(short.h_last, long.h_last);
    assert_eq!(short.c_last, long.c_last);
    assert!(lstm.forward(&x, &[true; 3]).is_err());
}

#[test]
fn lstm_forget_bias_is_one() {
    let lstm = Lstm::new(2, 3, &mut rng(0));
    assert_eq!(&lstm.b.data()[3..6], &[1.0; 3]);
    assert!(lstm.b.data()[..3].iter().chain(&lstm.b.data()[6..]).all(|&v| v == 0.0));
}

#[test]
fn lstm_gradients() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let (steps, d, h) = (r.gen_range(1..=6), r.gen_range(1..=5), r.gen_range(1..=5));
        let lstm = Lstm::new(d, h, &mut r);
        let x = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let mask = random_mask(steps, &mut r);
        let proj = Tensor::uniform(&[steps, h], -1.0, 1.0, &mut r);
        let proj_h: Vec<f64> = (0..h).map(|_| r.gen_range(-1.0..1.0)).collect();
        let proj_c: Vec<f64> = (0..h).map(|_| r.gen_range(-1.0..1.0)).collect();
        let err = check((lstm, x), |(l, x), grads| {
            let (out, cache) = l.forward(x, &mask)?;
            let loss = dot(out.hidden.data(), proj.data()) + dot(&out.h_last, &proj_h) + dot(&out.c_last, &proj_c);
            if let Some((gl, gx)) = grads {
                let dx = l.backward(&cache, &proj, &proj_h, &proj_c, gl);
                *gx = dx;
            }
            Ok(loss)
        });
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn bidirectional_encoder_gradients_and_masking() {
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let (steps, d, h) = (r.gen_range(1..=5), r.gen_range(1..=4), r.gen_range(1..=4));
        let enc = LstmEncoder::new(d, h, true, &mut r);
        assert_eq!(enc.output_dim(), 2 * h);
        let x = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let mask = random_mask(steps, &mut r);
        let proj = Tensor::uniform(&[steps, 2 * h], -1.0, 1.0, &mut r);
        let proj_last: Vec<f64> = (0..2 * h).map(|_| r.gen_range(-1.0..1.0)).collect();
        let err = check((enc, x), |(e, x), grads| {
            let (out, last, cache) = e.forward(x, &mask)?;
            let loss = dot(out.data(), proj.data()) + dot(&last, &proj_last);
            if let Some((ge, gx)) = grads {
                *gx = e.backward(&cache, &proj, &proj_last, ge);
            }
            Ok(loss)
        });
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
    let mut r = rng(5);
    let enc = LstmEncoder::new(2, 3, true, &mut r);
    let x = Tensor::uniform(&[3, 2], -1.0, 1.0, &mut r);
    let mut padded = Tensor::zeros(&[5, 2]);
    for t in 0..3 {
        padded.row_mut(t).copy_from_slice(x.row(t));
    }
    let (_, a, _) = enc.forward(&x, &[true; 3]).unwrap();
    let (_, b, _) = enc.forward(&padded, &[true, true, true, false, false]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn attention_pool_examples() {
    let mut r = rng(3);
    let pool = AttentionPool::new(4, &mut r);
    let h = Tensor::uniform(&[1, 4], -1.0, 1.0, &mut r);
    let (s, cache) = pool.forward(&h, &[true]).unwrap();
    assert_eq!(cache.weights(), &[1.0]);
    assert_eq!(&s[..], h.row(0));

    let row: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
    let same = Tensor::from_rows(&[row.clone(), row.clone(), row.clone()]).unwrap();
    let (s, _) = pool.forward(&same, &[true; 3]).unwrap();
    for (a, b) in s.iter().zip(&row) {
        assert!((a - b).abs() < 1e-15);
    }

    for seed in 0..50 {
        let mut r = rng(seed);
        let steps = r.gen_range(1..10);
        let h = Tensor::uniform(&[steps, 4], -3.0, 3.0, &mut r);
        let mask = random_mask(steps, &mut r);
        let (_, cache) = pool.forward(&h, &mask).unwrap();
        let total: f64 = cache.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for (w, m) in cache.weights().iter().zip(&mask) {
            assert!(if *m { *w > 0.0 } else { *w == 0.0 });
        }
    }
    assert!(pool.forward(&same, &[false; 3]).is_err());
}

#[test]
fn attention_pool_ignores_appended_padding() {
    let mut r = rng(4);
    let pool = AttentionPool::new(3, &mut r);
    let h = Tensor::uniform(&[4, 3], -1.0, 1.0, &mut r);
    let mut padded = Tensor::uniform(&[6, 3], -1.0, 1.0, &mut r);
    for t in 0..4 {
        padded.row_mut(t).copy_from_slice(h.row(t));
    }
    let (a, _) = pool.forward(&h, &[true; 4]).unwrap();
    let (b, _) = pool.forward(&padded, &[true, true, true, true, false, false]).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn attention_pool_gradients() {
    for seed in 0..20 {
        let mut r = rng(200 + seed);
        let (steps, d) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let pool = AttentionPool::new(d, &mut r);
        let h = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let mask = random_mask(steps, &mut r);
        let proj: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let err = check((pool, h), |(p, h), grads| {
            let (s, cache) = p.forward(h, &mask)?;
            if let Some((gp, gh)) = grads {
                *gh = p.backward(&cache, &proj, gp);
            }
            Ok(dot(&s, &proj))
        });
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

/// Direct per-position evaluation of multi-head attention.
fn naive_attention(mha: &MultiHeadAttention, x: &Tensor, mask: &[bool]) -> Tensor {
    let (steps, d) = (x.rows(), x.cols());
    let dh = mha.head_dim();
    let project = |lin: &Linear, row: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|o| lin.b.data()[o] + (0..d).map(|k| lin.w.get2(o, k) * row[k]).sum::<f64>())
            .collect()
    };
    let q: Vec<Vec<f64>> = (0..steps).map(|t| project(&mha.query, x.row(t))).collect();
    let k: Vec<Vec<f64>> = (0..steps).map(|t| project(&mha.key, x.row(t))).collect();
    let v: Vec<Vec<f64>> = (0..steps).map(|t| project(&mha.value, x.row(t))).collect();
    let mut out = Tensor::zeros(&[steps, d]);
    for i in 0..steps {
        let mut ctx = vec![0.0; d];
        for head in 0..mha.n_heads {
            let cols = head * dh..(head + 1) * dh;
            let keys: Vec<usize> = (0..steps).filter(|&j| mask[j]).collect();
            let mut scores: Vec<f64> = keys
                .iter()
                .map(|&j| cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            softmax_in_place(&mut scores);
            for (w, &j) in scores.iter().zip(&keys) {
                for c in cols.clone() {
                    ctx[c] += w * v[j][c];
                }
            }
        }
        out.row_mut(i).copy_from_slice(&project(&mha.output, &ctx));
    }
    out
}

#[test]
fn attention_matches_naive_oracle() {
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let heads = r.gen_range(1..=3);
        let d = heads * r.gen_range(1..=3);
        let steps = r.gen_range(1..=7);
        let mha = MultiHeadAttention::new(d, heads, &mut r).unwrap();
        let x = Tensor::uniform(&[steps, d], -2.0, 2.0, &mut r);
        let mask = random_mask(steps, &mut r);
        let (y, _) = mha.forward(&x, &mask).unwrap();
        assert!(y.max_abs_diff(&naive_attention(&mha, &x, &mask)) < 1e-10);
    }
}

#[test]
fn attention_examples() {
    let mut r = rng(6);
    let mha = MultiHeadAttention::new(4, 2, &mut r).unwrap();
    let x = Tensor::uniform(&[1, 4], -1.0, 1.0, &mut r);
    let (y, _) = mha.forward(&x, &[true]).unwrap();
    let v = mha.value.forward(&x).unwrap();
    let expect = mha.output.forward(&v).unwrap();
    assert!(y.max_abs_diff(&expect) < 1e-15);

    let x = Tensor::uniform(&[4, 4], -1.0, 1.0, &mut r);
    let mask = [true, false, true, false];
    let (_, cache) = mha.forward(&x, &mask).unwrap();
    for head in 0..2 {
        for i in 0..4 {
            let w = cache.weights(head, i);
            assert_eq!((w[1], w[3]), (0.0, 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
    assert!(MultiHeadAttention::new(6, 4, &mut r).is_err());
    assert!(mha.forward(&x, &[false; 4]).is_err());
}

#[test]
fn attention_gradients() {
    for seed in 0..20 {
        let mut r = rng(400 + seed);
        let heads = r.gen_range(1..=2);
        let d = heads * r.gen_range(1..=4);
        let steps = r.gen_range(1..=6);
        let mha = MultiHeadAttention::new(d, heads, &mut r).unwrap();
        let x = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let mask = random_mask(steps, &mut r);
        let proj = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let err = check((mha, x), |(m, x), grads| {
            let (y, cache) = m.forward(x, &mask)?;
            if let Some((gm, gx)) = grads {
                *gx = m.backward(&cache, &proj, gm);
            }
            Ok(dot(y.data(), proj.data()))
        });
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn layer_norm_and_ffn_gradients() {
    for seed in 0..10 {
        let mut r = rng(500 + seed);
        let (steps, d) = (r.gen_range(1..=5), r.gen_range(2..=6));
        let mut ln = LayerNorm::new(d);
        ln.gamma = Tensor::uniform(&[d], 0.5, 1.5, &mut r);
        ln.beta = Tensor::uniform(&[d], -0.5, 0.5, &mut r);
        let x = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let proj = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let err = check((ln, x.clone()), |(l, x), grads| {
            let (y, cache) = l.forward(x);
            if let Some((gl, gx)) = grads {
                *gx = l.backward(&cache, &proj, gl);
            }
            Ok(dot(y.data(), proj.data()))
        });
        assert!(err < 1e-5, "layer norm seed {seed}: {err}");

        let ffn = FeedForward::new(d, r.gen_range(1..=6), &mut r);
        let err = check((ffn, x), |(f, x), grads| {
            let (y, cache) = f.forward(x)?;
            if let Some((gf, gx)) = grads {
                *gx = f.backward(&cache, &proj, gf);
            }
            Ok(dot(y.data(), proj.data()))
        });
        assert!(err < 1e-5, "ffn seed {seed}: {err}");
    }
}

#[test]
fn single_hop_equals_explicit_layer() {
    let mut r = rng(7);
    let (steps, d) = (5, 6);
    let ut = UniversalTransformer::new(d, 2, 5, 1, &mut r).unwrap();
    let x = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
    let mask = [true, true, false, true, true];
    let (y, _) = ut.forward(&x, &mask).unwrap();

    let input = x.add(&timing_signal(steps, d, 1)).unwrap();
    let (a, _) = ut.attention.forward(&input, &mask).unwrap();
    let (mid, _) = ut.norm1.forward(&input.add(&a).unwrap());
    let (f, _) = ut.ffn.forward(&mid).unwrap();
    let (expect, _) = ut.norm2.forward(&mid.add(&f).unwrap());
    assert!(y.max_abs_diff(&expect) < 1e-12);
    assert_eq!(y.shape(), x.shape());
}

#[test]
fn hops_share_weights() {
    let mut r = rng(8);
    let one = UniversalTransformer::new(8, 4, 6, 1, &mut r).unwrap();
    let mut three = one.clone();
    three.hops = 3;
    assert_eq!(one.num_params(), three.num_params());
    let x = Tensor::uniform(&[4, 8], -1.0, 1.0, &mut r);
    let (y1, _) = one.forward(&x, &[true; 4]).unwrap();
    let (y3, _) = three.forward(&x, &[true; 4]).unwrap();
    assert_eq!(y3.shape(), x.shape());
    assert!(y1.max_abs_diff(&y3) > 1e-6);
    assert!(UniversalTransformer::new(8, 4, 6, 0, &mut r).is_err());
}

#[test]
fn timing_signal_values() {
    let s = timing_signal(3, 4, 2);
    // position 0 contributes sin(0)=0 / cos(0)=1
    assert!((s.get2(0, 0) - 2f64.sin()).abs() < 1e-15);
    assert!((s.get2(0, 1) - (1.0 + 2f64.cos())).abs() < 1e-15);
    assert!((s.get2(1, 2) - (0.01f64.sin() + 0.02f64.sin())).abs() < 1e-15);
}

#[test]
fn universal_transformer_gradients() {
    for seed in 0..20 {
        let mut r = rng(600 + seed);
        let heads = r.gen_range(1..=2);
        let d = heads * r.gen_range(1..=3) * 2;
        let steps = r.gen_range(1..=5);
        let hops = r.gen_range(1..=3);
        let ut = UniversalTransformer::new(d, heads, r.gen_range(2..=6), hops, &mut r).unwrap();
        let x = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let mask = random_mask(steps, &mut r);
        let proj = Tensor::uniform(&[steps, d], -1.0, 1.0, &mut r);
        let err = check((ut, x), |(u, x), grads| {
            let (y, cache) = u.forward(x, &mask)?;
            if let Some((gu, gx)) = grads {
                *gx = u.backward(&cache, &proj, gu);
            }
            Ok(dot(y.data(), proj.data()))
        });
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn mlp_head_examples_and_gradients() {
    let head = MlpHead::zeros(5, 3);
    let (logits, _) = head.forward(&[0.3; 5]).unwrap();
    assert_eq!(logits, [0.0; 4]);
    let mut probs = logits.to_vec();
    softmax_in_place(&mut probs);
    assert_eq!(probs, vec![0.25; 4]);
    assert!(head.forward(&[0.0; 4]).is_err());

    for seed in 0..20 {
        let mut r = rng(700 + seed);
        let (k, m) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let head = MlpHead::new(k, m, &mut r);
        let x = Tensor::uniform(&[k], -1.0, 1.0, &mut r);
        let proj: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
        let err = check((head, x), |(h, x), grads| {
            let (logits, cache) = h.forward(x.data())?;
            assert_eq!(logits.len(), 4);
            if let Some((gh, gx)) = grads {
                let dx = h.backward(&cache, &proj, gh);
                gx.data_mut().copy_from_slice(&dx);
            }
            Ok(dot(&logits, &proj))
        });
        assert!(err < 1e-6, "seed {seed}: {err}");
    }
}


//! Scalar-loop evaluations used as oracles.
//!
//! These index element by element and share no code with the vectorized
//! operators beyond the parameter structs.

use ndarray::Array2;

use crate::gqa::GqaParams;
use crate::shortconv::ShortConvParams;

fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, m, p) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..m {
                acc += a[[i, k]] * b[[k, j]];
            }
            c[[i, j]] = acc;
        }
    }
    c
}

pub fn shortconv_scalar(h: &Array2<f64>, p: &ShortConvParams) -> Array2<f64> {
    let (l, d, k) = (h.nrows(), p.dim(), p.kernel_size());
    let mut z = matmul(h, &p.w_in);
    for t in 0..l {
        for j in 0..3 * d {
            z[[t, j]] += p.b_in[j];
        }
    }
    let mut gated = Array2::zeros((l, d));
    for t in 0..l {
        for c in 0..d {
            let mut conv = 0.0;
            for i in 0..k {
                // Tap i sits at position t - (k - 1) + i; earlier positions are padding.
                let pos = t as isize - (k as isize - 1) + i as isize;
                if pos >= 0 {
                    let s = pos as usize;
                    conv += p.kernel[[c, i]] * z[[s, c]] * z[[s, 2 * d + c]];
                }
            }
            gated[[t, c]] = z[[t, d + c]] * conv;
        }
    }
    matmul(&gated, &p.w_out)
}

fn causal_attention(q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let hd = q[0].len();
    let scale = 1.0 / (hd as f64).sqrt();
    let mut out = vec![vec![0.0; hd]; q.len()];
    for t in 0..q.len() {
        let mut scores = Vec::with_capacity(t + 1);
        for s in 0..=t {
            let mut dot = 0.0;
            for j in 0..hd {
                dot += q[t][j] * k[s][j];
            }
            scores.push(dot * scale);
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|x| (x - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for s in 0..=t {
            for j in 0..hd {
                out[t][j] += exps[s] / z * v[s][j];
            }
        }
    }
    out
}

fn columns(m: &Array2<f64>, head: usize, hd: usize) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|t| (0..hd).map(|j| m[[t, head * hd + j]]).collect())
        .collect()
}

/// Grouped-query attention evaluated position by position, with each query
/// head looking up its shared key/value head by group.
pub fn gqa_scalar(h: &Array2<f64>, p: &GqaParams) -> Array2<f64> {
    let hd = p.head_dim;
    let per_group = p.n_q_heads / p.n_kv_heads;
    let (q, k, v) = (matmul(h, &p.w_q), matmul(h, &p.w_k), matmul(h, &p.w_v));
    let mut concat = Array2::zeros((h.nrows(), p.n_q_heads * hd));
    for qh in 0..p.n_q_heads {
        let g = qh / per_group;
        let out = causal_attention(&columns(&q, qh, hd), &columns(&k, g, hd), &columns(&v, g, hd));
        for (t, row) in out.iter().enumerate() {
            for j in 0..hd {
                concat[[t, qh * hd + j]] = row[j];
            }
        }
    }
    matmul(&concat, &p.w_o)
}

/// Standard multi-head causal attention: head `i` uses key/value head `i`.
/// Requires `n_q_heads == n_kv_heads`.
pub fn mha_scalar(h: &Array2<f64>, p: &GqaParams) -> Array2<f64> {
    assert_eq!(p.n_q_heads, p.n_kv_heads, "multi-head reference needs one kv head per query head");
    let hd = p.head_dim;
    let (q, k, v) = (matmul(h, &p.w_q), matmul(h, &p.w_k), matmul(h, &p.w_v));
    let mut concat = Array2::zeros((h.nrows(), p.n_q_heads * hd));
    for head in 0..p.n_q_heads {
        let out = causal_attention(&columns(&q, head, hd), &columns(&k, head, hd), &columns(&v, head, hd));
        for (t, row) in out.iter().enumerate() {
            for j in 0..hd {
                concat[[t, head * hd + j]] = row[j];
            }
        }
    }
    matmul(&concat, &p.w_o)
}

/// `max|a - b| / max|b|`: the largest deviation relative to the scale of
/// the reference output.
pub fn max_rel_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

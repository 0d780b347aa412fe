//! Causal grouped-query softmax attention.
//!
//! Query heads are split into `n_kv_heads` contiguous groups; query head `q`
//! reads key/value head `q / (n_q_heads / n_kv_heads)`. Scores are scaled
//! by `1/sqrt(head_dim)` and position `t` attends to positions `0..=t`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::{expect_shape, random_matrix, OpsError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GqaParams {
    pub n_q_heads: usize,
    pub n_kv_heads: usize,
    pub head_dim: usize,
    /// `d × n_q_heads·head_dim`.
    pub w_q: Array2<f64>,
    /// `d × n_kv_heads·head_dim`.
    pub w_k: Array2<f64>,
    /// `d × n_kv_heads·head_dim`.
    pub w_v: Array2<f64>,
    /// `n_q_heads·head_dim × d`.
    pub w_o: Array2<f64>,
}

impl GqaParams {
    pub fn random<R: Rng>(d: usize, n_q_heads: usize, n_kv_heads: usize, head_dim: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (d as f64).sqrt();
        GqaParams {
            n_q_heads,
            n_kv_heads,
            head_dim,
            w_q: random_matrix(d, n_q_heads * head_dim, scale, rng),
            w_k: random_matrix(d, n_kv_heads * head_dim, scale, rng),
            w_v: random_matrix(d, n_kv_heads * head_dim, scale, rng),
            w_o: random_matrix(n_q_heads * head_dim, d, 1.0 / ((n_q_heads * head_dim) as f64).sqrt(), rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }

    /// Query heads per key/value head.
    pub fn group_size(&self) -> usize {
        self.n_q_heads / self.n_kv_heads
    }

    pub fn kv_head(&self, q_head: usize) -> usize {
        q_head / self.group_size()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_q_heads == 0 || self.n_kv_heads == 0 || self.head_dim == 0 {
            return Err(OpsError::InvalidParam("head counts and head_dim must be positive"));
        }
        if self.n_q_heads % self.n_kv_heads != 0 {
            return Err(OpsError::HeadGrouping {
                n_q: self.n_q_heads,
                n_kv: self.n_kv_heads,
            });
        }
        let d = self.dim();
        let (q, kv) = (self.n_q_heads * self.head_dim, self.n_kv_heads * self.head_dim);
        expect_shape("w_q", self.w_q.shape(), &[d, q])?;
        expect_shape("w_k", self.w_k.shape(), &[d, kv])?;
        expect_shape("w_v", self.w_v.shape(), &[d, kv])?;
        expect_shape("w_o", self.w_o.shape(), &[q, d])
    }

    fn head<'a>(&self, m: &'a Array2<f64>, head: usize) -> ArrayView2<'a, f64> {
        m.slice(s![.., head * self.head_dim..(head + 1) * self.head_dim])
    }
}

/// Softmax over the causal prefix of one score row.
fn attention_row(q: ArrayView1<f64>, k: ArrayView2<f64>, t: usize, scale: f64) -> Array1<f64> {
    let mut scores = k.slice(s![..=t, ..]).dot(&q) * scale;
    let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    scores.mapv_inplace(|x| (x - max).exp());
    let z = scores.sum();
    scores / z
}

struct Projections {
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
}

fn project(h: &Array2<f64>, p: &GqaParams) -> Result<Projections> {
    p.validate()?;
    expect_shape("h", &[h.ncols()], &[p.dim()])?;
    Ok(Projections {
        q: h.dot(&p.w_q),
        k: h.dot(&p.w_k),
        v: h.dot(&p.w_v),
    })
}

/// Per-head attention outputs concatenated, before `W_o`.
fn attend(pr: &Projections, p: &GqaParams, l: usize) -> Array2<f64> {
    let scale = 1.0 / (p.head_dim as f64).sqrt();
    let mut a = Array2::zeros((l, p.n_q_heads * p.head_dim));
    for qh in 0..p.n_q_heads {
        let kvh = p.kv_head(qh);
        let (q, k, v) = (p.head(&pr.q, qh), p.head(&pr.k, kvh), p.head(&pr.v, kvh));
        for t in 0..l {
            let w = attention_row(q.row(t), k, t, scale);
            let out = w.dot(&v.slice(s![..=t, ..]));
            a.slice_mut(s![t, qh * p.head_dim..(qh + 1) * p.head_dim]).assign(&out);
        }
    }
    a
}

pub fn gqa_forward(h: &Array2<f64>, p: &GqaParams) -> Result<Array2<f64>> {
    let pr = project(h, p)?;
    Ok(attend(&pr, p, h.nrows()).dot(&p.w_o))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GqaGrads {
    pub h: Array2<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    pub w_o: Array2<f64>,
}

/// Gradients of `sum(d_out ⊙ gqa_forward(h, p))`.
pub fn gqa_backward(h: &Array2<f64>, p: &GqaParams, d_out: &Array2<f64>) -> Result<GqaGrads> {
    let pr = project(h, p)?;
    let (l, hd) = (h.nrows(), p.head_dim);
    expect_shape("d_out", d_out.shape(), &[l, p.dim()])?;
    let scale = 1.0 / (hd as f64).sqrt();
    let a = attend(&pr, p, l);
    let w_o = a.t().dot(d_out);
    let da = d_out.dot(&p.w_o.t());

    let mut dq = Array2::zeros(pr.q.raw_dim());
    let mut dk = Array2::zeros(pr.k.raw_dim());
    let mut dv = Array2::zeros(pr.v.raw_dim());
    for qh in 0..p.n_q_heads {
        let kvh = p.kv_head(qh);
        let (q, k, v) = (p.head(&pr.q, qh), p.head(&pr.k, kvh), p.head(&pr.v, kvh));
        let (qc, kc) = (qh * hd..(qh + 1) * hd, kvh * hd..(kvh + 1) * hd);
        for t in 0..l {
            let w = attention_row(q.row(t), k, t, scale);
            let d_head = da.slice(s![t, qc.clone()]);
            // dP_s = dO_t · v_s, then the softmax Jacobian.
            let dp = v.slice(s![..=t, ..]).dot(&d_head);
            let centre = w.dot(&dp);
            let ds = &w * &(dp - centre);
            let mut dv_rows = dv.slice_mut(s![..=t, kc.clone()]);
            for (s_, mut row) in dv_rows.rows_mut().into_iter().enumerate() {
                row.scaled_add(w[s_], &d_head);
            }
            dq.slice_mut(s![t, qc.clone()])
                .scaled_add(scale, &ds.dot(&k.slice(s![..=t, ..])));
            let mut dk_rows = dk.slice_mut(s![..=t, kc.clone()]);
            for (s_, mut row) in dk_rows.rows_mut().into_iter().enumerate() {
                row.scaled_add(scale * ds[s_], &q.row(t));
            }
        }
    }
    Ok(GqaGrads {
        h: dq.dot(&p.w_q.t()) + dk.dot(&p.w_k.t()) + dv.dot(&p.w_v.t()),
        w_q: h.t().dot(&dq),
        w_k: h.t().dot(&dk),
        w_v: h.t().dot(&dv),
        w_o,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grouping_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = GqaParams::random(4, 3, 2, 2, &mut rng);
        assert_eq!(p.validate(), Err(OpsError::HeadGrouping { n_q: 3, n_kv: 2 }));
        p.n_kv_heads = 0;
        assert!(matches!(p.validate(), Err(OpsError::InvalidParam(_))));
    }

    #[test]
    fn head_mapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GqaParams::random(4, 6, 2, 2, &mut rng);
        let groups: Vec<usize> = (0..6).map(|q| p.kv_head(q)).collect();
        assert_eq!(groups, [0, 0, 0, 1, 1, 1]);
    }
}

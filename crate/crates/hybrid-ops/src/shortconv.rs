//! Gated short convolution.
//!
//! `z = h W_in + b_in` is split column-wise into three `d`-wide blocks in the
//! order `(B, C, h̃)`. The output is `o = (C ⊙ Conv_k(B ⊙ h̃)) W_out`, where
//! `Conv_k` is a depthwise causal convolution: each channel is left-padded
//! with `k - 1` zeros, so position `t` only sees positions `t-k+1..=t`.
//!
//! Kernel layout follows the usual depthwise conv1d weight: `kernel[[c, i]]`
//! multiplies input position `t - (k - 1) + i`, so `i = k - 1` is the current
//! position. The bias on the input projection defaults to zero; it exists so
//! the gates can be pinned to constants, which the identity configuration
//! needs.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::{expect_shape, random_matrix, OpsError, Result};

pub const DEFAULT_KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ShortConvParams {
    /// `d × 3d`.
    pub w_in: Array2<f64>,
    /// `3d`.
    pub b_in: Array1<f64>,
    /// `d × d`.
    pub w_out: Array2<f64>,
    /// `d × k`.
    pub kernel: Array2<f64>,
}

impl ShortConvParams {
    pub fn new(w_in: Array2<f64>, b_in: Array1<f64>, w_out: Array2<f64>, kernel: Array2<f64>) -> Result<Self> {
        let p = ShortConvParams { w_in, b_in, w_out, kernel };
        p.validate()?;
        Ok(p)
    }

    pub fn random<R: Rng>(d: usize, k: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (d as f64).sqrt();
        ShortConvParams {
            w_in: random_matrix(d, 3 * d, scale, rng),
            b_in: Array1::zeros(3 * d),
            w_out: random_matrix(d, d, scale, rng),
            kernel: random_matrix(d, k, 1.0 / (k as f64).sqrt(), rng),
        }
    }

    /// `B = C = 1`, `h̃ = h`, kernel a unit impulse at the current position
    /// and `W_out = I`: the operator returns its input.
    pub fn identity(d: usize, k: usize) -> Self {
        let mut w_in = Array2::zeros((d, 3 * d));
        w_in.slice_mut(s![.., 2 * d..]).assign(&Array2::eye(d));
        let mut b_in = Array1::zeros(3 * d);
        b_in.slice_mut(s![..2 * d]).fill(1.0);
        let mut kernel = Array2::zeros((d, k));
        kernel.column_mut(k - 1).fill(1.0);
        ShortConvParams {
            w_in,
            b_in,
            w_out: Array2::eye(d),
            kernel,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.w_in.nrows();
        if self.kernel.ncols() == 0 {
            return Err(OpsError::InvalidParam("kernel size must be at least 1"));
        }
        expect_shape("w_in", self.w_in.shape(), &[d, 3 * d])?;
        expect_shape("b_in", self.b_in.shape(), &[3 * d])?;
        expect_shape("w_out", self.w_out.shape(), &[d, d])?;
        expect_shape("kernel", &[self.kernel.nrows()], &[d])
    }
}

/// Intermediates kept for the backward pass.
struct Trace {
    b: Array2<f64>,
    c: Array2<f64>,
    ht: Array2<f64>,
    x: Array2<f64>,
    y: Array2<f64>,
    g: Array2<f64>,
}

fn causal_conv(x: ArrayView2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
    let (l, k) = (x.nrows(), kernel.ncols());
    let mut y = Array2::zeros(x.raw_dim());
    for i in 0..k {
        // Tap i reads `lag` positions back.
        let lag = k - 1 - i;
        if lag >= l {
            continue;
        }
        let w = kernel.column(i);
        let mut dst = y.slice_mut(s![lag.., ..]);
        dst += &(&x.slice(s![..l - lag, ..]) * &w);
    }
    y
}

fn trace(h: &Array2<f64>, p: &ShortConvParams) -> Result<Trace> {
    p.validate()?;
    let d = p.dim();
    expect_shape("h", &[h.ncols()], &[d])?;
    let z = h.dot(&p.w_in) + &p.b_in;
    let b = z.slice(s![.., ..d]).to_owned();
    let c = z.slice(s![.., d..2 * d]).to_owned();
    let ht = z.slice(s![.., 2 * d..]).to_owned();
    let x = &b * &ht;
    let y = causal_conv(x.view(), &p.kernel);
    let g = &c * &y;
    Ok(Trace { b, c, ht, x, y, g })
}

pub fn shortconv_forward(h: &Array2<f64>, p: &ShortConvParams) -> Result<Array2<f64>> {
    let t = trace(h, p)?;
    Ok(t.g.dot(&p.w_out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortConvGrads {
    pub h: Array2<f64>,
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub w_out: Array2<f64>,
    pub kernel: Array2<f64>,
}

/// Gradients of `sum(d_out ⊙ shortconv_forward(h, p))`.
pub fn shortconv_backward(h: &Array2<f64>, p: &ShortConvParams, d_out: &Array2<f64>) -> Result<ShortConvGrads> {
    let t = trace(h, p)?;
    expect_shape("d_out", d_out.shape(), &[h.nrows(), p.dim()])?;
    let (l, d, k) = (h.nrows(), p.dim(), p.kernel_size());

    let w_out = t.g.t().dot(d_out);
    let dg = d_out.dot(&p.w_out.t());
    let dc = &dg * &t.y;
    let dy = &dg * &t.c;

    let mut dx = Array2::zeros((l, d));
    let mut kernel = Array2::zeros((d, k));
    for i in 0..k {
        let lag = k - 1 - i;
        if lag >= l {
            continue;
        }
        let upstream = dy.slice(s![lag.., ..]);
        let source = t.x.slice(s![..l - lag, ..]);
        kernel.column_mut(i).assign(&(&upstream * &source).sum_axis(Axis(0)));
        let mut dst = dx.slice_mut(s![..l - lag, ..]);
        dst += &(&upstream * &p.kernel.column(i));
    }

    let mut dz = Array2::zeros((l, 3 * d));
    dz.slice_mut(s![.., ..d]).assign(&(&dx * &t.ht));
    dz.slice_mut(s![.., d..2 * d]).assign(&dc);
    dz.slice_mut(s![.., 2 * d..]).assign(&(&dx * &t.b));

    Ok(ShortConvGrads {
        h: dz.dot(&p.w_in.t()),
        w_in: h.t().dot(&dz),
        b_in: dz.sum_axis(Axis(0)),
        w_out,
        kernel,
    })
}

//! RMSNorm and the SwiGLU feed-forward readout.
//!
//! RMSNorm scales each row by the inverse root mean square of its entries
//! with no centering: `y = x / sqrt(mean(x²) + eps) ⊙ gain`.
//! SwiGLU is `(silu(x W_gate) ⊙ x W_up) W_down`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::{expect_shape, random_matrix, Result};

pub const RMS_EPS: f64 = 1e-6;

fn inv_rms(x: &Array2<f64>, eps: f64) -> Array1<f64> {
    x.map_axis(Axis(1), |row| 1.0 / (row.mapv(|v| v * v).mean().unwrap_or(0.0) + eps).sqrt())
}

pub fn rmsnorm_forward(x: &Array2<f64>, gain: &Array1<f64>, eps: f64) -> Result<Array2<f64>> {
    expect_shape("gain", gain.shape(), &[x.ncols()])?;
    let r = inv_rms(x, eps).insert_axis(Axis(1));
    Ok(x * &r * gain)
}

/// Returns `(d_x, d_gain)` for upstream gradient `d_y`.
pub fn rmsnorm_backward(
    x: &Array2<f64>,
    gain: &Array1<f64>,
    eps: f64,
    d_y: &Array2<f64>,
) -> Result<(Array2<f64>, Array1<f64>)> {
    expect_shape("gain", gain.shape(), &[x.ncols()])?;
    expect_shape("d_y", d_y.shape(), x.shape())?;
    let r = inv_rms(x, eps).insert_axis(Axis(1));
    let xhat = x * &r;
    let d_gain = (d_y * &xhat).sum_axis(Axis(0));
    let dxhat = d_y * gain;
    // d r / d x_j = -r³ x_j / n.
    let proj = (&dxhat * x).mean_axis(Axis(1)).expect("non-empty rows").insert_axis(Axis(1));
    let r2 = r.mapv(|v| v * v);
    Ok(((dxhat - x * &r2 * &proj) * &r, d_gain))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwiGlu {
    /// `d × f`.
    pub w_gate: Array2<f64>,
    /// `d × f`.
    pub w_up: Array2<f64>,
    /// `f × d`.
    pub w_down: Array2<f64>,
}

impl SwiGlu {
    pub fn random<R: Rng>(d: usize, hidden: usize, rng: &mut R) -> Self {
        let (a, b) = (1.0 / (d as f64).sqrt(), 1.0 / (hidden as f64).sqrt());
        SwiGlu {
            w_gate: random_matrix(d, hidden, a, rng),
            w_up: random_matrix(d, hidden, a, rng),
            w_down: random_matrix(hidden, d, b, rng),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let f = self.w_gate.ncols();
        expect_shape("w_gate", self.w_gate.shape(), &[d, f])?;
        expect_shape("w_up", self.w_up.shape(), &[d, f])?;
        expect_shape("w_down", self.w_down.shape(), &[f, d])
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn swiglu_forward(x: &Array2<f64>, p: &SwiGlu) -> Result<Array2<f64>> {
    p.validate(x.ncols())?;
    let a = x.dot(&p.w_gate);
    let b = x.dot(&p.w_up);
    Ok((a.mapv(|v| v * sigmoid(v)) * b).dot(&p.w_down))
}

/// Returns `(d_x, grads)` where `grads` has the layout of [`SwiGlu`].
pub fn swiglu_backward(x: &Array2<f64>, p: &SwiGlu, d_y: &Array2<f64>) -> Result<(Array2<f64>, SwiGlu)> {
    p.validate(x.ncols())?;
    expect_shape("d_y", d_y.shape(), x.shape())?;
    let a = x.dot(&p.w_gate);
    let b = x.dot(&p.w_up);
    let s = a.mapv(|v| v * sigmoid(v));
    let m = &s * &b;
    let w_down = m.t().dot(d_y);
    let dm = d_y.dot(&p.w_down.t());
    let db = &dm * &s;
    let da = &dm * &b * &a.mapv(|v| {
        let sg = sigmoid(v);
        sg * (1.0 + v * (1.0 - sg))
    });
    let dx = da.dot(&p.w_gate.t()) + db.dot(&p.w_up.t());
    Ok((
        dx,
        SwiGlu {
            w_gate: x.t().dot(&da),
            w_up: x.t().dot(&db),
            w_down,
        },
    ))
}

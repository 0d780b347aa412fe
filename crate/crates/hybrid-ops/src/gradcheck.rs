//! Finite-difference gradient verification.
//!
//! The scalar loss is `sum(R ⊙ op(h))` for a fixed random `R`, so the
//! analytic backward pass receives `R` as its upstream gradient. Every input
//! entry and every parameter entry is perturbed by `±epsilon` and the
//! central difference compared with the analytic value.

use ndarray::{Array2, ArrayD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gqa::{gqa_backward, gqa_forward, GqaParams};
use crate::shortconv::{shortconv_backward, shortconv_forward, ShortConvParams};
use crate::{expect_shape, random_matrix, OpsError, Result};

/// Relative errors are taken against `max(|analytic|, |numeric|, REL_FLOOR)`
/// so entries whose true gradient is zero are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-3;

/// Input gradient plus one gradient per parameter tensor, in the order of
/// [`Differentiable::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub input: Array2<f64>,
    pub params: Vec<ArrayD<f64>>,
}

/// A sequence operator `L×d → L×d'` with an analytic backward pass.
pub trait Differentiable {
    fn forward(&self, h: &Array2<f64>) -> Result<Array2<f64>>;
    fn backward(&self, h: &Array2<f64>, d_out: &Array2<f64>) -> Result<Gradients>;
    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>>;
}

/// `h W`; exact gradients, useful as a harness sanity check.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
}

impl Differentiable for Linear {
    fn forward(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        expect_shape("h", &[h.ncols()], &[self.w.nrows()])?;
        Ok(h.dot(&self.w))
    }

    fn backward(&self, h: &Array2<f64>, d_out: &Array2<f64>) -> Result<Gradients> {
        Ok(Gradients {
            input: d_out.dot(&self.w.t()),
            params: vec![h.t().dot(d_out).into_dyn()],
        })
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![self.w.view_mut().into_dyn()]
    }
}

impl Differentiable for ShortConvParams {
    fn forward(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        shortconv_forward(h, self)
    }

    fn backward(&self, h: &Array2<f64>, d_out: &Array2<f64>) -> Result<Gradients> {
        let g = shortconv_backward(h, self, d_out)?;
        Ok(Gradients {
            input: g.h,
            params: vec![g.w_in.into_dyn(), g.b_in.into_dyn(), g.w_out.into_dyn(), g.kernel.into_dyn()],
        })
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![
            self.w_in.view_mut().into_dyn(),
            self.b_in.view_mut().into_dyn(),
            self.w_out.view_mut().into_dyn(),
            self.kernel.view_mut().into_dyn(),
        ]
    }
}

impl Differentiable for GqaParams {
    fn forward(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        gqa_forward(h, self)
    }

    fn backward(&self, h: &Array2<f64>, d_out: &Array2<f64>) -> Result<Gradients> {
        let g = gqa_backward(h, self, d_out)?;
        Ok(Gradients {
            input: g.h,
            params: vec![g.w_q.into_dyn(), g.w_k.into_dyn(), g.w_v.into_dyn(), g.w_o.into_dyn()],
        })
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![
            self.w_q.view_mut().into_dyn(),
            self.w_k.view_mut().into_dyn(),
            self.w_v.view_mut().into_dyn(),
            self.w_o.view_mut().into_dyn(),
        ]
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Max relative error between analytic and central-difference gradients
/// over all inputs and parameters. `seed` fixes the projection `R`.
pub fn grad_check<O: Differentiable + Clone>(op: &O, input: &Array2<f64>, epsilon: f64, seed: u64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(OpsError::InvalidParam("epsilon must be positive"));
    }
    let out = op.forward(input)?;
    let r = random_matrix(out.nrows(), out.ncols(), 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    let loss = |o: &O, h: &Array2<f64>| -> Result<f64> { Ok((o.forward(h)? * &r).sum()) };
    let grads = op.backward(input, &r)?;

    let mut worst = 0.0f64;
    let mut h = input.clone();
    for (idx, &analytic) in grads.input.indexed_iter() {
        let orig = h[idx];
        h[idx] = orig + epsilon;
        let up = loss(op, &h)?;
        h[idx] = orig - epsilon;
        let down = loss(op, &h)?;
        h[idx] = orig;
        worst = worst.max(rel_err(analytic, (up - down) / (2.0 * epsilon)));
    }

    let mut probe = op.clone();
    for (t, analytic) in grads.params.iter().enumerate() {
        for (i, &a) in analytic.iter().enumerate() {
            let orig = nth(&mut probe, t, i, None);
            nth(&mut probe, t, i, Some(orig + epsilon));
            let up = loss(&probe, input)?;
            nth(&mut probe, t, i, Some(orig - epsilon));
            let down = loss(&probe, input)?;
            nth(&mut probe, t, i, Some(orig));
            worst = worst.max(rel_err(a, (up - down) / (2.0 * epsilon)));
        }
    }
    Ok(worst)
}

/// Reads (and optionally overwrites) entry `i`, in logical order, of
/// parameter tensor `t`.
fn nth<O: Differentiable>(op: &mut O, t: usize, i: usize, set: Option<f64>) -> f64 {
    let mut params = op.params_mut();
    let slot = params[t].iter_mut().nth(i).expect("gradient and parameter shapes agree");
    let old = *slot;
    if let Some(v) = set {
        *slot = v;
    }
    old
}

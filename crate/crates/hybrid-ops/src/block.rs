//! A pre-norm residual block: `h₁ = h + mixer(norm₁(h))`, then
//! `out = h₁ + swiglu(norm₂(h₁))`.

use ndarray::{Array1, Array2, ArrayViewMutD};
use rand::Rng;

use crate::gqa::GqaParams;
use crate::gradcheck::{Differentiable, Gradients};
use crate::norm::{rmsnorm_backward, rmsnorm_forward, swiglu_backward, swiglu_forward, SwiGlu, RMS_EPS};
use crate::shortconv::ShortConvParams;
use crate::Result;

/// The sequence-mixing operator of a block.
#[derive(Debug, Clone, PartialEq)]
pub enum Mixer {
    ShortConv(ShortConvParams),
    Gqa(GqaParams),
}

impl Mixer {
    fn op(&self) -> &dyn Differentiable {
        match self {
            Mixer::ShortConv(p) => p,
            Mixer::Gqa(p) => p,
        }
    }

    fn op_mut(&mut self) -> &mut dyn Differentiable {
        match self {
            Mixer::ShortConv(p) => p,
            Mixer::Gqa(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub norm1: Array1<f64>,
    pub mixer: Mixer,
    pub norm2: Array1<f64>,
    pub ffn: SwiGlu,
}

impl Block {
    /// Unit norm gains and a random feed-forward of width `hidden`.
    pub fn new<R: Rng>(mixer: Mixer, d: usize, hidden: usize, rng: &mut R) -> Self {
        Block {
            norm1: Array1::ones(d),
            mixer,
            norm2: Array1::ones(d),
            ffn: SwiGlu::random(d, hidden, rng),
        }
    }
}

impl Differentiable for Block {
    fn forward(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        let h1 = h + &self.mixer.op().forward(&rmsnorm_forward(h, &self.norm1, RMS_EPS)?)?;
        let v = rmsnorm_forward(&h1, &self.norm2, RMS_EPS)?;
        Ok(&h1 + &swiglu_forward(&v, &self.ffn)?)
    }

    fn backward(&self, h: &Array2<f64>, d_out: &Array2<f64>) -> Result<Gradients> {
        let u = rmsnorm_forward(h, &self.norm1, RMS_EPS)?;
        let h1 = h + &self.mixer.op().forward(&u)?;
        let v = rmsnorm_forward(&h1, &self.norm2, RMS_EPS)?;

        let (dv, ffn) = swiglu_backward(&v, &self.ffn, d_out)?;
        let (dh1_norm, norm2) = rmsnorm_backward(&h1, &self.norm2, RMS_EPS, &dv)?;
        let dh1 = d_out + &dh1_norm;
        let mixer = self.mixer.op().backward(&u, &dh1)?;
        let (dh_norm, norm1) = rmsnorm_backward(h, &self.norm1, RMS_EPS, &mixer.input)?;

        let mut params = vec![norm1.into_dyn()];
        params.extend(mixer.params);
        params.extend([norm2.into_dyn(), ffn.w_gate.into_dyn(), ffn.w_up.into_dyn(), ffn.w_down.into_dyn()]);
        Ok(Gradients {
            input: dh1 + dh_norm,
            params,
        })
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut params = vec![self.norm1.view_mut().into_dyn()];
        params.extend(self.mixer.op_mut().params_mut());
        params.extend([
            self.norm2.view_mut().into_dyn(),
            self.ffn.w_gate.view_mut().into_dyn(),
            self.ffn.w_up.view_mut().into_dyn(),
            self.ffn.w_down.view_mut().into_dyn(),
        ]);
        params
    }
}

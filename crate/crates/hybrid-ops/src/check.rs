//! The verification battery run by `gym opcheck` and the acceptance suite.
//!
//! Each check yields a measured value and the tolerance it must stay under.

use std::time::{Duration, Instant};

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::block::{Block, Mixer};
use crate::gqa::{gqa_forward, GqaParams};
use crate::gradcheck::{grad_check, Linear};
use crate::reference::{gqa_scalar, max_rel_diff, mha_scalar, shortconv_scalar};
use crate::shortconv::{shortconv_forward, ShortConvParams, DEFAULT_KERNEL};
use crate::{random_matrix, Result};

pub const ORACLE_TOL: f64 = 1e-12;
pub const GRAD_TOL: f64 = 1e-4;
pub const LINEAR_GRAD_TOL: f64 = 1e-8;
pub const GRAD_EPS: f64 = 1e-5;
pub const ORACLE_INSTANCES: usize = 50;
pub const CAUSAL_LEN: usize = 64;
pub const TIMING_LENGTHS: [usize; 3] = [256, 1024, 4096];
/// Log-log slope separating linear from quadratic scaling.
pub const SLOPE_SPLIT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    /// Checks like the attention timing slope must exceed their bound.
    pub at_least: bool,
}

impl CheckResult {
    fn under(name: &'static str, value: f64, tolerance: f64) -> Self {
        CheckResult {
            name,
            value,
            tolerance,
            at_least: false,
        }
    }

    pub fn passed(&self) -> bool {
        if self.at_least {
            self.value > self.tolerance
        } else {
            self.value <= self.tolerance
        }
    }
}

pub fn identity_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_matrix(16, 8, 2.0, &mut rng);
    let out = shortconv_forward(&h, &ShortConvParams::identity(8, DEFAULT_KERNEL))?;
    Ok((&out - &h).iter().fold(0.0, |m, x| m.max(x.abs())))
}

pub fn shortconv_oracle_error(seed: u64, instances: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (l, d, k) = (rng.gen_range(1..=12), rng.gen_range(1..=6), rng.gen_range(1..=4));
        let p = ShortConvParams::random(d, k, &mut rng);
        let h = random_matrix(l, d, 1.0, &mut rng);
        worst = worst.max(max_rel_diff(&shortconv_forward(&h, &p)?, &shortconv_scalar(&h, &p)));
    }
    Ok(worst)
}

pub fn gqa_oracle_error(seed: u64, instances: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (n_kv, group) = (rng.gen_range(1..=2), rng.gen_range(1..=3));
        let (l, d, hd) = (rng.gen_range(1..=10), rng.gen_range(2..=6), rng.gen_range(1..=4));
        let p = GqaParams::random(d, n_kv * group, n_kv, hd, &mut rng);
        let h = random_matrix(l, d, 1.0, &mut rng);
        worst = worst.max(max_rel_diff(&gqa_forward(&h, &p)?, &gqa_scalar(&h, &p)));
    }
    Ok(worst)
}

/// With one key/value head per query head the operator is plain
/// multi-head attention.
pub fn mha_reduction_error(seed: u64, instances: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let heads = rng.gen_range(1..=4);
        let p = GqaParams::random(6, heads, heads, 3, &mut rng);
        let h = random_matrix(rng.gen_range(1..=10), 6, 1.0, &mut rng);
        worst = worst.max(max_rel_diff(&gqa_forward(&h, &p)?, &mha_scalar(&h, &p)));
    }
    Ok(worst)
}

pub fn linear_grad_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = Linear {
        w: random_matrix(4, 3, 1.0, &mut rng),
    };
    grad_check(&op, &random_matrix(5, 4, 1.0, &mut rng), GRAD_EPS, seed)
}

pub fn shortconv_grad_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ShortConvParams::random(4, DEFAULT_KERNEL, &mut rng);
    p.b_in = Array1::from_shape_simple_fn(12, || rng.gen_range(-0.5..0.5));
    grad_check(&p, &random_matrix(7, 4, 1.0, &mut rng), GRAD_EPS, seed)
}

pub fn gqa_grad_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = GqaParams::random(4, 4, 2, 2, &mut rng);
    grad_check(&p, &random_matrix(6, 4, 1.0, &mut rng), GRAD_EPS, seed)
}

/// Both block flavours: norm, mixer, residual, norm, SwiGLU, residual.
pub fn block_grad_error(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv = Mixer::ShortConv(ShortConvParams::random(4, DEFAULT_KERNEL, &mut rng));
    let attn = Mixer::Gqa(GqaParams::random(4, 2, 1, 2, &mut rng));
    let mut worst = 0.0f64;
    for mixer in [conv, attn] {
        let mut block = Block::new(mixer, 4, 6, &mut rng);
        block.norm1.mapv_inplace(|g| g + rng.gen_range(-0.3..0.3));
        block.norm2.mapv_inplace(|g| g + rng.gen_range(-0.3..0.3));
        worst = worst.max(grad_check(&block, &random_matrix(5, 4, 1.0, &mut rng), GRAD_EPS, seed)?);
    }
    Ok(worst)
}

/// Largest change at positions before `t` after perturbing row `t`, over
/// every `t`.
pub fn causality_leak<F>(op: F, h: &Array2<f64>) -> Result<f64>
where
    F: Fn(&Array2<f64>) -> Result<Array2<f64>>,
{
    let base = op(h)?;
    let mut worst = 0.0f64;
    for t in 0..h.nrows() {
        let mut bumped = h.clone();
        bumped.row_mut(t).mapv_inplace(|x| x + 1.0);
        let out = op(&bumped)?;
        let diff = &out.slice(s![..t, ..]) - &base.slice(s![..t, ..]);
        worst = diff.iter().fold(worst, |m, x| m.max(x.abs()));
    }
    Ok(worst)
}

pub fn shortconv_causality(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = ShortConvParams::random(8, DEFAULT_KERNEL, &mut rng);
    causality_leak(|h| shortconv_forward(h, &p), &random_matrix(CAUSAL_LEN, 8, 1.0, &mut rng))
}

pub fn gqa_causality(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = GqaParams::random(8, 4, 2, 2, &mut rng);
    causality_leak(|h| gqa_forward(h, &p), &random_matrix(CAUSAL_LEN, 8, 1.0, &mut rng))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn fastest<F: FnMut()>(reps: usize, mut f: F) -> Duration {
    (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed()
        })
        .min()
        .expect("at least one repetition")
}

/// Timing slopes of `(shortconv, attention)` over `lengths`, each point the
/// fastest of `reps` runs.
pub fn timing_slopes(seed: u64, lengths: &[usize], reps: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 16;
    let conv = ShortConvParams::random(d, DEFAULT_KERNEL, &mut rng);
    let attn = GqaParams::random(d, 2, 1, 8, &mut rng);
    let (mut tc, mut ta) = (Vec::new(), Vec::new());
    for &l in lengths {
        let h = random_matrix(l, d, 1.0, &mut rng);
        shortconv_forward(&h, &conv)?;
        gqa_forward(&h, &attn)?;
        tc.push(fastest(reps, || drop(shortconv_forward(&h, &conv))).as_secs_f64());
        ta.push(fastest(reps, || drop(gqa_forward(&h, &attn))).as_secs_f64());
    }
    let xs: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    Ok((loglog_slope(&xs, &tc), loglog_slope(&xs, &ta)))
}

/// Runs every check; `timing` adds the two scaling checks.
pub fn run_all(seed: u64, timing: bool) -> Result<Vec<CheckResult>> {
    let mut out = vec![
        CheckResult::under("shortconv_identity", identity_error(seed)?, ORACLE_TOL),
        CheckResult::under("shortconv_oracle", shortconv_oracle_error(seed, ORACLE_INSTANCES)?, ORACLE_TOL),
        CheckResult::under("gqa_oracle", gqa_oracle_error(seed, ORACLE_INSTANCES)?, ORACLE_TOL),
        CheckResult::under("gqa_mha_reduction", mha_reduction_error(seed, ORACLE_INSTANCES)?, ORACLE_TOL),
        CheckResult::under("linear_grad", linear_grad_error(seed)?, LINEAR_GRAD_TOL),
        CheckResult::under("shortconv_grad", shortconv_grad_error(seed)?, GRAD_TOL),
        CheckResult::under("gqa_grad", gqa_grad_error(seed)?, GRAD_TOL),
        CheckResult::under("block_grad", block_grad_error(seed)?, GRAD_TOL),
        CheckResult::under("shortconv_causality", shortconv_causality(seed)?, 0.0),
        CheckResult::under("gqa_causality", gqa_causality(seed)?, 0.0),
    ];
    if timing {
        let (conv, attn) = timing_slopes(seed, &TIMING_LENGTHS, 3)?;
        out.push(CheckResult::under("shortconv_timing_slope", conv, SLOPE_SPLIT));
        out.push(CheckResult {
            name: "attention_timing_slope",
            value: attn,
            tolerance: SLOPE_SPLIT,
            at_least: true,
        });
    }
    Ok(out)
}

//! Chemistry language-model gym: formats, tokenization, sampling, rewards and evaluation.

pub mod chem;
pub mod eval;
pub mod interop;
pub mod rewards;
pub mod sampler;
pub mod selfies;
pub mod spatial;
pub mod task;
pub mod tokenizer;

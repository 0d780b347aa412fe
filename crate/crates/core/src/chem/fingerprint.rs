//! Morgan-style circular fingerprints and Tanimoto similarity.
//!
//! Identifiers are 64-bit hashes built with a splitmix64 mixer under a fixed
//! seed, so bit positions are stable across platforms and releases. Atom
//! environments are computed on the canonical rendering view, which makes
//! the result independent of atom order and of Kekulé vs aromatic writing.

use thiserror::Error;

use super::canon::View;
use super::Molecule;

const SEED: u64 = 0x6a09_e667_f3bc_c908;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("fingerprint lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("n_bits must be a positive power of two, got {0}")]
    BadLength(usize),
}

/// Fixed-length bit vector plus the radius it was computed at.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    n_bits: usize,
    radius: u32,
}

impl Fingerprint {
    /// Builds a fingerprint with the given bits set. Indices are reduced
    /// modulo `n_bits`.
    pub fn from_bits(n_bits: usize, radius: u32, on: impl IntoIterator<Item = usize>) -> Result<Self, FingerprintError> {
        if n_bits == 0 || !n_bits.is_power_of_two() {
            return Err(FingerprintError::BadLength(n_bits));
        }
        let mut fp = Fingerprint {
            words: vec![0; n_bits.div_ceil(64)],
            n_bits,
            radius,
        };
        for i in on {
            fp.set(i % n_bits);
        }
        Ok(fp)
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.n_bits && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits in increasing order.
    pub fn on_bits(&self) -> Vec<usize> {
        (0..self.n_bits).filter(|&i| self.get(i)).collect()
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_seq(values: impl IntoIterator<Item = u64>) -> u64 {
    values.into_iter().fold(SEED, |h, v| mix(h ^ mix(v)))
}

/// Circular fingerprint of `m` with environments up to `radius` bonds,
/// folded into `n_bits` bits (a power of two).
pub fn circular_fingerprint(m: &Molecule, radius: u32, n_bits: usize) -> Result<Fingerprint, FingerprintError> {
    let mut fp = Fingerprint::from_bits(n_bits, radius, [])?;
    if m.is_empty() {
        return Ok(fp);
    }
    let view = View::canonical(m);
    let n = m.atoms().len();
    let mut ids: Vec<u64> = (0..n)
        .map(|i| {
            let a = &m.atoms()[i];
            let in_ring = m.neighbors(i).iter().any(|&(_, b)| m.is_ring_bond(b));
            hash_seq([
                a.element.atomic_number() as u64,
                m.neighbors(i).len() as u64,
                a.h_count as u64,
                a.charge as i64 as u64,
                view.atom_aromatic[i] as u64,
                in_ring as u64,
            ])
        })
        .collect();
    for &id in &ids {
        fp.set((id as usize) & (n_bits - 1));
    }
    for r in 1..=radius as u64 {
        ids = (0..n)
            .map(|i| {
                let mut env: Vec<(u64, u64)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(w, b)| (view.bond_code(m, b) as u64, ids[w]))
                    .collect();
                env.sort_unstable();
                hash_seq([r, ids[i]].into_iter().chain(env.into_iter().flat_map(|(b, id)| [b, id])))
            })
            .collect();
        for &id in &ids {
            fp.set((id as usize) & (n_bits - 1));
        }
    }
    Ok(fp)
}

/// |a ∧ b| / |a ∨ b|. Two empty fingerprints are defined to be identical
/// (similarity 1).
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.n_bits != b.n_bits {
        return Err(FingerprintError::LengthMismatch(a.n_bits, b.n_bits));
    }
    let (mut both, mut either) = (0u64, 0u64);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones() as u64;
        either += (x | y).count_ones() as u64;
    }
    if either == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / either as f64)
}

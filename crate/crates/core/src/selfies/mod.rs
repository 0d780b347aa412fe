//! SELFIES (v2 semantics) encoding and decoding.
//!
//! Decoding is total over the symbol alphabet: any sequence of valid
//! symbols derives a molecule that passes the valence table. Encoding walks
//! the Kekulé form of a molecule in the order its bonds were written, so a
//! molecule parsed from SMILES encodes to the same symbols as the selfies
//! reference encoder given that SMILES.
//!
//! Stereo markers are not emitted.

mod decode;
mod encode;
pub(crate) mod symbols;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::chem::{parse_smiles, ParseError};

pub use decode::decode_selfies;
pub use encode::encode_selfies;
pub use symbols::{bonding_capacity, semantic_alphabet, INDEX_ALPHABET};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelfiesError {
    #[error("invalid SELFIES symbol '{symbol}' at index {index}")]
    Symbol { index: usize, symbol: String },
    #[error("malformed SELFIES string at byte {position}: {reason}")]
    Malformed { position: usize, reason: String },
    #[error("atom {atom} cannot be encoded: {reason}")]
    Unsupported { atom: usize, reason: String },
    #[error(transparent)]
    Smiles(#[from] ParseError),
}

/// A SELFIES string as its list of symbols. Fragment separators are kept
/// as `"."` entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SelfiesString {
    symbols: Vec<String>,
}

impl SelfiesString {
    pub fn from_symbols(symbols: Vec<String>) -> Self {
        SelfiesString { symbols }
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl FromStr for SelfiesString {
    type Err = SelfiesError;

    /// Splits `[..]` symbols and `.` separators. Any other character
    /// outside brackets is rejected.
    fn from_str(s: &str) -> Result<Self, SelfiesError> {
        let mut symbols = Vec::new();
        let mut rest = s;
        let mut offset = 0;
        while let Some(c) = rest.chars().next() {
            match c {
                '.' => {
                    symbols.push(".".to_string());
                    rest = &rest[1..];
                    offset += 1;
                }
                '[' => {
                    let Some(end) = rest.find(']') else {
                        return Err(SelfiesError::Malformed {
                            position: offset,
                            reason: "unclosed '['".into(),
                        });
                    };
                    symbols.push(rest[..=end].to_string());
                    rest = &rest[end + 1..];
                    offset += end + 1;
                }
                other => {
                    return Err(SelfiesError::Malformed {
                        position: offset,
                        reason: format!("unexpected character '{}' outside brackets", other),
                    })
                }
            }
        }
        Ok(SelfiesString { symbols })
    }
}

impl fmt::Display for SelfiesString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            f.write_str(s)?;
        }
        Ok(())
    }
}

/// SMILES to SELFIES, preserving the atom order of the input string.
pub fn smiles_to_selfies(smiles: &str) -> Result<String, SelfiesError> {
    let m = parse_smiles(smiles)?;
    Ok(encode_selfies(&m)?.to_string())
}

/// SELFIES to canonical SMILES.
pub fn selfies_to_smiles(selfies: &str) -> Result<String, SelfiesError> {
    let s: SelfiesString = selfies.parse()?;
    Ok(decode_selfies(&s)?.to_canonical_smiles())
}

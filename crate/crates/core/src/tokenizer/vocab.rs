//! Token inventories and id assignment.
//!
//! Text tokens come from an external `token<TAB>id` file and keep their ids.
//! Everything the gym adds is appended after the largest text id in a fixed
//! order: missing chat markers, 256 byte-fallback tokens, format tags, and
//! finally the chemical tokens as one contiguous range.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Range;
use std::path::Path;

use thiserror::Error;

use crate::chem::Element;
use crate::selfies::semantic_alphabet;
use crate::selfies::symbols::atom_symbol_text;
use crate::task::Format;

pub const IM_START: &str = "<|im_start|>";
pub const IM_END: &str = "<|im_end|>";

/// One-letter codes of the twenty standard amino acids.
pub const AMINO_ACIDS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// Heavy-atom names occurring in the standard residues.
pub const ATOM_NAMES: &[&str] = &[
    "N", "CA", "C", "O", "OXT", "CB", "CG", "CG1", "CG2", "CD", "CD1", "CD2", "CE", "CE1", "CE2", "CE3", "CZ",
    "CZ2", "CZ3", "CH2", "NE", "NE1", "NE2", "ND1", "ND2", "NZ", "NH1", "NH2", "OG", "OG1", "OD1", "OD2", "OE1",
    "OE2", "OH", "SD", "SG",
];

/// Isotope labels given their own SELFIES tokens.
const ISOTOPES: &[(&str, u16)] = &[
    ("H", 2),
    ("H", 3),
    ("C", 11),
    ("C", 13),
    ("C", 14),
    ("N", 15),
    ("O", 17),
    ("O", 18),
    ("F", 18),
    ("P", 32),
    ("S", 35),
    ("Cl", 36),
    ("Br", 76),
    ("I", 123),
    ("I", 125),
    ("I", 131),
];

const FASTA_LETTERS: &str = "ABCDEFGHIKLMNOPQRSTUVWXYZ*-";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("token id {id} assigned twice")]
    DuplicateId { id: u32 },
    #[error("token {token:?} listed twice")]
    DuplicateToken { token: String },
    #[error("{format} symbol inventory is not uniquely decodable: {witness:?} has two segmentations")]
    Ambiguous { format: Format, witness: String },
    #[error("token id space exhausted")]
    Overflow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Text,
    Byte(u8),
    Tag { format: Format, close: bool },
    Chem(Format),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Display name, e.g. `sm_Cl` or `<smiles>`.
    pub name: String,
    /// Exact source text the token stands for (empty for byte tokens).
    pub surface: String,
    pub kind: TokenKind,
}

/// Surface-to-id table with longest-match lookup.
#[derive(Debug, Clone, Default)]
pub(crate) struct Table {
    map: HashMap<String, u32>,
    max_len: usize,
}

impl Table {
    fn insert(&mut self, surface: String, id: u32) {
        self.max_len = self.max_len.max(surface.len());
        self.map.insert(surface, id);
    }

    pub(crate) fn get(&self, surface: &str) -> Option<u32> {
        self.map.get(surface).copied()
    }

    /// Longest entry that is a prefix of `s`, as (id, byte length).
    pub(crate) fn longest(&self, s: &str) -> Option<(u32, usize)> {
        let top = self.max_len.min(s.len());
        (1..=top)
            .rev()
            .filter(|&n| s.is_char_boundary(n))
            .find_map(|n| self.map.get(&s[..n]).map(|&id| (id, n)))
    }
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: HashMap<u32, Token>,
    by_name: HashMap<String, u32>,
    pub(crate) text: Table,
    bytes: Vec<u32>,
    tags: HashMap<(Format, bool), u32>,
    pub(crate) chem: HashMap<Format, Table>,
    chem_range: Range<u32>,
}

impl Vocabulary {
    /// Builds the full vocabulary around an externally supplied text
    /// inventory of (surface, id) pairs.
    pub fn new(text_tokens: Vec<(String, u32)>) -> Result<Vocabulary, VocabError> {
        let mut v = Vocabulary {
            tokens: HashMap::new(),
            by_name: HashMap::new(),
            text: Table::default(),
            bytes: Vec::with_capacity(256),
            tags: HashMap::new(),
            chem: HashMap::new(),
            chem_range: 0..0,
        };
        let mut next = 0u32;
        for (surface, id) in text_tokens {
            if v.text.get(&surface).is_some() {
                return Err(VocabError::DuplicateToken { token: surface });
            }
            next = next.max(id.checked_add(1).ok_or(VocabError::Overflow)?);
            v.add(id, surface.clone(), surface.clone(), TokenKind::Text)?;
            v.text.insert(surface, id);
        }
        for marker in [IM_START, IM_END] {
            if v.text.get(marker).is_none() {
                v.add(next, marker.into(), marker.into(), TokenKind::Text)?;
                v.text.insert(marker.into(), next);
                next += 1;
            }
        }
        for b in 0..=255u8 {
            v.add(next, format!("<0x{b:02X}>"), String::new(), TokenKind::Byte(b))?;
            v.bytes.push(next);
            next += 1;
        }
        for format in Format::ALL {
            for close in [false, true] {
                let tag = if close { format.close_tag() } else { format.open_tag() };
                v.add(next, tag.clone(), tag, TokenKind::Tag { format, close })?;
                v.tags.insert((format, close), next);
                next += 1;
            }
        }
        let start = next;
        for (format, prefix, symbols) in chemical_inventories() {
            check_uniquely_decodable(format, &symbols)?;
            let mut table = Table::default();
            for surface in symbols {
                let name = match format {
                    Format::Protein => surface.trim_start_matches('<').trim_end_matches('>').to_string(),
                    _ => format!("{prefix}{surface}"),
                };
                v.add(next, name, surface.clone(), TokenKind::Chem(format))?;
                table.insert(surface, next);
                next = next.checked_add(1).ok_or(VocabError::Overflow)?;
            }
            v.chem.insert(format, table);
        }
        v.chem_range = start..next;
        Ok(v)
    }

    /// Vocabulary over the built-in text inventory.
    pub fn builtin() -> Vocabulary {
        let tokens = default_text_tokens().into_iter().zip(0u32..).collect();
        Vocabulary::new(tokens).expect("built-in inventory is consistent")
    }

    /// Reads a `token<TAB>id` text inventory. `\n`, `\t`, `\r` and `\\`
    /// escapes are recognised in the token field.
    pub fn parse_text_inventory(src: &str) -> Result<Vec<(String, u32)>, VocabError> {
        let mut out = Vec::new();
        for (i, line) in src.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (token, id) = line.rsplit_once('\t').ok_or_else(|| VocabError::Line {
                line: i + 1,
                reason: "expected token<TAB>id".into(),
            })?;
            let id = id.trim().parse::<u32>().map_err(|e| VocabError::Line {
                line: i + 1,
                reason: format!("bad id: {e}"),
            })?;
            out.push((unescape(token), id));
        }
        Ok(out)
    }

    pub fn from_text_file(path: &Path) -> Result<Vocabulary, VocabError> {
        let src = std::fs::read_to_string(path)?;
        Vocabulary::new(Vocabulary::parse_text_inventory(&src)?)
    }

    fn add(&mut self, id: u32, name: String, surface: String, kind: TokenKind) -> Result<(), VocabError> {
        if self.tokens.contains_key(&id) {
            return Err(VocabError::DuplicateId { id });
        }
        // Text tokens are keyed by surface; a text token spelled like a
        // generated name keeps the text meaning for name lookups.
        self.by_name.entry(name.clone()).or_insert(id);
        self.tokens.insert(id, Token { name, surface, kind });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> Option<&Token> {
        self.tokens.get(&id)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.tokens.get(&id).map(|t| t.name.as_str())
    }

    /// Id of the token with this display name.
    pub fn id(&self, name: &str) -> Option<u32> {
        self.by_name.get(name).copied()
    }

    pub fn byte_id(&self, b: u8) -> u32 {
        self.bytes[b as usize]
    }

    pub fn tag_id(&self, format: Format, close: bool) -> u32 {
        self.tags[&(format, close)]
    }

    /// Id of a chemical surface symbol in one format.
    pub fn chem_id(&self, format: Format, surface: &str) -> Option<u32> {
        self.chem.get(&format)?.get(surface)
    }

    /// The contiguous id range holding every chemical token.
    pub fn chem_range(&self) -> Range<u32> {
        self.chem_range.clone()
    }

    /// Every token as `name<TAB>id`, in id order, with the escapes that
    /// `parse_text_inventory` reads.
    pub fn to_tsv(&self) -> String {
        let mut ids: Vec<&u32> = self.tokens.keys().collect();
        ids.sort();
        let mut out = String::new();
        for id in ids {
            out.push_str(&escape(&self.tokens[id].name));
            out.push('\t');
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Printable ASCII, whitespace and a few frequent pieces of chat markup.
pub fn default_text_tokens() -> Vec<String> {
    let mut out: Vec<String> = (0x20u8..0x7f).map(|b| (b as char).to_string()).collect();
    out.extend(["\n", "\t"].map(String::from));
    out.extend(
        [
            "<think>", "</think>", "<answer>", "</answer>", "user", "assistant", "system", " the", " of", " and",
            " is", " a", " molecule", " Molecule", " SMILES", " SELFIES", " protein", " the molecule", "What",
            " What", "?", " True", " False", "True", "False", " Answer", "Answer", "  ", "    ",
        ]
        .map(String::from),
    );
    let mut seen = HashSet::new();
    out.retain(|t| seen.insert(t.clone()));
    out
}

/// Every symbol a SMILES writer or parser can produce, split at symbol
/// granularity: atoms, bracket contents, bonds, branches and ring labels.
pub fn smiles_symbols() -> Vec<String> {
    let mut set = BTreeSet::new();
    for e in Element::all() {
        set.insert(e.symbol().to_string());
        if let Some(a) = e.aromatic_symbol() {
            set.insert(a.to_string());
        }
    }
    for s in ["(", ")", "[", "]", "=", "#", "-", ":", "/", "\\", ".", "+", "@"] {
        set.insert(s.to_string());
    }
    for d in 0..10 {
        set.insert(d.to_string());
    }
    for d in 10..100 {
        set.insert(format!("%{d}"));
    }
    set.into_iter().collect()
}

/// SELFIES symbols: the robust alphabet plus bracket forms with explicit
/// hydrogens, charges and common isotopes.
pub fn selfies_symbols() -> Vec<String> {
    let mut set: BTreeSet<String> = semantic_alphabet().into_iter().collect();
    for e in Element::all() {
        for charge in -3i8..=3 {
            if e.max_valence(charge).is_none() {
                continue;
            }
            for bond in 1..=3u8 {
                let hs = std::iter::once(None).chain((0..=4).map(Some));
                for h in hs {
                    if let Some(s) = atom_symbol_text(bond, e, charge, h, None) {
                        set.insert(s);
                    }
                }
            }
        }
    }
    for &(sym, iso) in ISOTOPES {
        let e = Element::from_symbol(sym).expect("isotope element is supported");
        for charge in -1i8..=1 {
            for bond in 1..=3u8 {
                for h in 0..=4 {
                    if let Some(s) = atom_symbol_text(bond, e, charge, Some(h), Some(iso)) {
                        set.insert(s);
                    }
                }
            }
        }
    }
    for l in 1..=3 {
        for p in ["", "=", "#"] {
            set.insert(format!("[{p}Ring{l}]"));
            set.insert(format!("[{p}Branch{l}]"));
        }
    }
    set.insert("[nop]".into());
    set.insert(".".into());
    set.into_iter().collect()
}

fn chemical_inventories() -> Vec<(Format, &'static str, Vec<String>)> {
    let fasta = FASTA_LETTERS.chars().map(|c| c.to_string()).collect();
    let mut protein: Vec<String> = AMINO_ACIDS.chars().map(|c| format!("<am_{c}>")).collect();
    protein.extend(ATOM_NAMES.iter().map(|n| format!("<atom_name_{n}>")));
    vec![
        (Format::Smiles, "sm_", smiles_symbols()),
        (Format::Selfies, "sf_", selfies_symbols()),
        (Format::Fasta, "fasta_", fasta),
        (Format::Protein, "", protein),
    ]
}

/// Sardinas-Patterson test: fails with a witness when some string has two
/// segmentations over `code`.
pub fn check_uniquely_decodable(format: Format, code: &[String]) -> Result<(), VocabError> {
    let set: HashSet<&str> = code.iter().map(String::as_str).collect();
    let mut sorted: Vec<&str> = set.iter().copied().collect();
    sorted.sort_unstable();

    // Codewords that are proper prefixes of `s`.
    let prefixes_of = |s: &str| -> Vec<usize> {
        (1..s.len())
            .filter(|&n| s.is_char_boundary(n) && set.contains(&s[..n]))
            .collect()
    };
    // Codewords that extend `s`.
    let extensions_of = |s: &str| -> Vec<String> {
        let from = sorted.partition_point(|w| *w < s);
        sorted[from..]
            .iter()
            .take_while(|w| w.starts_with(s))
            .filter(|w| w.len() > s.len())
            .map(|w| w[s.len()..].to_string())
            .collect()
    };

    let mut pending: Vec<String> = Vec::new();
    for w in &sorted {
        for n in prefixes_of(w) {
            pending.push(w[n..].to_string());
        }
    }
    let mut seen = HashSet::new();
    while let Some(s) = pending.pop() {
        if set.contains(s.as_str()) {
            return Err(VocabError::Ambiguous { format, witness: s });
        }
        if !seen.insert(s.clone()) {
            continue;
        }
        for n in prefixes_of(&s) {
            pending.push(s[n..].to_string());
        }
        pending.extend(extensions_of(&s));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sardinas_patterson() {
        assert!(check_uniquely_decodable(Format::Smiles, &code(&["C", "Cl", "l"])).is_err());
        assert!(check_uniquely_decodable(Format::Smiles, &code(&["a", "ab", "bc", "c"])).is_err());
        assert!(check_uniquely_decodable(Format::Smiles, &code(&["0", "01", "11"])).is_ok());
        assert!(check_uniquely_decodable(Format::Smiles, &code(&["C", "Cl", "Br", "B"])).is_ok());
        // Adding cobalt would make "Co" ambiguous with C + o.
        let mut smiles = smiles_symbols();
        smiles.push("Co".into());
        assert!(check_uniquely_decodable(Format::Smiles, &smiles).is_err());
    }

    #[test]
    fn ids_are_unique_and_chem_range_contiguous() {
        let v = Vocabulary::builtin();
        let r = v.chem_range();
        for id in r.clone() {
            assert!(matches!(v.token(id).unwrap().kind, TokenKind::Chem(_)));
        }
        let chem = v.tokens.values().filter(|t| matches!(t.kind, TokenKind::Chem(_))).count();
        assert_eq!(chem, r.len());
        assert_eq!(v.name(v.chem_id(Format::Smiles, "Cl").unwrap()), Some("sm_Cl"));
        assert_eq!(v.name(v.chem_id(Format::Protein, "<am_A>").unwrap()), Some("am_A"));
        assert_eq!(v.name(v.chem_id(Format::Protein, "<atom_name_CA>").unwrap()), Some("atom_name_CA"));
        assert_eq!(v.name(v.chem_id(Format::Selfies, "[=Branch1]").unwrap()), Some("sf_[=Branch1]"));
        assert_eq!(v.name(v.tag_id(Format::Smiles, true)), Some("</smiles>"));
    }

    #[test]
    fn inventory_file_round_trip() {
        let src = "a\t0\n\\n\t1\n\\\\\t2\nab\t7\n";
        let inv = Vocabulary::parse_text_inventory(src).unwrap();
        assert_eq!(inv[1], ("\n".to_string(), 1));
        assert_eq!(inv[2], ("\\".to_string(), 2));
        let v = Vocabulary::new(inv).unwrap();
        // Generated tokens start after the largest text id.
        assert_eq!(v.id(IM_START), Some(8));
        assert!(matches!(
            Vocabulary::new(vec![("a".into(), 0), ("b".into(), 0)]),
            Err(VocabError::DuplicateId { id: 0 })
        ));
        assert!(matches!(
            Vocabulary::parse_text_inventory("no tab here"),
            Err(VocabError::Line { line: 1, .. })
        ));
    }
}

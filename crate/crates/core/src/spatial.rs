//! Text layouts for 3D structures.
//!
//! A small-molecule conformer is its SMILES span followed by one coordinate
//! line per heavy atom, in the order the SMILES writes the atoms:
//!
//! ```text
//! <smiles>CCO</smiles>
//! -1.220 0.000 0.000
//! 0.000 0.540 0.000
//! 1.160 -0.300 0.000
//! ```
//!
//! A protein is laid out residue by residue inside a `<protein>` span, one
//! atom per line, the residue marker leading its first atom:
//!
//! ```text
//! <protein>
//! <am_A><atom_name_N> 0.000 0.000 0.000
//! <atom_name_CA> 1.458 0.000 0.000
//! </protein>
//! ```
//!
//! Coordinates are Ångström with a fixed number of decimals. Hydrogens are
//! never written and never produced.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::chem::{parse_smiles, AtomSpec, BondOrder, BondSpec, Element, Molecule, ParseError};
use crate::task::Format;
use crate::tokenizer::vocab::{AMINO_ACIDS, ATOM_NAMES};

/// Decimal places used unless a caller asks otherwise.
pub const DEFAULT_PRECISION: usize = 3;
/// Coordinates must round to fewer than five integer digits.
const MAX_ABS: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpatialError {
    #[error("coordinate {value} does not fit the fixed-width field")]
    PrecisionOverflow { value: f64 },
    #[error("precision {0} is outside 0..=6")]
    BadPrecision(usize),
    #[error("{atoms} atoms but {coordinates} coordinate lines")]
    CountMismatch { atoms: usize, coordinates: usize },
    #[error("hydrogen atom {atom} in a heavy-atom structure")]
    Hydrogen { atom: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown residue {0:?}")]
    UnknownResidue(String),
    #[error("unknown atom name {0:?}")]
    UnknownAtomName(String),
    #[error("residue {0} has no atoms")]
    EmptyResidue(usize),
    #[error(transparent)]
    Smiles(#[from] ParseError),
}

/// Heavy-atom coordinates of a molecule, one triple per atom in atom-index
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Conformer {
    molecule: Molecule,
    coords: Vec<[f64; 3]>,
}

impl Conformer {
    pub fn new(molecule: Molecule, coords: Vec<[f64; 3]>) -> Result<Conformer, SpatialError> {
        if let Some(atom) = molecule.atoms().iter().position(|a| a.element == Element::H) {
            return Err(SpatialError::Hydrogen { atom });
        }
        if coords.len() != molecule.atoms().len() {
            return Err(SpatialError::CountMismatch {
                atoms: molecule.atoms().len(),
                coordinates: coords.len(),
            });
        }
        Ok(Conformer { molecule, coords })
    }

    pub fn molecule(&self) -> &Molecule {
        &self.molecule
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    /// Decoded conformers carry no hydrogen positions.
    pub fn is_heavy_atom_only(&self) -> bool {
        true
    }
}

fn check_precision(precision: usize) -> Result<(), SpatialError> {
    if precision > 6 {
        return Err(SpatialError::BadPrecision(precision));
    }
    Ok(())
}

fn format_coord(value: f64, precision: usize) -> Result<String, SpatialError> {
    if !value.is_finite() || value.abs() >= MAX_ABS {
        return Err(SpatialError::PrecisionOverflow { value });
    }
    let s = format!("{value:.precision$}");
    let digits = s.trim_start_matches('-').split('.').next().unwrap_or("");
    if digits.len() > 4 {
        return Err(SpatialError::PrecisionOverflow { value });
    }
    // "-0.000" and "0.000" are the same field.
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        return Ok(s[1..].to_string());
    }
    Ok(s)
}

fn format_triple(xyz: &[f64; 3], precision: usize) -> Result<String, SpatialError> {
    Ok(format!(
        "{} {} {}",
        format_coord(xyz[0], precision)?,
        format_coord(xyz[1], precision)?,
        format_coord(xyz[2], precision)?
    ))
}

fn parse_triple(s: &str, line: usize) -> Result<[f64; 3], SpatialError> {
    let malformed = |reason: String| SpatialError::Malformed { line, reason };
    let fields: Vec<&str> = s.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(malformed(format!("expected 3 coordinates, found {}", fields.len())));
    }
    let mut out = [0.0; 3];
    for (slot, field) in out.iter_mut().zip(&fields) {
        *slot = field
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| malformed(format!("bad coordinate {field:?}")))?;
    }
    Ok(out)
}

/// Writes the canonical SMILES of the conformer's molecule and the
/// coordinates in its writing order.
pub fn encode_conformer(c: &Conformer, precision: usize) -> Result<String, SpatialError> {
    check_precision(precision)?;
    let (smiles, order) = c.molecule.canonical_smiles_with_order();
    let mut out = Format::Smiles.wrap(&smiles);
    for &atom in &order {
        out.push('\n');
        out.push_str(&format_triple(&c.coords[atom], precision)?);
    }
    Ok(out)
}

/// Reads a conformer block. Atom `i` of the returned molecule is the
/// `i`-th atom written in the SMILES and takes the `i`-th coordinate line.
pub fn decode_conformer(text: &str) -> Result<Conformer, SpatialError> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    let smiles = first
        .trim()
        .strip_prefix("<smiles>")
        .and_then(|s| s.strip_suffix("</smiles>"))
        .ok_or_else(|| SpatialError::Malformed {
            line: 1,
            reason: "expected a <smiles> span".into(),
        })?;
    let molecule = parse_smiles(smiles)?;
    let coords = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_triple(l, i + 2))
        .collect::<Result<Vec<_>, _>>()?;
    Conformer::new(molecule, coords)
}

/// Reads the atom and bond blocks of a V2000 mol block. Hydrogen atoms are
/// dropped and counted onto their heavy neighbours; charges come from the
/// atom-block charge field. Aromatic (type 4) bonds are not supported.
pub fn conformer_from_molblock(text: &str) -> Result<Conformer, SpatialError> {
    let lines: Vec<&str> = text.lines().collect();
    let malformed = |line: usize, reason: &str| SpatialError::Malformed {
        line: line + 1,
        reason: reason.to_string(),
    };
    let counts = lines.get(3).ok_or_else(|| malformed(3, "missing counts line"))?;
    let field = |s: &str, a: usize, b: usize| s.get(a..b.min(s.len())).unwrap_or("").trim().to_string();
    let n_atoms: usize = field(counts, 0, 3).parse().map_err(|_| malformed(3, "bad atom count"))?;
    let n_bonds: usize = field(counts, 3, 6).parse().map_err(|_| malformed(3, "bad bond count"))?;

    let mut atoms = Vec::new();
    for i in 0..n_atoms {
        let l = lines.get(4 + i).ok_or_else(|| malformed(4 + i, "missing atom line"))?;
        let xyz = parse_triple(&format!("{} {} {}", field(l, 0, 10), field(l, 10, 20), field(l, 20, 30)), 5 + i)?;
        let symbol = field(l, 31, 34);
        let element = Element::from_symbol(&symbol).ok_or_else(|| malformed(4 + i, "unsupported element"))?;
        let charge = match field(l, 36, 39).as_str() {
            "" | "0" => 0,
            "1" => 3,
            "2" => 2,
            "3" => 1,
            "5" => -1,
            "6" => -2,
            "7" => -3,
            _ => return Err(malformed(4 + i, "bad charge field")),
        };
        atoms.push((element, charge, xyz));
    }
    let mut bonds = Vec::new();
    for i in 0..n_bonds {
        let at = 4 + n_atoms + i;
        let l = lines.get(at).ok_or_else(|| malformed(at, "missing bond line"))?;
        let a: usize = field(l, 0, 3).parse().map_err(|_| malformed(at, "bad bond atom"))?;
        let b: usize = field(l, 3, 6).parse().map_err(|_| malformed(at, "bad bond atom"))?;
        let order: u8 = field(l, 6, 9).parse().map_err(|_| malformed(at, "bad bond type"))?;
        if !(1..=3).contains(&order) || a == 0 || b == 0 || a > n_atoms || b > n_atoms {
            return Err(malformed(at, "unsupported bond"));
        }
        bonds.push((a - 1, b - 1, order));
    }

    let explicit_h = atoms.iter().any(|a| a.0 == Element::H);
    let mut heavy_index = vec![usize::MAX; atoms.len()];
    let mut h_count = vec![0u8; atoms.len()];
    for &(a, b, _) in &bonds {
        if atoms[a].0 == Element::H {
            h_count[b] += 1;
        }
        if atoms[b].0 == Element::H {
            h_count[a] += 1;
        }
    }
    let mut specs = Vec::new();
    let mut coords = Vec::new();
    for (i, &(element, charge, xyz)) in atoms.iter().enumerate() {
        if element == Element::H {
            continue;
        }
        heavy_index[i] = specs.len();
        let h = if explicit_h || charge != 0 || !element.is_organic() {
            Some(h_count[i])
        } else {
            None
        };
        specs.push(AtomSpec {
            element,
            charge,
            h_count: h,
            aromatic: false,
            isotope: None,
            chirality: None,
            position: i,
        });
        coords.push(xyz);
    }
    let bond_specs = bonds
        .iter()
        .enumerate()
        .filter(|(_, &(a, b, _))| heavy_index[a] != usize::MAX && heavy_index[b] != usize::MAX)
        .map(|(k, &(a, b, order))| BondSpec {
            a: heavy_index[a],
            b: heavy_index[b],
            order: BondOrder::from_kekule(order),
            stereo: None,
            keys: (k, k),
            closure: false,
        })
        .collect();
    Conformer::new(Molecule::assemble(specs, bond_specs)?, coords)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProteinAtom {
    pub name: String,
    pub xyz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    /// One-letter amino-acid code.
    pub code: char,
    pub atoms: Vec<ProteinAtom>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProteinStructure {
    pub residues: Vec<Residue>,
}

impl ProteinStructure {
    pub fn validate(&self) -> Result<(), SpatialError> {
        for (i, r) in self.residues.iter().enumerate() {
            if !AMINO_ACIDS.contains(r.code) {
                return Err(SpatialError::UnknownResidue(r.code.to_string()));
            }
            if r.atoms.is_empty() {
                return Err(SpatialError::EmptyResidue(i));
            }
            for a in &r.atoms {
                if !ATOM_NAMES.contains(&a.name.as_str()) {
                    return Err(SpatialError::UnknownAtomName(a.name.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn atom_count(&self) -> usize {
        self.residues.iter().map(|r| r.atoms.len()).sum()
    }
}

pub fn encode_protein(p: &ProteinStructure, precision: usize) -> Result<String, SpatialError> {
    check_precision(precision)?;
    p.validate()?;
    let mut out = Format::Protein.open_tag();
    for r in &p.residues {
        for (k, a) in r.atoms.iter().enumerate() {
            out.push('\n');
            if k == 0 {
                out.push_str(&format!("<am_{}>", r.code));
            }
            out.push_str(&format!("<atom_name_{}> {}", a.name, format_triple(&a.xyz, precision)?));
        }
    }
    out.push('\n');
    out.push_str(&Format::Protein.close_tag());
    Ok(out)
}

pub fn decode_protein(text: &str) -> Result<ProteinStructure, SpatialError> {
    let mut p = ProteinStructure::default();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == Format::Protein.open_tag() => {}
        _ => {
            return Err(SpatialError::Malformed {
                line: 1,
                reason: "expected <protein>".into(),
            })
        }
    }
    let mut closed = false;
    for (i, line) in lines {
        let line_no = i + 1;
        if closed {
            return Err(SpatialError::Malformed {
                line: line_no,
                reason: "text after </protein>".into(),
            });
        }
        let mut rest = line.trim();
        if rest == Format::Protein.close_tag() {
            closed = true;
            continue;
        }
        if let Some(after) = rest.strip_prefix("<am_") {
            let (code, tail) = after.split_once('>').ok_or_else(|| SpatialError::Malformed {
                line: line_no,
                reason: "unterminated residue marker".into(),
            })?;
            let mut chars = code.chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) if AMINO_ACIDS.contains(c) => c,
                _ => return Err(SpatialError::UnknownResidue(code.to_string())),
            };
            p.residues.push(Residue { code: c, atoms: Vec::new() });
            rest = tail;
        }
        let after = rest.strip_prefix("<atom_name_").ok_or_else(|| SpatialError::Malformed {
            line: line_no,
            reason: "expected an atom-name marker".into(),
        })?;
        let (name, coords) = after.split_once('>').ok_or_else(|| SpatialError::Malformed {
            line: line_no,
            reason: "unterminated atom-name marker".into(),
        })?;
        if !ATOM_NAMES.contains(&name) {
            return Err(SpatialError::UnknownAtomName(name.to_string()));
        }
        let residue = p.residues.last_mut().ok_or_else(|| SpatialError::Malformed {
            line: line_no,
            reason: "atom before any residue marker".into(),
        })?;
        residue.atoms.push(ProteinAtom {
            name: name.to_string(),
            xyz: parse_triple(coords, line_no)?,
        });
    }
    if !closed {
        return Err(SpatialError::Malformed {
            line: text.lines().count(),
            reason: "missing </protein>".into(),
        });
    }
    Ok(p)
}

fn one_letter(three: &str) -> Option<char> {
    const CODES: [(&str, char); 20] = [
        ("ALA", 'A'),
        ("CYS", 'C'),
        ("ASP", 'D'),
        ("GLU", 'E'),
        ("PHE", 'F'),
        ("GLY", 'G'),
        ("HIS", 'H'),
        ("ILE", 'I'),
        ("LYS", 'K'),
        ("LEU", 'L'),
        ("MET", 'M'),
        ("ASN", 'N'),
        ("PRO", 'P'),
        ("GLN", 'Q'),
        ("ARG", 'R'),
        ("SER", 'S'),
        ("THR", 'T'),
        ("VAL", 'V'),
        ("TRP", 'W'),
        ("TYR", 'Y'),
    ];
    CODES.iter().find(|(t, _)| *t == three).map(|&(_, c)| c)
}

/// Reads `ATOM` records of a PDB file (fixed columns). Hydrogens are
/// skipped; residues are grouped by chain, sequence number and insertion
/// code in file order.
pub fn protein_from_pdb(text: &str) -> Result<ProteinStructure, SpatialError> {
    let mut p = ProteinStructure::default();
    let mut last_key: Option<(String, String)> = None;
    for (i, line) in text.lines().enumerate() {
        if !line.starts_with("ATOM") {
            continue;
        }
        let col = |a: usize, b: usize| line.get(a..b.min(line.len())).unwrap_or("").trim();
        let name = col(12, 16);
        let element = col(76, 78);
        if element == "H" || (element.is_empty() && name.starts_with('H')) {
            continue;
        }
        let res_name = col(17, 20);
        let code = one_letter(res_name).ok_or_else(|| SpatialError::UnknownResidue(res_name.to_string()))?;
        let xyz = parse_triple(&format!("{} {} {}", col(30, 38), col(38, 46), col(46, 54)), i + 1)?;
        let key = (col(21, 22).to_string(), format!("{}{}", col(22, 26), col(26, 27)));
        if last_key.as_ref() != Some(&key) {
            p.residues.push(Residue { code, atoms: Vec::new() });
            last_key = Some(key);
        }
        if !ATOM_NAMES.contains(&name) {
            return Err(SpatialError::UnknownAtomName(name.to_string()));
        }
        p.residues.last_mut().expect("residue pushed above").atoms.push(ProteinAtom {
            name: name.to_string(),
            xyz,
        });
    }
    Ok(p)
}

/// Protein coordinates keyed by residue index and atom name, handy for
/// comparing structures regardless of atom order within residues.
pub fn atom_map(p: &ProteinStructure) -> BTreeMap<(usize, String), [f64; 3]> {
    p.residues
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.atoms.iter().map(move |a| ((i, a.name.clone()), a.xyz)))
        .collect()
}

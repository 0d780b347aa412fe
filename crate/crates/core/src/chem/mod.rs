//! Molecular graphs: SMILES parsing with valence checking, canonical and
//! randomized serialization, circular fingerprints and Tanimoto similarity.
//!
//! Bonds keep both the order as written (which may be aromatic) and a Kekulé
//! order assigned at construction time, so every molecule is kekulized once
//! and downstream code (SELFIES, canonical ranking) never has to repeat it.

mod canon;
mod element;
mod fingerprint;
mod kekule;
mod parse;
mod write;

use std::fmt;

use rand::Rng;
use thiserror::Error;

pub use element::{Element, UNBOUNDED};
pub use fingerprint::{circular_fingerprint, tanimoto, Fingerprint, FingerprintError};
pub use parse::parse_smiles;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("valence error at atom {atom}: {reason}")]
    Valence { atom: usize, reason: String },
    #[error("unsupported feature at position {position}: {feature}")]
    Unsupported { position: usize, feature: String },
}

/// Tetrahedral chirality marker as written (`@` is counter-clockwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chirality {
    Cw,
    Ccw,
}

/// Directional single-bond marker (`/` or `\`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondStereo {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub(crate) fn kekule_value(self) -> Option<u8> {
        match self {
            BondOrder::Single => Some(1),
            BondOrder::Double => Some(2),
            BondOrder::Triple => Some(3),
            BondOrder::Aromatic => None,
        }
    }

    pub(crate) fn from_kekule(order: u8) -> BondOrder {
        match order {
            1 => BondOrder::Single,
            2 => BondOrder::Double,
            _ => BondOrder::Triple,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    /// Total attached hydrogens not present as explicit graph atoms.
    pub h_count: u8,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub chirality: Option<Chirality>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    pub atoms: (usize, usize),
    /// Order as written; aromatic bonds are kept aromatic.
    pub order: BondOrder,
    /// Kekulé order (1, 2 or 3) assigned during construction.
    pub kekule: u8,
    pub stereo: Option<BondStereo>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.atoms.0 == atom {
            self.atoms.1
        } else {
            self.atoms.0
        }
    }
}

/// Atom description used while a graph is being assembled. `h_count` of
/// `None` requests the implicit-hydrogen rule of the organic subset.
#[derive(Debug, Clone)]
pub(crate) struct AtomSpec {
    pub element: Element,
    pub charge: i8,
    pub h_count: Option<u8>,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub chirality: Option<Chirality>,
    /// Source position for error reporting.
    pub position: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BondSpec {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: Option<BondStereo>,
    /// Where the bond was written, seen from `a` and from `b`. Orders each
    /// atom's outgoing bonds.
    pub keys: (usize, usize),
    /// Written as a ring closure rather than along the chain from `a` to `b`.
    pub closure: bool,
}

/// An attributed, validated molecular graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// (neighbor, bond index) per atom, in bond insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
    ring_bond: Vec<bool>,
    /// Outgoing bonds per atom in writing order: chain bonds to later atoms
    /// and ring closures at both ends.
    written: Vec<Vec<usize>>,
    /// Whether each bond was written as a ring closure.
    closure: Vec<bool>,
    /// Whether each atom's hydrogens were given explicitly (bracket form).
    bracketed: Vec<bool>,
}

impl Molecule {
    pub fn empty() -> Molecule {
        Molecule {
            atoms: Vec::new(),
            bonds: Vec::new(),
            adjacency: Vec::new(),
            ring_bond: Vec::new(),
            written: Vec::new(),
            closure: Vec::new(),
            bracketed: Vec::new(),
        }
    }

    /// Outgoing bonds of `atom` in the order they were written.
    pub(crate) fn written_bonds(&self, atom: usize) -> &[usize] {
        &self.written[atom]
    }

    /// Whether `atom` had explicit hydrogens (bracket form) when built.
    pub(crate) fn is_bracketed(&self, atom: usize) -> bool {
        self.bracketed[atom]
    }

    /// Whether `bond` was written as a ring closure.
    pub(crate) fn is_closure(&self, bond: usize) -> bool {
        self.closure[bond]
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn is_ring_bond(&self, bond: usize) -> bool {
        self.ring_bond[bond]
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != Element::H).count()
    }

    pub fn molecular_weight(&self) -> f64 {
        let h = Element::H.atomic_weight();
        self.atoms
            .iter()
            .map(|a| a.element.atomic_weight() + h * a.h_count as f64)
            .sum()
    }

    pub fn to_canonical_smiles(&self) -> String {
        write::canonical(self).0
    }

    /// Canonical SMILES plus the atom index written at each position.
    pub fn canonical_smiles_with_order(&self) -> (String, Vec<usize>) {
        write::canonical(self)
    }

    pub fn random_traversal_smiles<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        write::random(self, rng).0
    }

    /// SMILES written by depth-first traversal in atom-index order, keeping
    /// aromaticity as stored.
    pub fn to_smiles(&self) -> String {
        write::index_order(self).0
    }

    /// Builds a molecule from atom/bond specs: checks graph well-formedness,
    /// kekulizes aromatic systems, assigns implicit hydrogens and enforces
    /// the valence table.
    pub(crate) fn assemble(specs: Vec<AtomSpec>, bond_specs: Vec<BondSpec>) -> Result<Molecule, ParseError> {
        let n = specs.len();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut bonds: Vec<Bond> = Vec::with_capacity(bond_specs.len());
        for spec in &bond_specs {
            if spec.a >= n || spec.b >= n {
                return Err(ParseError::Syntax {
                    position: 0,
                    reason: format!("bond references missing atom ({}, {})", spec.a, spec.b),
                });
            }
            if spec.a == spec.b {
                return Err(ParseError::Syntax {
                    position: specs[spec.a].position,
                    reason: "bond from an atom to itself".into(),
                });
            }
            if spec.order == BondOrder::Aromatic && !(specs[spec.a].aromatic && specs[spec.b].aromatic) {
                return Err(ParseError::Unsupported {
                    position: specs[spec.b].position,
                    feature: "aromatic bond to a non-aromatic atom".into(),
                });
            }
            if adjacency[spec.a].iter().any(|&(v, _)| v == spec.b) {
                return Err(ParseError::Syntax {
                    position: specs[spec.b].position,
                    reason: format!("duplicate bond between atoms {} and {}", spec.a, spec.b),
                });
            }
            let idx = bonds.len();
            adjacency[spec.a].push((spec.b, idx));
            adjacency[spec.b].push((spec.a, idx));
            bonds.push(Bond {
                atoms: (spec.a, spec.b),
                order: spec.order,
                kekule: spec.order.kekule_value().unwrap_or(1),
                stereo: spec.stereo,
            });
        }
        let ring_bond = ring_bonds(n, &bonds, &adjacency);
        let mut keyed: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (idx, spec) in bond_specs.iter().enumerate() {
            keyed[spec.a].push((spec.keys.0, idx));
            if spec.closure {
                keyed[spec.b].push((spec.keys.1, idx));
            }
        }
        let written = keyed
            .into_iter()
            .map(|mut list| {
                list.sort_by_key(|&(key, _)| key);
                list.into_iter().map(|(_, b)| b).collect()
            })
            .collect();
        let closure = bond_specs.iter().map(|s| s.closure).collect();

        // Aromatic bonds outside rings are plain single bonds.
        for (i, bond) in bonds.iter_mut().enumerate() {
            if bond.order == BondOrder::Aromatic && !ring_bond[i] {
                bond.order = BondOrder::Single;
            }
        }
        for (i, spec) in specs.iter().enumerate() {
            if spec.aromatic && !adjacency[i].iter().any(|&(_, b)| ring_bond[b]) {
                return Err(ParseError::Valence {
                    atom: i,
                    reason: "aromatic atom outside a ring".into(),
                });
            }
        }

        kekule::kekulize(&specs, &mut bonds, &adjacency)?;

        let mut atoms = Vec::with_capacity(n);
        for (i, spec) in specs.iter().enumerate() {
            let sum: u32 = adjacency[i].iter().map(|&(_, b)| bonds[b].kekule as u32).sum();
            let h_count = match spec.h_count {
                Some(h) => h,
                None => implicit_hydrogens(spec.element, sum).ok_or_else(|| ParseError::Valence {
                    atom: i,
                    reason: format!("{} with bond order sum {} exceeds its valence", spec.element, sum),
                })?,
            };
            let max = spec.element.max_valence(spec.charge).ok_or_else(|| ParseError::Valence {
                atom: i,
                reason: format!("unsupported charge {:+} on {}", spec.charge, spec.element),
            })?;
            let total = sum + h_count as u32;
            if max != UNBOUNDED && total > max as u32 {
                return Err(ParseError::Valence {
                    atom: i,
                    reason: format!(
                        "{}{} has valence {} (maximum {})",
                        spec.element,
                        charge_suffix(spec.charge),
                        total,
                        max
                    ),
                });
            }
            atoms.push(Atom {
                element: spec.element,
                charge: spec.charge,
                h_count,
                aromatic: spec.aromatic,
                isotope: spec.isotope,
                chirality: spec.chirality,
            });
        }
        Ok(Molecule {
            atoms,
            bonds,
            adjacency,
            ring_bond,
            written,
            closure,
            bracketed: specs.iter().map(|s| s.h_count.is_some()).collect(),
        })
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_smiles())
    }
}

/// Implicit hydrogens for a bare organic-subset atom: the smallest default
/// valence that accommodates the bonds, minus the bond order sum.
pub(crate) fn implicit_hydrogens(element: Element, bond_sum: u32) -> Option<u8> {
    element
        .organic_valences()
        .iter()
        .find(|&&v| v as u32 >= bond_sum)
        .map(|&v| (v as u32 - bond_sum) as u8)
}

pub(crate) fn charge_suffix(charge: i8) -> String {
    match charge {
        0 => String::new(),
        1 => "+".into(),
        -1 => "-".into(),
        c if c > 0 => format!("+{c}"),
        c => format!("-{}", -c),
    }
}

/// Marks bonds that lie on a cycle (non-bridges).
fn ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut on_ring = vec![true; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    // Iterative Tarjan bridge search: (vertex, parent bond, next neighbor slot).
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.len().checked_sub(1) {
            let (v, parent_bond, slot) = stack[top];
            if slot < adjacency[v].len() {
                let (w, b) = adjacency[v][slot];
                stack[top].2 += 1;
                if b == parent_bond {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, b, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        on_ring[parent_bond] = false;
                    }
                }
            }
        }
    }
    on_ring
}

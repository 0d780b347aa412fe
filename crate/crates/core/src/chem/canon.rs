//! Rendering views and canonical atom ranking.
//!
//! A view fixes which atoms and bonds are written aromatic. The stored view
//! reproduces aromaticity as parsed; the canonical view marks exactly the
//! resonant bonds (see [`super::kekule::resonant_bonds`]), so every Kekulé
//! or aromatic writing of one molecule renders the same.

use super::kekule::{pruned, resonant_bonds};
use super::{implicit_hydrogens, Molecule};

#[derive(Debug, Clone)]
pub(crate) struct View {
    pub atom_aromatic: Vec<bool>,
    pub bond_aromatic: Vec<bool>,
    /// Whether each atom can be written without brackets.
    pub bare: Vec<bool>,
}

impl View {
    pub fn stored(m: &Molecule) -> View {
        let atom_aromatic = m.atoms().iter().map(|a| a.aromatic).collect();
        let bond_aromatic = m
            .bonds()
            .iter()
            .map(|b| b.order == super::BondOrder::Aromatic)
            .collect();
        settle(m, atom_aromatic, bond_aromatic)
    }

    pub fn canonical(m: &Molecule) -> View {
        let bond_aromatic = resonant_bonds(m);
        let mut atom_aromatic = vec![false; m.atoms().len()];
        for (b, bond) in m.bonds().iter().enumerate() {
            if bond_aromatic[b] {
                atom_aromatic[bond.atoms.0] = true;
                atom_aromatic[bond.atoms.1] = true;
            }
        }
        settle(m, atom_aromatic, bond_aromatic)
    }

    /// Integer bond label used for ranking and fingerprints.
    pub fn bond_code(&self, m: &Molecule, bond: usize) -> u8 {
        if self.bond_aromatic[bond] {
            4
        } else {
            m.bonds()[bond].kekule
        }
    }
}

enum Form {
    Bare,
    Bracket,
    Inconsistent,
}

/// Chooses bare or bracket form per atom so that re-parsing reproduces the
/// hydrogen counts and pi assignment. Aromatic regions that no form can
/// reproduce are written in Kekulé form instead.
fn settle(m: &Molecule, mut atom_aromatic: Vec<bool>, mut bond_aromatic: Vec<bool>) -> View {
    loop {
        let mut bare = vec![false; m.atoms().len()];
        let mut bad = None;
        for i in 0..m.atoms().len() {
            match atom_form(m, i, &atom_aromatic, &bond_aromatic) {
                Form::Bare => bare[i] = true,
                Form::Bracket => {}
                Form::Inconsistent => {
                    bad = Some(i);
                    break;
                }
            }
        }
        let Some(start) = bad else {
            return View {
                atom_aromatic,
                bond_aromatic,
                bare,
            };
        };
        // Drop aromaticity for the whole aromatic region containing `start`.
        let mut stack = vec![start];
        atom_aromatic[start] = false;
        while let Some(v) = stack.pop() {
            for &(w, b) in m.neighbors(v) {
                if bond_aromatic[b] {
                    bond_aromatic[b] = false;
                    if atom_aromatic[w] {
                        atom_aromatic[w] = false;
                        stack.push(w);
                    }
                }
            }
        }
    }
}

fn atom_form(m: &Molecule, i: usize, atom_aromatic: &[bool], bond_aromatic: &[bool]) -> Form {
    let atom = &m.atoms()[i];
    let mut nonaromatic = 0u32;
    let mut n_aromatic = 0u32;
    let mut has_pi = false;
    for &(_, b) in m.neighbors(i) {
        let k = m.bonds()[b].kekule as u32;
        if bond_aromatic[b] {
            n_aromatic += 1;
            has_pi |= k == 2;
        } else {
            nonaromatic += k;
        }
    }
    let plain = atom.charge == 0 && atom.isotope.is_none();
    if !atom_aromatic[i] {
        if plain && atom.element.is_organic() && implicit_hydrogens(atom.element, nonaromatic) == Some(atom.h_count) {
            return Form::Bare;
        }
        return Form::Bracket;
    }
    if plain && atom.element.aromatic_organic() {
        let kept = !pruned(atom.element, 0, None, nonaromatic, n_aromatic);
        let sum = nonaromatic + n_aromatic + kept as u32;
        if kept == has_pi && implicit_hydrogens(atom.element, sum) == Some(atom.h_count) {
            return Form::Bare;
        }
    }
    let kept = !pruned(atom.element, atom.charge, Some(atom.h_count), nonaromatic, n_aromatic);
    if kept == has_pi {
        Form::Bracket
    } else {
        Form::Inconsistent
    }
}

/// Canonical ranks: iterative refinement of atom invariants by sorted
/// neighborhoods, with ties broken by promoting one atom of the lowest tied
/// class and refining again. Ranks are a permutation of `0..n`.
pub(crate) fn canonical_ranks(m: &Molecule, view: &View) -> Vec<usize> {
    let n = m.atoms().len();
    // Degree leads so that traversals start from terminal atoms.
    let invariants: Vec<(usize, u8, u16, i8, u8, bool, usize)> = (0..n)
        .map(|i| {
            let a = &m.atoms()[i];
            let ring_bonds = m.neighbors(i).iter().filter(|&&(_, b)| m.is_ring_bond(b)).count();
            (
                m.neighbors(i).len(),
                a.element.atomic_number(),
                a.isotope.unwrap_or(0),
                a.charge,
                a.h_count,
                view.atom_aromatic[i],
                ring_bonds,
            )
        })
        .collect();
    let mut ranks = rank_by(&invariants);
    refine(m, view, &mut ranks);
    loop {
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let Some(tied) = (0..n).find(|&r| counts[r] > 1) else {
            return ranks;
        };
        // Promote every tied atom except the lowest-indexed one.
        let chosen = (0..n).find(|&i| ranks[i] == tied).unwrap();
        for (i, r) in ranks.iter_mut().enumerate() {
            if *r == tied && i != chosen {
                *r = tied + 1;
            }
        }
        refine(m, view, &mut ranks);
    }
}

/// Rank = number of atoms with a strictly smaller key.
fn rank_by<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    for (pos, &i) in idx.iter().enumerate() {
        ranks[i] = if pos > 0 && keys[idx[pos - 1]] == keys[i] {
            ranks[idx[pos - 1]]
        } else {
            pos
        };
    }
    ranks
}

fn distinct(ranks: &[usize]) -> usize {
    let mut seen = vec![false; ranks.len()];
    ranks.iter().filter(|&&r| !std::mem::replace(&mut seen[r], true)).count()
}

fn refine(m: &Molecule, view: &View, ranks: &mut Vec<usize>) {
    let mut classes = distinct(ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..ranks.len())
            .map(|i| {
                let mut env: Vec<(usize, u8)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(w, b)| (ranks[w], view.bond_code(m, b)))
                    .collect();
                env.sort_unstable();
                (ranks[i], env)
            })
            .collect();
        let next = rank_by(&keys);
        let next_classes = distinct(&next);
        *ranks = next;
        if next_classes == classes {
            return;
        }
        classes = next_classes;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn ranks_are_a_permutation() {
        for s in ["CC(=O)O", "c1ccccc1", "C1CC2CCC1C2", "[Na+].[Cl-]", "C"] {
            let m = parse_smiles(s).unwrap();
            let view = View::canonical(&m);
            let mut r = canonical_ranks(&m, &view);
            r.sort();
            assert_eq!(r, (0..m.atoms().len()).collect::<Vec<_>>(), "{s}");
        }
    }

    #[test]
    fn canonical_view_is_writing_independent() {
        let kek = parse_smiles("C1=CC=CC=C1O").unwrap();
        let aro = parse_smiles("Oc1ccccc1").unwrap();
        let count = |v: &View| v.atom_aromatic.iter().filter(|&&x| x).count();
        assert_eq!(count(&View::canonical(&kek)), 6);
        assert_eq!(count(&View::canonical(&aro)), 6);
        // stored view keeps the Kekulé writing
        assert_eq!(count(&View::stored(&kek)), 0);
    }

    #[test]
    fn bare_form_respects_hydrogen_counts() {
        let m = parse_smiles("[CH2]c1cc[nH]c1").unwrap();
        let v = View::stored(&m);
        assert!(!v.bare[0]);
        assert!(!v.bare[4]);
        assert!(v.bare[1]);
    }
}

//! Molecule to SELFIES.

use super::symbols::{atom_symbol_text, bonding_capacity, index_symbols};
use super::{SelfiesError, SelfiesString};
use crate::chem::Molecule;

/// Largest value three index symbols can hold.
const MAX_INDEX: usize = 16 * 16 * 16 - 1;

/// Encodes the Kekulé form of `m`, following the order in which its bonds
/// were written. Fails with `Unsupported` for atoms whose bonds exceed the
/// derivation capacity or whose symbol is outside the alphabet.
pub fn encode_selfies(m: &Molecule) -> Result<SelfiesString, SelfiesError> {
    let n = m.atoms().len();
    for i in 0..n {
        let atom = &m.atoms()[i];
        let h = m.is_bracketed(i).then_some(atom.h_count);
        let cap = bonding_capacity(atom.element, atom.charge, h).ok_or_else(|| SelfiesError::Unsupported {
            atom: i,
            reason: format!("charge {:+} on {}", atom.charge, atom.element),
        })?;
        let used: i32 = m.neighbors(i).iter().map(|&(_, b)| m.bonds()[b].kekule as i32).sum();
        if used > cap {
            return Err(SelfiesError::Unsupported {
                atom: i,
                reason: format!("{} bond orders exceed a capacity of {}", used, cap.max(0)),
            });
        }
    }
    let mut has_parent = vec![false; n];
    for a in 0..n {
        for &b in m.written_bonds(a) {
            if !m.is_closure(b) {
                has_parent[m.bonds()[b].other(a)] = true;
            }
        }
    }
    let mut symbols = Vec::new();
    for root in (0..n).filter(|&i| !has_parent[i]) {
        if !symbols.is_empty() {
            symbols.push(".".to_string());
        }
        fragment(m, None, root, &mut symbols)?;
    }
    Ok(SelfiesString::from_symbols(symbols))
}

fn bond_prefix(order: u8) -> &'static str {
    match order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

fn index_or_error(value: usize, atom: usize, what: &str) -> Result<Vec<&'static str>, SelfiesError> {
    if value > MAX_INDEX {
        return Err(SelfiesError::Unsupported {
            atom,
            reason: format!("{} of {} does not fit three index symbols", what, value + 1),
        });
    }
    Ok(index_symbols(value))
}

fn fragment(m: &Molecule, bond_in: Option<usize>, root: usize, out: &mut Vec<String>) -> Result<(), SelfiesError> {
    let (mut curr, mut bond_in) = (root, bond_in);
    loop {
        let atom = &m.atoms()[curr];
        let order = bond_in.map_or(1, |b| m.bonds()[b].kekule);
        let h = m.is_bracketed(curr).then_some(atom.h_count);
        let symbol = atom_symbol_text(order, atom.element, atom.charge, h, atom.isotope).ok_or_else(|| {
            SelfiesError::Unsupported {
                atom: curr,
                reason: "atom symbol outside the SELFIES alphabet".into(),
            }
        })?;
        out.push(symbol);

        let outs = m.written_bonds(curr);
        let mut next = None;
        for (i, &b) in outs.iter().enumerate() {
            let other = m.bonds()[b].other(curr);
            if m.is_closure(b) {
                if curr < other {
                    continue;
                }
                let q = index_or_error(curr - other - 1, curr, "ring span")?;
                out.push(format!("[{}Ring{}]", bond_prefix(m.bonds()[b].kekule), q.len()));
                out.extend(q.iter().map(|s| s.to_string()));
            } else if i + 1 == outs.len() {
                next = Some((other, b));
            } else {
                let mut branch = Vec::new();
                fragment(m, Some(b), other, &mut branch)?;
                let q = index_or_error(branch.len() - 1, curr, "branch length")?;
                out.push(format!("[{}Branch{}]", bond_prefix(m.bonds()[b].kekule), q.len()));
                out.extend(q.iter().map(|s| s.to_string()));
                out.extend(branch);
            }
        }
        match next {
            Some((atom, b)) => {
                curr = atom;
                bond_in = Some(b);
            }
            None => return Ok(()),
        }
    }
}

//! Derivation state machine.
//!
//! The state is the number of bonds the previous atom can still make
//! (0 before the first atom of a fragment). Atom symbols bond to the
//! previous atom with their requested order truncated by the state and by
//! their own capacity; branches hand part of the state to a sub-derivation
//! of bounded length; ring symbols are recorded and closed after the whole
//! string is read, where there is room left on both ends.

use super::symbols::{branch_symbol, index_from_symbols, parse_atom_symbol, ring_symbol};
use super::{SelfiesError, SelfiesString};
use crate::chem::{AtomSpec, BondOrder, BondSpec, Molecule};

struct Stream<'a> {
    symbols: Vec<(usize, &'a str)>,
    next: usize,
}

impl<'a> Stream<'a> {
    fn pop(&mut self) -> Option<(usize, &'a str)> {
        let item = self.symbols.get(self.next).copied();
        if item.is_some() {
            self.next += 1;
        }
        item
    }
}

struct Frame {
    /// `None` once the derivation has terminated.
    state: Option<i32>,
    prev: Option<usize>,
    max_derive: usize,
    derived: usize,
}

struct Graph {
    atoms: Vec<AtomSpec>,
    capacity: Vec<i32>,
    bond_count: Vec<i32>,
    bonds: Vec<BondSpec>,
    /// Symbol position of each atom.
    origin: Vec<usize>,
}

impl Graph {
    fn find_bond(&self, a: usize, b: usize) -> Option<usize> {
        self.bonds
            .iter()
            .position(|s| (s.a == a && s.b == b) || (s.a == b && s.b == a))
    }
}

fn order_of(n: u8) -> BondOrder {
    BondOrder::from_kekule(n)
}

/// Decodes symbols into a molecule. Fails only on a symbol outside the
/// alphabet that the derivation actually reads.
pub fn decode_selfies(s: &SelfiesString) -> Result<Molecule, SelfiesError> {
    let mut g = Graph {
        atoms: Vec::new(),
        capacity: Vec::new(),
        bond_count: Vec::new(),
        bonds: Vec::new(),
        origin: Vec::new(),
    };
    // (left atom, right atom, order, ring symbol position)
    let mut rings: Vec<(usize, usize, u8, usize)> = Vec::new();

    let mut fragment: Vec<(usize, &str)> = Vec::new();
    let mut fragments = Vec::new();
    for (i, sym) in s.symbols().iter().enumerate() {
        if sym == "." {
            fragments.push(std::mem::take(&mut fragment));
        } else if sym != "[nop]" {
            fragment.push((i, sym.as_str()));
        }
    }
    fragments.push(fragment);

    for symbols in fragments {
        let mut stream = Stream { symbols, next: 0 };
        derive(&mut stream, &mut g, &mut rings)?;
    }

    for (l, r, order, at) in rings {
        if l == r {
            continue;
        }
        let lfree = g.capacity[l] - g.bond_count[l];
        let rfree = g.capacity[r] - g.bond_count[r];
        if lfree <= 0 || rfree <= 0 {
            continue;
        }
        let order = (order as i32).min(lfree).min(rfree);
        match g.find_bond(l, r) {
            Some(b) => {
                let old = g.bonds[b].order.kekule_value().unwrap() as i32;
                let new = (old + order).min(3);
                g.bonds[b].order = order_of(new as u8);
                g.bond_count[l] += new - old;
                g.bond_count[r] += new - old;
            }
            None => {
                g.bonds.push(BondSpec {
                    a: l,
                    b: r,
                    order: order_of(order as u8),
                    stereo: None,
                    keys: (g.origin[l], at),
                    closure: true,
                });
                g.bond_count[l] += order;
                g.bond_count[r] += order;
            }
        }
    }
    Ok(Molecule::assemble(g.atoms, g.bonds)?)
}

fn derive(stream: &mut Stream<'_>, g: &mut Graph, rings: &mut Vec<(usize, usize, u8, usize)>) -> Result<(), SelfiesError> {
    let mut frames = vec![Frame {
        state: Some(0),
        prev: None,
        max_derive: usize::MAX,
        derived: 0,
    }];
    while let Some(frame) = frames.last_mut() {
        let next = match frame.state {
            Some(_) if frame.derived < frame.max_derive => stream.pop(),
            _ => None,
        };
        let Some((index, symbol)) = next else {
            // Terminated or out of budget: skip whatever is left of it.
            while frame.derived < frame.max_derive && stream.pop().is_some() {
                frame.derived += 1;
            }
            let done = frames.pop().unwrap();
            if let Some(parent) = frames.last_mut() {
                parent.derived += done.derived;
            }
            continue;
        };
        frame.derived += 1;
        let state = frame.state.unwrap();
        let tail = symbol_tail(symbol);

        if tail == "ch" {
            let (btype, n) = branch_symbol(symbol).ok_or_else(|| bad(index, symbol))?;
            if state <= 1 {
                continue;
            }
            let init = (state - 1).min(btype as i32);
            frame.state = Some(state - init);
            let q = read_index(stream, n);
            frame.derived += n;
            let prev = frame.prev;
            frames.push(Frame {
                state: Some(init),
                prev,
                max_derive: q.saturating_add(1),
                derived: 0,
            });
        } else if tail == "ng" {
            let (rtype, n) = ring_symbol(symbol).ok_or_else(|| bad(index, symbol))?;
            if state == 0 {
                continue;
            }
            let order = (rtype as i32).min(state);
            let left = state - order;
            frame.state = (left > 0).then_some(left);
            let q = read_index(stream, n);
            frame.derived += n;
            let prev = frame.prev.expect("positive state implies a previous atom");
            let l = prev.saturating_sub(q.saturating_add(1));
            rings.push((l, prev, order as u8, index));
        } else if symbol.contains("eps") {
            frame.state = if state == 0 { Some(0) } else { None };
        } else {
            let atom = parse_atom_symbol(symbol).ok_or_else(|| bad(index, symbol))?;
            let order = if state == 0 { 0 } else { (atom.bond as i32).min(state).min(atom.capacity) };
            let left = atom.capacity - order;
            if order > 0 || state == 0 {
                let id = g.atoms.len();
                g.atoms.push(AtomSpec {
                    element: atom.element,
                    charge: atom.charge,
                    h_count: atom.h_count,
                    aromatic: false,
                    isotope: atom.isotope,
                    chirality: atom.chirality,
                    position: index,
                });
                g.capacity.push(atom.capacity);
                g.bond_count.push(order);
                g.origin.push(index);
                if order > 0 {
                    let p = frame.prev.expect("positive state implies a previous atom");
                    g.bond_count[p] += order;
                    g.bonds.push(BondSpec {
                        a: p,
                        b: id,
                        order: order_of(order as u8),
                        stereo: None,
                        keys: (index, index),
                        closure: false,
                    });
                }
                frame.prev = Some(id);
            }
            frame.state = (left > 0).then_some(left);
        }
    }
    Ok(())
}

/// Characters at positions -4..-2, which tell branch (`ch`) and ring (`ng`)
/// symbols apart from atoms.
fn symbol_tail(symbol: &str) -> &str {
    let len = symbol.len();
    let (start, end) = (len.saturating_sub(4), len.saturating_sub(2));
    symbol.get(start..end).unwrap_or("")
}

fn read_index(stream: &mut Stream<'_>, n: usize) -> usize {
    let digits: Vec<Option<&str>> = (0..n).map(|_| stream.pop().map(|(_, s)| s)).collect();
    index_from_symbols(&digits)
}

fn bad(index: usize, symbol: &str) -> SelfiesError {
    SelfiesError::Symbol {
        index,
        symbol: symbol.to_string(),
    }
}

//! Symbol grammar, index encoding and bonding capacities.

use crate::chem::{Chirality, Element, UNBOUNDED};

/// Symbols used as base-16 digits for branch lengths and ring offsets.
pub const INDEX_ALPHABET: [&str; 16] = [
    "[C]", "[Ring1]", "[Ring2]", "[Branch1]", "[=Branch1]", "[#Branch1]", "[Branch2]", "[=Branch2]", "[#Branch2]", "[O]",
    "[N]", "[=N]", "[=C]", "[#C]", "[S]", "[P]",
];

/// Reference bonding capacities; keys absent here get [`DEFAULT_CAPACITY`].
const CONSTRAINTS: &[(&str, i8, i32)] = &[
    ("H", 0, 1),
    ("F", 0, 1),
    ("Cl", 0, 1),
    ("Br", 0, 1),
    ("I", 0, 1),
    ("B", 0, 3),
    ("B", 1, 2),
    ("B", -1, 4),
    ("O", 0, 2),
    ("O", 1, 3),
    ("O", -1, 1),
    ("N", 0, 3),
    ("N", 1, 4),
    ("N", -1, 2),
    ("C", 0, 4),
    ("C", 1, 3),
    ("C", -1, 3),
    ("P", 0, 5),
    ("P", 1, 4),
    ("P", -1, 6),
    ("S", 0, 6),
    ("S", 1, 5),
    ("S", -1, 5),
];

const DEFAULT_CAPACITY: i32 = 8;

const ORGANIC: [&str; 10] = ["B", "C", "N", "O", "S", "P", "F", "Cl", "Br", "I"];

/// Number of bonds an atom may form in a derivation: the reference
/// constraint, capped by the valence table, minus explicit hydrogens.
/// `None` when the charge is outside the valence table.
pub fn bonding_capacity(element: Element, charge: i8, h_count: Option<u8>) -> Option<i32> {
    let reference = CONSTRAINTS
        .iter()
        .find(|&&(sym, q, _)| sym == element.symbol() && q == charge)
        .map_or(DEFAULT_CAPACITY, |&(_, _, cap)| cap);
    let max = element.max_valence(charge)?;
    let cap = if max == UNBOUNDED { reference } else { reference.min(max as i32) };
    Some(cap - h_count.unwrap_or(0) as i32)
}

pub(crate) fn index_code(symbol: Option<&str>) -> usize {
    symbol
        .and_then(|s| INDEX_ALPHABET.iter().position(|&a| a == s))
        .unwrap_or(0)
}

/// Reads index digits, most significant first. Missing symbols count as 0.
pub(crate) fn index_from_symbols(symbols: &[Option<&str>]) -> usize {
    symbols.iter().fold(0usize, |acc, &s| {
        acc.saturating_mul(INDEX_ALPHABET.len()).saturating_add(index_code(s))
    })
}

pub(crate) fn index_symbols(mut index: usize) -> Vec<&'static str> {
    if index == 0 {
        return vec![INDEX_ALPHABET[0]];
    }
    let mut out = Vec::new();
    while index > 0 {
        out.push(INDEX_ALPHABET[index % INDEX_ALPHABET.len()]);
        index /= INDEX_ALPHABET.len();
    }
    out.reverse();
    out
}

/// A parsed atom symbol such as `[=C]`, `[NH1]` or `[13CH4]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct AtomSymbol {
    pub bond: u8,
    pub element: Element,
    pub charge: i8,
    /// `None` for bare organic atoms whose hydrogens are implicit.
    pub h_count: Option<u8>,
    pub isotope: Option<u16>,
    pub chirality: Option<Chirality>,
    pub capacity: i32,
}

fn bond_order(c: Option<u8>) -> u8 {
    match c {
        Some(b'=') => 2,
        Some(b'#') => 3,
        _ => 1,
    }
}

/// Parses `[` bond? isotope? Element chirality? (H digit)? ([+-][1-9]+)? `]`.
/// Returns `None` for anything outside the alphabet, including elements
/// without a valence entry and negative capacities.
pub(crate) fn parse_atom_symbol(symbol: &str) -> Option<AtomSymbol> {
    let inner = symbol.strip_prefix('[')?.strip_suffix(']')?.as_bytes();
    let mut i = 0;
    let bond_char = match inner.first() {
        Some(&c @ (b'=' | b'#' | b'/' | b'\\')) => {
            i += 1;
            Some(c)
        }
        _ => None,
    };
    let bond = bond_order(bond_char);
    let body = &inner[i..];
    if let Ok(text) = std::str::from_utf8(body) {
        if ORGANIC.contains(&text) {
            let element = Element::from_symbol(text)?;
            return Some(AtomSymbol {
                bond,
                element,
                charge: 0,
                h_count: None,
                isotope: None,
                chirality: None,
                capacity: bonding_capacity(element, 0, None)?,
            });
        }
    }

    let iso_start = i;
    while inner.get(i).is_some_and(u8::is_ascii_digit) {
        i += 1;
    }
    let isotope = if i > iso_start {
        let v: u32 = std::str::from_utf8(&inner[iso_start..i]).ok()?.parse().ok()?;
        if v == 0 || v > u16::MAX as u32 {
            return None;
        }
        Some(v as u16)
    } else {
        None
    };

    let el_start = i;
    if !inner.get(i)?.is_ascii_uppercase() {
        return None;
    }
    i += 1;
    if inner.get(i).is_some_and(u8::is_ascii_lowercase) {
        i += 1;
    }
    let element = Element::from_symbol(std::str::from_utf8(&inner[el_start..i]).ok()?)?;

    let mut chirality = None;
    if inner.get(i) == Some(&b'@') {
        i += 1;
        chirality = Some(Chirality::Ccw);
        if inner.get(i) == Some(&b'@') {
            i += 1;
            chirality = Some(Chirality::Cw);
        }
    }

    let mut h_count = 0u8;
    if inner.get(i) == Some(&b'H') {
        let d = *inner.get(i + 1)?;
        if !d.is_ascii_digit() {
            return None;
        }
        h_count = d - b'0';
        i += 2;
    }

    let mut charge = 0i8;
    if let Some(&sign @ (b'+' | b'-')) = inner.get(i) {
        i += 1;
        let start = i;
        while inner.get(i).is_some_and(|c| (b'1'..=b'9').contains(c)) {
            i += 1;
        }
        if i == start {
            return None;
        }
        let v: i8 = std::str::from_utf8(&inner[start..i]).ok()?.parse().ok()?;
        charge = if sign == b'+' { v } else { -v };
    }
    if i != inner.len() {
        return None;
    }
    let capacity = bonding_capacity(element, charge, Some(h_count))?;
    if capacity < 0 {
        return None;
    }
    Some(AtomSymbol {
        bond,
        element,
        charge,
        h_count: Some(h_count),
        isotope,
        chirality,
        capacity,
    })
}

/// `[=Branch2]` and friends: (bond order, number of index symbols).
pub(crate) fn branch_symbol(symbol: &str) -> Option<(u8, usize)> {
    let inner = symbol.strip_prefix('[')?.strip_suffix(']')?;
    let (order, rest) = match inner.as_bytes().first()? {
        b'=' => (2, &inner[1..]),
        b'#' => (3, &inner[1..]),
        _ => (1, inner),
    };
    let len = match rest {
        "Branch1" => 1,
        "Branch2" => 2,
        "Branch3" => 3,
        _ => return None,
    };
    Some((order, len))
}

/// `[Ring1]`, `[=Ring2]`, `[-/Ring1]`, ...: (bond order, index symbols).
pub(crate) fn ring_symbol(symbol: &str) -> Option<(u8, usize)> {
    let inner = symbol.strip_prefix('[')?.strip_suffix(']')?;
    let pos = inner.find("Ring")?;
    let (prefix, rest) = inner.split_at(pos);
    let len = match rest {
        "Ring1" => 1,
        "Ring2" => 2,
        "Ring3" => 3,
        _ => return None,
    };
    let order = match prefix {
        "" => 1,
        "=" => 2,
        "#" => 3,
        p if p.len() == 2 && p.bytes().all(|c| matches!(c, b'-' | b'/' | b'\\')) && p != "--" => 1,
        _ => return None,
    };
    Some((order, len))
}

/// Renders an atom symbol. Returns `None` when the result would not parse
/// back (e.g. more than nine hydrogens).
pub(crate) fn atom_symbol_text(
    bond: u8,
    element: Element,
    charge: i8,
    h_count: Option<u8>,
    isotope: Option<u16>,
) -> Option<String> {
    let mut s = String::from("[");
    s.push_str(match bond {
        2 => "=",
        3 => "#",
        _ => "",
    });
    match h_count {
        None => s.push_str(element.symbol()),
        Some(h) => {
            if let Some(iso) = isotope {
                s.push_str(&iso.to_string());
            }
            s.push_str(element.symbol());
            if h != 0 {
                s.push_str(&format!("H{}", h));
            } else if isotope.is_none() && charge == 0 && ORGANIC.contains(&element.symbol()) {
                s.push_str("H0");
            }
            if charge != 0 {
                s.push_str(&format!("{:+}", charge));
            }
        }
    }
    s.push(']');
    let parsed = parse_atom_symbol(&s)?;
    let same = parsed.element == element && parsed.charge == charge && parsed.isotope == isotope;
    let same_h = parsed.h_count.unwrap_or(0) == h_count.unwrap_or(0) && parsed.h_count.is_some() == h_count.is_some();
    (same && same_h).then_some(s)
}

/// Atom, branch, ring and index symbols whose derivation is constrained
/// by the capacity table: every symbol a robust generator needs.
pub fn semantic_alphabet() -> Vec<String> {
    let mut out = std::collections::BTreeSet::new();
    for &(sym, charge, _) in CONSTRAINTS {
        let element = Element::from_symbol(sym).expect("constraint element is supported");
        let cap = bonding_capacity(element, charge, None).unwrap_or(0);
        for (prefix, order) in [("", 1), ("=", 2), ("#", 3)] {
            if order > cap {
                continue;
            }
            let atom = if charge == 0 {
                sym.to_string()
            } else {
                format!("{}{:+}", sym, charge)
            };
            out.insert(format!("[{}{}]", prefix, atom));
        }
    }
    for l in 1..=3 {
        for p in ["", "="] {
            out.insert(format!("[{}Ring{}]", p, l));
        }
        for p in ["", "=", "#"] {
            out.insert(format!("[{}Branch{}]", p, l));
        }
    }
    out.extend(INDEX_ALPHABET.iter().map(|s| s.to_string()));
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for i in [0usize, 1, 15, 16, 255, 256, 4095] {
            let syms = index_symbols(i);
            let opts: Vec<Option<&str>> = syms.iter().map(|s| Some(*s)).collect();
            assert_eq!(index_from_symbols(&opts), i);
        }
        assert_eq!(index_symbols(17), ["[Ring1]", "[Ring1]"]);
        assert_eq!(index_from_symbols(&[Some("[F]")]), 0);
        assert_eq!(index_from_symbols(&[None, Some("[Ring1]")]), 1);
    }

    #[test]
    fn atom_symbols() {
        let a = parse_atom_symbol("[=C]").unwrap();
        assert_eq!((a.bond, a.element, a.h_count, a.capacity), (2, Element::C, None, 4));
        let a = parse_atom_symbol("[NH1]").unwrap();
        assert_eq!((a.h_count, a.capacity), (Some(1), 2));
        let a = parse_atom_symbol("[13CH4]").unwrap();
        assert_eq!((a.isotope, a.capacity), (Some(13), 0));
        let a = parse_atom_symbol("[O-1]").unwrap();
        assert_eq!((a.charge, a.capacity), (-1, 1));
        for bad in ["[CH9]", "[C+0]", "[Xx]", "[C", "[CH]", "[c]", "[C+]", "[0C]", "[CH1H1]"] {
            assert!(parse_atom_symbol(bad).is_none(), "{bad}");
        }
    }

    #[test]
    fn ring_and_branch_symbols() {
        assert_eq!(branch_symbol("[#Branch2]"), Some((3, 2)));
        assert_eq!(branch_symbol("[Branch4]"), None);
        assert_eq!(ring_symbol("[=Ring1]"), Some((2, 1)));
        assert_eq!(ring_symbol("[-/Ring3]"), Some((1, 3)));
        assert_eq!(ring_symbol("[--Ring1]"), None);
    }

    #[test]
    fn rendering() {
        assert_eq!(atom_symbol_text(1, Element::C, 0, None, None).unwrap(), "[C]");
        assert_eq!(atom_symbol_text(2, Element::N, 1, Some(0), None).unwrap(), "[=N+1]");
        assert_eq!(atom_symbol_text(1, Element::O, 0, Some(0), None).unwrap(), "[OH0]");
        assert_eq!(atom_symbol_text(1, Element::C, 0, Some(4), Some(13)).unwrap(), "[13CH4]");
        assert!(atom_symbol_text(1, Element::C, 0, Some(10), None).is_none());
    }

    #[test]
    fn alphabet_contains_core_symbols() {
        let a = semantic_alphabet();
        for s in ["[C]", "[=O]", "[#N]", "[Branch1]", "[Ring2]", "[F]", "[N+1]"] {
            assert!(a.iter().any(|x| x == s), "{s}");
        }
        assert!(!a.iter().any(|x| x == "[=F]"));
    }
}

//! Element table: symbols, atomic numbers, standard atomic weights and the
//! allowed valence limits used for validity checking.

use std::fmt;

/// Sentinel meaning "no valence limit" (metals, alkali and alkaline earths).
pub const UNBOUNDED: u8 = 255;

struct ElementData {
    symbol: &'static str,
    number: u8,
    weight: f64,
    /// Maximum total valence for formal charges -3..=3.
    max_valence: [u8; 7],
}

const fn e(symbol: &'static str, number: u8, weight: f64, max_valence: [u8; 7]) -> ElementData {
    ElementData {
        symbol,
        number,
        weight,
        max_valence,
    }
}

// Limits were probed from RDKit's sanitizer: for each (element, charge) the
// set of accepted bond counts on a bracket atom is contiguous from zero, so
// the maximum describes it fully.
static ELEMENTS: &[ElementData] = &[
    e("H", 1, 1.008, [2, 255, 2, 1, 255, 255, 255]),
    e("He", 2, 4.003, [3, 2, 255, 0, 1, 255, 255]),
    e("Li", 3, 6.941, [255, 255, 255, 255, 255, 255, 255]),
    e("Be", 4, 9.012, [3, 4, 3, 2, 255, 0, 1]),
    e("B", 5, 10.812, [2, 3, 4, 3, 2, 255, 0]),
    e("C", 6, 12.011, [1, 2, 3, 4, 3, 2, 255]),
    e("N", 7, 14.007, [0, 1, 2, 3, 4, 3, 2]),
    e("O", 8, 15.999, [255, 0, 1, 2, 3, 4, 3]),
    e("F", 9, 18.998, [255, 255, 0, 1, 2, 3, 4]),
    e("Ne", 10, 20.180, [3, 255, 255, 0, 1, 2, 3]),
    e("Na", 11, 22.990, [255, 255, 255, 255, 255, 255, 255]),
    e("Mg", 12, 24.305, [255, 255, 255, 255, 255, 255, 255]),
    e("Al", 13, 26.982, [6, 5, 4, 3, 255, 255, 0]),
    e("Si", 14, 28.086, [1, 6, 5, 4, 3, 255, 255]),
    e("P", 15, 30.974, [2, 3, 6, 5, 4, 3, 255]),
    e("S", 16, 32.067, [3, 4, 5, 6, 5, 4, 3]),
    e("Cl", 17, 35.453, [255, 255, 0, 1, 6, 5, 4]),
    e("Ar", 18, 39.948, [255, 255, 255, 0, 1, 6, 5]),
    e("K", 19, 39.098, [255, 255, 255, 255, 255, 255, 255]),
    e("Ca", 20, 40.078, [255, 255, 255, 255, 255, 255, 255]),
    e("Ti", 22, 47.867, [255, 255, 255, 255, 255, 255, 255]),
    e("V", 23, 50.944, [255, 255, 255, 255, 255, 255, 255]),
    e("Cr", 24, 51.996, [255, 255, 255, 255, 255, 255, 255]),
    e("Mn", 25, 54.938, [255, 255, 255, 255, 255, 255, 255]),
    e("Fe", 26, 55.845, [255, 255, 255, 255, 255, 255, 255]),
    e("Ni", 28, 58.693, [255, 255, 255, 255, 255, 255, 255]),
    e("Cu", 29, 63.546, [255, 255, 255, 255, 255, 255, 255]),
    e("Zn", 30, 65.390, [255, 255, 255, 255, 255, 255, 255]),
    e("Ga", 31, 69.723, [6, 5, 4, 3, 255, 255, 255]),
    e("Ge", 32, 72.610, [1, 6, 5, 4, 3, 255, 255]),
    e("As", 33, 74.922, [2, 3, 6, 5, 4, 3, 255]),
    e("Se", 34, 78.960, [3, 4, 5, 6, 5, 4, 3]),
    e("Br", 35, 79.904, [255, 255, 0, 1, 6, 5, 4]),
    e("Kr", 36, 83.800, [255, 255, 255, 0, 1, 6, 5]),
    e("Rb", 37, 85.468, [255, 255, 255, 255, 255, 255, 255]),
    e("Sr", 38, 87.620, [255, 255, 255, 255, 255, 255, 255]),
    e("Zr", 40, 91.224, [255, 255, 255, 255, 255, 255, 255]),
    e("Mo", 42, 95.940, [255, 255, 255, 255, 255, 255, 255]),
    e("Ru", 44, 101.070, [255, 255, 255, 255, 255, 255, 255]),
    e("Rh", 45, 102.906, [255, 255, 255, 255, 255, 255, 255]),
    e("Pd", 46, 106.420, [255, 255, 255, 255, 255, 255, 255]),
    e("Ag", 47, 107.868, [255, 255, 255, 255, 255, 255, 255]),
    e("Cd", 48, 112.412, [255, 255, 255, 255, 255, 255, 255]),
    e("Te", 52, 127.600, [1, 6, 5, 6, 5, 4, 3]),
    e("I", 53, 126.904, [255, 1, 6, 5, 6, 5, 4]),
    e("Xe", 54, 131.290, [255, 255, 1, 6, 5, 6, 5]),
    e("Ba", 56, 137.328, [255, 255, 255, 255, 255, 255, 255]),
    e("Pt", 78, 195.078, [255, 255, 255, 255, 255, 255, 255]),
    e("Au", 79, 196.967, [255, 255, 255, 255, 255, 255, 255]),
    e("Hg", 80, 200.590, [255, 255, 255, 255, 255, 255, 255]),
    e("Tl", 81, 204.383, [255, 255, 255, 255, 255, 255, 255]),
    e("Bi", 83, 208.980, [0, 5, 6, 5, 4, 255, 255]),
    e("Gd", 64, 157.250, [255, 255, 255, 255, 255, 255, 255]),
];

/// A chemical element from the supported set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(0);
    pub const B: Element = Element(4);
    pub const C: Element = Element(5);
    pub const N: Element = Element(6);
    pub const O: Element = Element(7);
    pub const F: Element = Element(8);
    pub const P: Element = Element(14);
    pub const S: Element = Element(15);
    pub const CL: Element = Element(16);
    pub const BR: Element = Element(32);
    pub const I: Element = Element(44);

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        ELEMENTS
            .iter()
            .position(|d| d.symbol == symbol)
            .map(|i| Element(i as u8))
    }

    /// Every supported element, in table order.
    pub fn all() -> impl Iterator<Item = Element> {
        (0..ELEMENTS.len() as u8).map(Element)
    }

    fn data(self) -> &'static ElementData {
        &ELEMENTS[self.0 as usize]
    }

    pub fn symbol(self) -> &'static str {
        self.data().symbol
    }

    pub fn atomic_number(self) -> u8 {
        self.data().number
    }

    pub fn atomic_weight(self) -> f64 {
        self.data().weight
    }

    /// Maximum total valence (bond orders plus hydrogens) for a formal
    /// charge, `None` when that charge is not supported for the element.
    pub fn max_valence(self, charge: i8) -> Option<u8> {
        let d = self.data();
        if (-3..=3).contains(&charge) {
            Some(d.max_valence[(charge + 3) as usize])
        } else if d.max_valence[3] == UNBOUNDED {
            Some(UNBOUNDED)
        } else {
            None
        }
    }

    /// Default valences of the SMILES organic subset; empty otherwise.
    pub fn organic_valences(self) -> &'static [u8] {
        match self.symbol() {
            "B" => &[3],
            "C" => &[4],
            "N" => &[3],
            "O" => &[2],
            "P" => &[3, 5],
            "S" => &[2, 4, 6],
            "F" | "Cl" | "Br" => &[1],
            "I" => &[1, 3, 5],
            _ => &[],
        }
    }

    pub fn is_organic(self) -> bool {
        !self.organic_valences().is_empty()
    }

    /// Valences an aromatic atom may use without contributing a pi bond.
    pub fn aromatic_valences(self) -> &'static [u8] {
        match self.symbol() {
            "B" | "Al" => &[3],
            "C" | "Si" => &[4],
            "N" | "P" | "As" => &[3, 5],
            "O" | "S" | "Se" | "Te" => &[2, 4],
            _ => &[],
        }
    }

    pub fn valence_electrons(self) -> u8 {
        match self.symbol() {
            "B" | "Al" => 3,
            "C" | "Si" => 4,
            "N" | "P" | "As" => 5,
            "O" | "S" | "Se" | "Te" => 6,
            _ => 0,
        }
    }

    /// Whether the element may be written in lowercase aromatic form.
    pub fn can_be_aromatic(self) -> bool {
        matches!(self.symbol(), "B" | "C" | "N" | "O" | "P" | "S" | "Se")
    }

    pub fn aromatic_symbol(self) -> Option<&'static str> {
        Some(match self.symbol() {
            "B" => "b",
            "C" => "c",
            "N" => "n",
            "O" => "o",
            "P" => "p",
            "S" => "s",
            "Se" => "se",
            _ => return None,
        })
    }

    /// Whether an atom of this element can be written without brackets in
    /// aromatic form (`b c n o p s`).
    pub fn aromatic_organic(self) -> bool {
        matches!(self.symbol(), "B" | "C" | "N" | "O" | "P" | "S")
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_constants_match_symbols() {
        for (el, sym) in [
            (Element::H, "H"),
            (Element::B, "B"),
            (Element::C, "C"),
            (Element::N, "N"),
            (Element::O, "O"),
            (Element::F, "F"),
            (Element::P, "P"),
            (Element::S, "S"),
            (Element::CL, "Cl"),
            (Element::BR, "Br"),
            (Element::I, "I"),
        ] {
            assert_eq!(el.symbol(), sym);
            assert_eq!(Element::from_symbol(sym), Some(el));
        }
    }

    #[test]
    fn charge_shifts_follow_isoelectronic_partners() {
        let n = Element::N;
        assert_eq!(n.max_valence(0), Some(3));
        assert_eq!(n.max_valence(1), Some(4));
        assert_eq!(n.max_valence(-1), Some(2));
        assert_eq!(Element::from_symbol("Fe").unwrap().max_valence(5), Some(UNBOUNDED));
        assert_eq!(Element::C.max_valence(4), None);
    }

    #[test]
    fn unknown_symbols_are_rejected() {
        assert!(Element::from_symbol("Xx").is_none());
        assert!(Element::from_symbol("Sn").is_none());
    }
}

//! SMILES writers over depth-first traversal plans.

use rand::seq::SliceRandom;
use rand::Rng;

use super::canon::{canonical_ranks, View};
use super::{charge_suffix, Molecule};

/// Depth-first spanning forest with ring closures, as a SMILES writer
/// walks it.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub roots: Vec<usize>,
    /// Atoms in visit order.
    pub order: Vec<usize>,
    /// Position of each atom in `order`.
    pub position: Vec<usize>,
    /// Tree children per atom, in visit order.
    pub children: Vec<Vec<usize>>,
    /// Bond from the parent, per atom.
    pub parent_bond: Vec<Option<usize>>,
    /// Ring-closure bonds per atom, sorted by the partner's position.
    pub rings: Vec<Vec<usize>>,
}

impl Plan {
    /// Builds a plan. `roots` lists start atoms (one per component, in
    /// output order); `neighbor_order` arranges an atom's neighbors in
    /// place as (neighbor, bond) pairs.
    pub fn build(m: &Molecule, roots: &[usize], mut neighbor_order: impl FnMut(usize, &mut Vec<(usize, usize)>)) -> Plan {
        let n = m.atoms().len();
        let mut plan = Plan {
            roots: Vec::new(),
            order: Vec::with_capacity(n),
            position: vec![usize::MAX; n],
            children: vec![Vec::new(); n],
            parent_bond: vec![None; n],
            rings: vec![Vec::new(); n],
        };
        let mut ring_seen = vec![false; m.bonds().len()];
        for &root in roots {
            if plan.position[root] != usize::MAX {
                continue;
            }
            plan.roots.push(root);
            // Explicit stack of (atom, remaining neighbors) to keep deep
            // chains off the call stack.
            plan.position[root] = plan.order.len();
            plan.order.push(root);
            let mut first = m.neighbors(root).to_vec();
            neighbor_order(root, &mut first);
            first.reverse();
            let mut stack: Vec<(usize, Vec<(usize, usize)>)> = vec![(root, first)];
            while let Some((u, pending)) = stack.last_mut() {
                let u = *u;
                let Some((v, b)) = pending.pop() else {
                    stack.pop();
                    continue;
                };
                if Some(b) == plan.parent_bond[u] {
                    continue;
                }
                if plan.position[v] != usize::MAX {
                    if !ring_seen[b] {
                        ring_seen[b] = true;
                        plan.rings[u].push(b);
                        plan.rings[v].push(b);
                    }
                    continue;
                }
                plan.children[u].push(v);
                plan.parent_bond[v] = Some(b);
                plan.position[v] = plan.order.len();
                plan.order.push(v);
                let mut next = m.neighbors(v).to_vec();
                neighbor_order(v, &mut next);
                next.reverse();
                stack.push((v, next));
            }
        }
        for (atom, rings) in plan.rings.iter_mut().enumerate() {
            let pos = &plan.position;
            rings.sort_by_key(|&b| pos[m.bonds()[b].other(atom)]);
        }
        plan
    }
}

fn component_roots(m: &Molecule, key: impl Fn(usize) -> usize) -> Vec<usize> {
    let n = m.atoms().len();
    let mut atoms: Vec<usize> = (0..n).collect();
    atoms.sort_by_key(|&i| key(i));
    let mut seen = vec![false; n];
    let mut roots = Vec::new();
    for start in atoms {
        if seen[start] {
            continue;
        }
        roots.push(start);
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in m.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    roots
}

/// Canonical SMILES and the atom order it writes.
pub(crate) fn canonical(m: &Molecule) -> (String, Vec<usize>) {
    if m.is_empty() {
        return (String::new(), Vec::new());
    }
    let view = View::canonical(m);
    let ranks = canonical_ranks(m, &view);
    let roots = component_roots(m, |i| ranks[i]);
    let plan = Plan::build(m, &roots, |_, nbrs| nbrs.sort_by_key(|&(w, _)| ranks[w]));
    let mut pieces: Vec<(String, Vec<usize>)> = plan
        .roots
        .iter()
        .map(|&root| {
            let mut out = String::new();
            let mut order = Vec::new();
            emit(m, &view, &plan, root, &mut out, &mut order);
            (out, order)
        })
        .collect();
    pieces.sort();
    join(pieces)
}

/// Randomized traversal: shuffled component order, random start atom and
/// shuffled neighbor order at every atom.
pub(crate) fn random<R: Rng + ?Sized>(m: &Molecule, rng: &mut R) -> (String, Vec<usize>) {
    if m.is_empty() {
        return (String::new(), Vec::new());
    }
    let view = View::stored(m);
    let mut comps = components(m);
    comps.shuffle(rng);
    let roots: Vec<usize> = comps.iter().map(|c| c[rng.gen_range(0..c.len())]).collect();
    let plan = Plan::build(m, &roots, |_, nbrs| nbrs.shuffle(rng));
    render(m, &view, &plan)
}

/// Traversal in atom-index order, aromaticity as stored.
pub(crate) fn index_order(m: &Molecule) -> (String, Vec<usize>) {
    let view = View::stored(m);
    let plan = index_plan(m);
    render(m, &view, &plan)
}

pub(crate) fn index_plan(m: &Molecule) -> Plan {
    let roots = component_roots(m, |i| i);
    Plan::build(m, &roots, |_, nbrs| nbrs.sort_by_key(|&(w, _)| w))
}

fn components(m: &Molecule) -> Vec<Vec<usize>> {
    let roots = component_roots(m, |i| i);
    let plan = Plan::build(m, &roots, |_, _| {});
    let mut comps = Vec::new();
    for (k, &root) in plan.roots.iter().enumerate() {
        let start = plan.position[root];
        let end = plan.roots.get(k + 1).map_or(plan.order.len(), |&r| plan.position[r]);
        comps.push(plan.order[start..end].to_vec());
        debug_assert!(!comps.last().unwrap().is_empty());
    }
    comps
}

fn render(m: &Molecule, view: &View, plan: &Plan) -> (String, Vec<usize>) {
    let pieces = plan
        .roots
        .iter()
        .map(|&root| {
            let mut out = String::new();
            let mut order = Vec::new();
            emit(m, view, plan, root, &mut out, &mut order);
            (out, order)
        })
        .collect();
    join(pieces)
}

fn join(pieces: Vec<(String, Vec<usize>)>) -> (String, Vec<usize>) {
    let mut out = String::new();
    let mut order = Vec::new();
    for (i, (s, o)) in pieces.into_iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        out.push_str(&s);
        order.extend(o);
    }
    (out, order)
}

fn emit(m: &Molecule, view: &View, plan: &Plan, root: usize, out: &mut String, order: &mut Vec<usize>) {
    // Ring digits are allocated lowest-free-first and released on closure.
    let mut digits: Vec<Option<usize>> = Vec::new();
    let mut open: Vec<(usize, usize)> = Vec::new(); // (bond, digit)

    enum Step {
        Atom(usize),
        Text(&'static str),
        Bond(usize),
    }
    let mut work = vec![Step::Atom(root)];
    while let Some(step) = work.pop() {
        let atom = match step {
            Step::Text(t) => {
                out.push_str(t);
                continue;
            }
            Step::Bond(b) => {
                out.push_str(bond_symbol(m, view, b));
                continue;
            }
            Step::Atom(a) => a,
        };
        order.push(atom);
        write_atom(m, view, atom, out);
        let me = plan.position[atom];
        for &b in &plan.rings[atom] {
            let other = m.bonds()[b].other(atom);
            if plan.position[other] < me {
                let k = open.iter().position(|&(ob, _)| ob == b).unwrap();
                let (_, d) = open.remove(k);
                out.push_str(bond_symbol(m, view, b));
                push_digit(out, d);
                digits[d] = None;
            }
        }
        for &b in &plan.rings[atom] {
            let other = m.bonds()[b].other(atom);
            if plan.position[other] > me {
                let d = match digits.iter().position(|x| x.is_none()) {
                    Some(d) => d,
                    None => {
                        digits.push(None);
                        digits.len() - 1
                    }
                };
                digits[d] = Some(b);
                open.push((b, d));
                push_digit(out, d);
            }
        }
        let children = &plan.children[atom];
        // Pushed in reverse so the first child is written first.
        for (k, &child) in children.iter().enumerate().rev() {
            let b = plan.parent_bond[child].unwrap();
            let last = k + 1 == children.len();
            if !last {
                work.push(Step::Text(")"));
            }
            work.push(Step::Atom(child));
            work.push(Step::Bond(b));
            if !last {
                work.push(Step::Text("("));
            }
        }
    }
}

fn push_digit(out: &mut String, d: usize) {
    let label = d + 1;
    if label < 10 {
        out.push(char::from(b'0' + label as u8));
    } else {
        out.push('%');
        out.push_str(&format!("{:02}", label));
    }
}

fn bond_symbol(m: &Molecule, view: &View, b: usize) -> &'static str {
    if view.bond_aromatic[b] {
        return "";
    }
    let (x, y) = m.bonds()[b].atoms;
    match m.bonds()[b].kekule {
        1 if view.atom_aromatic[x] && view.atom_aromatic[y] => "-",
        1 => "",
        2 => "=",
        _ => "#",
    }
}

fn write_atom(m: &Molecule, view: &View, i: usize, out: &mut String) {
    let atom = &m.atoms()[i];
    let symbol = if view.atom_aromatic[i] {
        atom.element.aromatic_symbol().unwrap_or(atom.element.symbol())
    } else {
        atom.element.symbol()
    };
    if view.bare[i] {
        out.push_str(symbol);
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        out.push_str(&iso.to_string());
    }
    out.push_str(symbol);
    match atom.h_count {
        0 => {}
        1 => out.push('H'),
        h => {
            out.push('H');
            out.push_str(&h.to_string());
        }
    }
    out.push_str(&charge_suffix(atom.charge));
    out.push(']');
}

#[cfg(test)]
mod tests {
    use crate::chem::parse_smiles;
    use rand::SeedableRng;

    #[test]
    fn single_atom_is_its_own_canonical_form() {
        assert_eq!(parse_smiles("C").unwrap().to_canonical_smiles(), "C");
    }

    #[test]
    fn different_writings_share_a_canonical_form() {
        let a = parse_smiles("OC(C)=O").unwrap().to_canonical_smiles();
        let b = parse_smiles("CC(=O)O").unwrap().to_canonical_smiles();
        assert_eq!(a, b);
        let k = parse_smiles("C1=CC=CC=C1").unwrap().to_canonical_smiles();
        let r = parse_smiles("c1ccccc1").unwrap().to_canonical_smiles();
        assert_eq!(k, r);
        assert_eq!(r, "c1ccccc1");
    }

    #[test]
    fn ring_digits_are_reused_and_two_digit_labels_written() {
        let m = parse_smiles("C1CC1C1CC1").unwrap();
        assert_eq!(m.to_smiles(), "C1CC1C1CC1");
        // Ten nested rings keep ten labels open at once.
        let m = parse_smiles("C1CC2CC3CC4CC5CC6CC7CC8CC9CC%10CC%10C9C8C7C6C5C4C3C2C1").unwrap();
        let written = m.to_smiles();
        assert!(written.contains("%10"), "{written}");
        assert_eq!(parse_smiles(&written).unwrap().to_canonical_smiles(), m.to_canonical_smiles());
    }

    #[test]
    fn random_traversal_is_seed_deterministic() {
        let m = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let a = m.random_traversal_smiles(&mut rand_chacha::ChaCha8Rng::seed_from_u64(5));
        let b = m.random_traversal_smiles(&mut rand_chacha::ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn index_order_matches_simple_inputs() {
        for s in ["CC(=O)O", "c1ccccc1", "C[N+](C)(C)C", "[2H]OC", "c1cc[nH]c1", "C=C-C#N"] {
            let written = parse_smiles(s).unwrap().to_smiles();
            let expected = if s == "C=C-C#N" { "C=CC#N" } else { s };
            assert_eq!(written, expected);
        }
    }

    #[test]
    fn biphenyl_link_written_explicitly() {
        let m = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        assert_eq!(m.to_smiles(), "c1ccccc1-c1ccccc1");
    }
}

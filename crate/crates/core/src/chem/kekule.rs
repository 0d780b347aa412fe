//! Kekulization of aromatic systems and resonance analysis.
//!
//! Pruning and the initial matching follow the selfies reference
//! implementation exactly (greedy min-free-degree matching, then BFS
//! augmenting paths) so that SELFIES strings match the reference encoder.
//! The BFS there ignores odd cycles; when it fails an Edmonds blossom search
//! is tried before giving up.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use super::{AtomSpec, Bond, BondOrder, Element, Molecule, ParseError};

/// Whether an aromatic atom stays out of the pi matching.
///
/// `nonaromatic_sum` is the bond-order sum over its non-aromatic bonds and
/// `n_aromatic` the number of aromatic bonds; `h_count` is `None` for bare
/// organic atoms whose hydrogens are implicit.
pub(crate) fn pruned(element: Element, charge: i8, h_count: Option<u8>, nonaromatic_sum: u32, n_aromatic: u32) -> bool {
    if n_aromatic == 0 {
        return true;
    }
    let valences = element.aromatic_valences();
    if valences.is_empty() {
        return true;
    }
    let used = (nonaromatic_sum + n_aromatic) as i32;
    match h_count {
        None => valences.iter().any(|&v| v as i32 == used),
        Some(h) => {
            let charge = charge as i32;
            let h = h as i32;
            let valence = *valences.last().unwrap() as i32 - charge;
            let used = used + h;
            // Bond count with aromatic bonds at 1.5, doubled to stay integral.
            let twice = 2 * nonaromatic_sum as i32 + 3 * n_aromatic as i32;
            let bound = charge.max(0) + h + twice / 2 + twice % 2;
            let radical = (element.valence_electrons() as i32 - bound).max(0) % 2;
            let free = valence - used - radical;
            if valences.iter().any(|&v| used == v as i32 - charge) {
                true
            } else {
                !(free >= 0 && free % 2 != 0)
            }
        }
    }
}

/// Assigns Kekulé orders to aromatic bonds in place.
pub(crate) fn kekulize(specs: &[AtomSpec], bonds: &mut [Bond], adjacency: &[Vec<(usize, usize)>]) -> Result<(), ParseError> {
    if !bonds.iter().any(|b| b.order == BondOrder::Aromatic) && !specs.iter().any(|s| s.aromatic) {
        return Ok(());
    }
    let mut kept = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        if !spec.aromatic {
            continue;
        }
        let mut nonaromatic = 0;
        let mut n_aromatic = 0;
        for &(_, b) in &adjacency[i] {
            if bonds[b].order == BondOrder::Aromatic {
                n_aromatic += 1;
            } else {
                nonaromatic += bonds[b].kekule as u32;
            }
        }
        if !pruned(spec.element, spec.charge, spec.h_count, nonaromatic, n_aromatic) {
            kept.push(i);
        }
    }
    let mut label = vec![usize::MAX; specs.len()];
    for (l, &atom) in kept.iter().enumerate() {
        label[atom] = l;
    }
    let graph: Vec<Vec<usize>> = kept
        .iter()
        .map(|&atom| {
            adjacency[atom]
                .iter()
                .filter(|&&(v, b)| bonds[b].order == BondOrder::Aromatic && label[v] != usize::MAX)
                .map(|&(v, _)| label[v])
                .collect()
        })
        .collect();
    let matching = perfect_matching(&graph).map_err(|unmatched| ParseError::Valence {
        atom: kept[unmatched],
        reason: "aromatic system cannot be kekulized".into(),
    })?;
    for bond in bonds.iter_mut() {
        if bond.order == BondOrder::Aromatic {
            bond.kekule = 1;
        }
    }
    for (l, &mate) in matching.iter().enumerate() {
        let (a, b) = (kept[l], kept[mate]);
        if a < b {
            let &(_, bond) = adjacency[a].iter().find(|&&(v, _)| v == b).unwrap();
            bonds[bond].kekule = 2;
        }
    }
    Ok(())
}

/// Perfect matching of an undirected graph; on failure returns a node that
/// could not be matched.
pub(crate) fn perfect_matching(graph: &[Vec<usize>]) -> Result<Vec<usize>, usize> {
    let mut mate = greedy_matching(graph);
    let mut unmatched: BTreeSet<usize> = (0..graph.len()).filter(|&i| mate[i].is_none()).collect();
    while let Some(root) = unmatched.pop_first() {
        match bfs_augmenting_path(graph, root, &mate) {
            Some(path) => {
                for pair in path.chunks(2) {
                    mate[pair[0]] = Some(pair[1]);
                    mate[pair[1]] = Some(pair[0]);
                }
                unmatched.remove(&path[0]);
                unmatched.remove(&path[path.len() - 1]);
            }
            None => match blossom_augment(graph, &mut mate, root) {
                Some(end) => {
                    unmatched.remove(&end);
                }
                None => return Err(root),
            },
        }
    }
    Ok(mate.into_iter().map(|m| m.unwrap()).collect())
}

fn greedy_matching(graph: &[Vec<usize>]) -> Vec<Option<usize>> {
    let n = graph.len();
    let mut mate: Vec<Option<usize>> = vec![None; n];
    let mut free: Vec<isize> = graph.iter().map(|adj| adj.len() as isize).collect();
    let mut heap: BinaryHeap<Reverse<(isize, usize)>> = (0..n).map(|i| Reverse((free[i], i))).collect();
    while let Some(Reverse((_, node))) = heap.pop() {
        if mate[node].is_some() || free[node] == 0 {
            continue;
        }
        let Some(&partner) = graph[node].iter().find(|&&i| mate[i].is_none()) else {
            continue;
        };
        mate[node] = Some(partner);
        mate[partner] = Some(node);
        for &adj in graph[node].iter().chain(graph[partner].iter()) {
            free[adj] -= 1;
            if mate[adj].is_none() && free[adj] > 0 {
                heap.push(Reverse((free[adj], adj)));
            }
        }
    }
    mate
}

/// Alternating BFS without blossom handling; returns the path as
/// consecutive pairs to be matched.
fn bfs_augmenting_path(graph: &[Vec<usize>], root: usize, mate: &[Option<usize>]) -> Option<Vec<usize>> {
    let mut parents: Vec<Option<(usize, usize)>> = vec![None; graph.len()];
    parents[root] = Some((usize::MAX, usize::MAX));
    let mut queue = VecDeque::from([root]);
    let mut other_end = None;
    'search: while let Some(node) = queue.pop_front() {
        for &adj in &graph[node] {
            match mate[adj] {
                None => {
                    if adj != root {
                        parents[adj] = Some((node, adj));
                        other_end = Some(adj);
                        break 'search;
                    }
                }
                Some(adj_mate) => {
                    if parents[adj_mate].is_none() {
                        parents[adj_mate] = Some((node, adj));
                        queue.push_back(adj_mate);
                    }
                }
            }
        }
    }
    let mut node = other_end?;
    let mut path = Vec::new();
    while node != root {
        let (prev, via) = parents[node].unwrap();
        path.push(via);
        path.push(prev);
        node = prev;
    }
    Some(path)
}

const NONE: usize = usize::MAX;

/// Edmonds' blossom search for an augmenting path from an exposed `root`.
/// Flips the path in `mate` and returns its other end.
pub(crate) fn blossom_augment(graph: &[Vec<usize>], mate: &mut [Option<usize>], root: usize) -> Option<usize> {
    let n = graph.len();
    let mut used = vec![false; n];
    let mut parent = vec![NONE; n];
    let mut base: Vec<usize> = (0..n).collect();
    used[root] = true;
    let mut queue = vec![root];
    let mut head = 0;
    let mut end = None;
    'search: while head < queue.len() {
        let v = queue[head];
        head += 1;
        for &to in &graph[v] {
            if base[v] == base[to] || mate[v] == Some(to) {
                continue;
            }
            if to == root || mate[to].is_some_and(|m| parent[m] != NONE) {
                let cur = lca(&base, mate, &parent, v, to);
                let mut blossom = vec![false; n];
                mark_path(&base, mate, &mut parent, &mut blossom, v, cur, to);
                mark_path(&base, mate, &mut parent, &mut blossom, to, cur, v);
                for i in 0..n {
                    if blossom[base[i]] {
                        base[i] = cur;
                        if !used[i] {
                            used[i] = true;
                            queue.push(i);
                        }
                    }
                }
            } else if parent[to] == NONE {
                parent[to] = v;
                match mate[to] {
                    None => {
                        end = Some(to);
                        break 'search;
                    }
                    Some(m) => {
                        used[m] = true;
                        queue.push(m);
                    }
                }
            }
        }
    }
    let end = end?;
    let mut v = end;
    while v != NONE {
        let pv = parent[v];
        let ppv = mate[pv];
        mate[v] = Some(pv);
        mate[pv] = Some(v);
        v = ppv.unwrap_or(NONE);
    }
    Some(end)
}

fn lca(base: &[usize], mate: &[Option<usize>], parent: &[usize], mut a: usize, mut b: usize) -> usize {
    let mut seen = vec![false; base.len()];
    loop {
        a = base[a];
        seen[a] = true;
        match mate[a] {
            None => break,
            Some(m) => a = parent[m],
        }
    }
    loop {
        b = base[b];
        if seen[b] {
            return b;
        }
        b = parent[mate[b].unwrap()];
    }
}

fn mark_path(
    base: &[usize],
    mate: &[Option<usize>],
    parent: &mut [usize],
    blossom: &mut [bool],
    mut v: usize,
    b: usize,
    mut child: usize,
) {
    while base[v] != b {
        let m = mate[v].unwrap();
        blossom[base[v]] = true;
        blossom[base[m]] = true;
        parent[v] = child;
        child = m;
        v = parent[m];
    }
}

/// Bonds whose order differs between Kekulé structures of the molecule,
/// i.e. bonds on an alternating cycle of the pi matching.
pub(crate) fn resonant_bonds(m: &Molecule) -> Vec<bool> {
    let n = m.atoms().len();
    let bonds = m.bonds();
    let mut resonant = vec![false; bonds.len()];

    // Atoms carrying exactly one double bond and no triple bond.
    let mut partner = vec![NONE; n];
    for (i, atom) in m.atoms().iter().enumerate() {
        if !atom.element.can_be_aromatic() {
            continue;
        }
        let mut doubles = m.neighbors(i).iter().filter(|&&(_, b)| bonds[b].kekule == 2);
        let triple = m.neighbors(i).iter().any(|&(_, b)| bonds[b].kekule == 3);
        if let (Some(&(v, _)), None, false) = (doubles.next(), doubles.next(), triple) {
            partner[i] = v;
        }
    }
    let mut label = vec![NONE; n];
    let mut nodes = Vec::new();
    for i in 0..n {
        let p = partner[i];
        if p != NONE && partner[p] == i && m.atoms()[p].element.can_be_aromatic() {
            label[i] = nodes.len();
            nodes.push(i);
        }
    }
    if nodes.is_empty() {
        return resonant;
    }
    // Local graph; edge ids map back to bond indices.
    let mut graph: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    for (bi, bond) in bonds.iter().enumerate() {
        let (a, b) = bond.atoms;
        if bond.kekule <= 2 && label[a] != NONE && label[b] != NONE && m.is_ring_bond(bi) {
            graph[label[a]].push(label[b]);
            graph[label[b]].push(label[a]);
            edges.push((label[a], label[b], bi));
        }
    }
    let mate: Vec<Option<usize>> = nodes.iter().map(|&i| Some(label[partner[i]])).collect();

    // A matched edge is resonant iff the graph without it still has a
    // perfect matching.
    let mut flexible_node = vec![false; nodes.len()];
    for &(u, w, bi) in &edges {
        if mate[u] != Some(w) {
            continue;
        }
        let g: Vec<Vec<usize>> = graph
            .iter()
            .enumerate()
            .map(|(x, adj)| {
                adj.iter()
                    .copied()
                    .filter(|&y| !((x == u && y == w) || (x == w && y == u)))
                    .collect()
            })
            .collect();
        let mut trial = mate.clone();
        trial[u] = None;
        trial[w] = None;
        if blossom_augment(&g, &mut trial, u).is_some() {
            resonant[bi] = true;
            flexible_node[u] = true;
            flexible_node[w] = true;
        }
    }
    // An unmatched edge (u, v) is resonant iff some perfect matching uses
    // it: remove u and v, then re-match their former partners.
    for &(u, v, bi) in &edges {
        if mate[u] == Some(v) || !flexible_node[u] || !flexible_node[v] {
            continue;
        }
        let (u2, v2) = (mate[u].unwrap(), mate[v].unwrap());
        let g: Vec<Vec<usize>> = graph
            .iter()
            .enumerate()
            .map(|(x, adj)| {
                if x == u || x == v {
                    Vec::new()
                } else {
                    adj.iter().copied().filter(|&y| y != u && y != v).collect()
                }
            })
            .collect();
        let mut trial = mate.clone();
        for x in [u, v, u2, v2] {
            trial[x] = None;
        }
        if blossom_augment(&g, &mut trial, u2) == Some(v2) {
            resonant[bi] = true;
        }
    }
    resonant
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn is_perfect(graph: &[Vec<usize>], mate: &[usize]) -> bool {
        mate.iter().enumerate().all(|(i, &m)| mate[m] == i && m != i && graph[i].contains(&m))
    }

    #[test]
    fn greedy_matches_reference_on_benzene_ring() {
        // Benzene as the reference parser sees it: ring closure appended last.
        let graph = vec![vec![1, 5], vec![0, 2], vec![1, 3], vec![2, 4], vec![3, 5], vec![4, 0]];
        let mate = perfect_matching(&graph).unwrap();
        assert_eq!(mate, vec![1, 0, 3, 2, 5, 4]);
    }

    #[test]
    fn odd_cycle_has_no_perfect_matching() {
        let graph = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        assert!(perfect_matching(&graph).is_err());
    }

    fn brute_max_matching(n: usize, edges: &[(usize, usize)], used: &mut Vec<bool>, from: usize) -> usize {
        let mut best = 0;
        for (k, &(a, b)) in edges.iter().enumerate().skip(from) {
            if !used[a] && !used[b] {
                used[a] = true;
                used[b] = true;
                best = best.max(1 + brute_max_matching(n, edges, used, k + 1));
                used[a] = false;
                used[b] = false;
            }
        }
        best
    }

    #[test]
    fn blossom_reaches_maximum_matching_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(2..10);
            let mut graph = vec![Vec::new(); n];
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.35) {
                        graph[a].push(b);
                        graph[b].push(a);
                        edges.push((a, b));
                    }
                }
            }
            let mut mate = vec![None; n];
            loop {
                let mut grown = false;
                for root in 0..n {
                    if mate[root].is_none() && blossom_augment(&graph, &mut mate, root).is_some() {
                        grown = true;
                    }
                }
                if !grown {
                    break;
                }
            }
            for (i, m) in mate.iter().enumerate() {
                if let Some(m) = *m {
                    assert_eq!(mate[m], Some(i));
                    assert!(graph[i].contains(&m));
                }
            }
            let size = mate.iter().filter(|m| m.is_some()).count() / 2;
            assert_eq!(size, brute_max_matching(n, &edges, &mut vec![false; n], 0));
        }
    }

    #[test]
    fn perfect_matching_is_valid_on_fused_rings() {
        // Azulene-like 5-7 system with an odd cycle.
        let graph = vec![
            vec![1, 4],
            vec![0, 2],
            vec![1, 3, 9],
            vec![2, 4],
            vec![3, 0, 5],
            vec![4, 6],
            vec![5, 7],
            vec![6, 8],
            vec![7, 9],
            vec![8, 2],
        ];
        let mate = perfect_matching(&graph).unwrap();
        assert!(is_perfect(&graph, &mate));
    }

    #[test]
    fn resonance_in_benzene_and_not_in_pyrrole() {
        let benzene = parse_smiles("C1=CC=CC=C1").unwrap();
        assert!(resonant_bonds(&benzene).iter().all(|&r| r));
        let pyrrole = parse_smiles("c1cc[nH]c1").unwrap();
        assert!(resonant_bonds(&pyrrole).iter().all(|&r| !r));
        let quinone = parse_smiles("O=C1C=CC(=O)C=C1").unwrap();
        assert!(resonant_bonds(&quinone).iter().all(|&r| !r));
    }

    #[test]
    fn naphthalene_all_ring_bonds_resonant() {
        let m = parse_smiles("c1ccc2ccccc2c1").unwrap();
        let r = resonant_bonds(&m);
        assert_eq!(r.iter().filter(|&&x| x).count(), 11);
    }

    #[test]
    fn prune_rule_matches_reference_cases() {
        // bare aromatic carbon with two aromatic bonds keeps a pi bond
        assert!(!pruned(Element::C, 0, None, 0, 2));
        // furan oxygen, pyrrole [nH], carbonyl carbon in pyridone
        assert!(pruned(Element::O, 0, None, 0, 2));
        assert!(pruned(Element::N, 0, Some(1), 0, 2));
        assert!(pruned(Element::C, 0, None, 2, 2));
        // pyridinium [nH+] keeps its pi bond
        assert!(!pruned(Element::N, 1, Some(1), 0, 2));
        // [cH-] in cyclopentadienide is pruned
        assert!(pruned(Element::C, -1, Some(1), 0, 2));
    }
}

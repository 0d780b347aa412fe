use std::collections::HashSet;

use gym_core::chem::{circular_fingerprint, parse_smiles, tanimoto, Molecule, ParseError};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CORPUS: &str = include_str!("data/corpus_1000.smi");

fn corpus() -> Vec<&'static str> {
    CORPUS.lines().filter(|l| !l.is_empty()).collect()
}

#[test]
fn acetic_acid_counts() {
    let m = parse_smiles("CC(=O)O").unwrap();
    assert_eq!(m.heavy_atom_count(), 4);
    assert_eq!(m.bonds().len(), 3);
}

#[test]
fn error_kinds() {
    assert!(matches!(parse_smiles("C1CC"), Err(ParseError::Syntax { .. })));
    assert!(matches!(parse_smiles("C(C)(C)(C)(C)C"), Err(ParseError::Valence { .. })));
    assert!(matches!(parse_smiles("C>>C"), Err(ParseError::Unsupported { .. })));
}

#[test]
fn phenol_matches_reference_canonical_form() {
    // Reference toolkit output for c1ccccc1O, frozen before the build.
    let reference = "Oc1ccccc1";
    let ours = parse_smiles("c1ccccc1O").unwrap().to_canonical_smiles();
    assert_eq!(ours, parse_smiles(reference).unwrap().to_canonical_smiles());
    assert_eq!(ours, "Oc1ccccc1");
}

#[test]
fn corpus_parses() {
    let bad: Vec<_> = corpus()
        .into_iter()
        .filter_map(|s| parse_smiles(s).err().map(|e| format!("{s}: {e}")))
        .collect();
    assert!(bad.is_empty(), "{} failures, first: {:?}", bad.len(), &bad[..bad.len().min(5)]);
}

#[test]
fn corpus_canonical_round_trip_and_idempotence() {
    for s in corpus() {
        let m = parse_smiles(s).unwrap();
        let c = m.to_canonical_smiles();
        let again = parse_smiles(&c).unwrap_or_else(|e| panic!("{s} -> {c}: {e}"));
        assert_eq!(again.to_canonical_smiles(), c, "{s}");
        assert_eq!(again.atoms().len(), m.atoms().len());
        assert_eq!(again.bonds().len(), m.bonds().len());
    }
}

#[test]
fn corpus_random_traversals_round_trip() {
    for (k, s) in corpus().into_iter().enumerate() {
        let m = parse_smiles(s).unwrap();
        let c = m.to_canonical_smiles();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + k as u64);
            let r = m.random_traversal_smiles(&mut rng);
            let back = parse_smiles(&r).unwrap_or_else(|e| panic!("{s} -> {r}: {e}"));
            assert_eq!(back.to_canonical_smiles(), c, "{s} -> {r}");
        }
    }
}

#[test]
fn index_order_writer_round_trips() {
    for s in corpus() {
        let m = parse_smiles(s).unwrap();
        let w = m.to_smiles();
        let back = parse_smiles(&w).unwrap_or_else(|e| panic!("{s} -> {w}: {e}"));
        assert_eq!(back.to_canonical_smiles(), m.to_canonical_smiles());
    }
}

#[test]
fn acetic_acid_traversals() {
    let m = parse_smiles("CC(=O)O").unwrap();
    let canon = m.to_canonical_smiles();
    let mut seen = HashSet::new();
    for seed in 0..200 {
        let s = m.random_traversal_smiles(&mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(parse_smiles(&s).unwrap().to_canonical_smiles(), canon);
        seen.insert(s);
    }
    assert!(seen.len() >= 3, "{seen:?}");
    let single = parse_smiles("C").unwrap();
    for seed in 0..10 {
        assert_eq!(single.random_traversal_smiles(&mut ChaCha8Rng::seed_from_u64(seed)), "C");
    }
}

#[test]
fn fingerprint_of_random_traversal_is_identical() {
    for s in corpus().into_iter().step_by(7) {
        let m = parse_smiles(s).unwrap();
        let fp = circular_fingerprint(&m, 2, 2048).unwrap();
        assert!(fp.count_ones() >= 1);
        let r = m.random_traversal_smiles(&mut ChaCha8Rng::seed_from_u64(3));
        let fp2 = circular_fingerprint(&parse_smiles(&r).unwrap(), 2, 2048).unwrap();
        assert_eq!(fp, fp2, "{s} vs {r}");
    }
    let a = circular_fingerprint(&parse_smiles("CC(=O)O").unwrap(), 2, 2048).unwrap();
    assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
}

/// Reindexes atoms by writing the molecule with a shuffled atom order.
fn shuffled_copy(m: &Molecule, seed: u64) -> Molecule {
    let s = m.random_traversal_smiles(&mut ChaCha8Rng::seed_from_u64(seed));
    parse_smiles(&s).unwrap()
}

fn corpus_molecule() -> impl Strategy<Value = &'static str> {
    let all = corpus();
    (0..all.len()).prop_map(move |i| all[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_is_idempotent(s in corpus_molecule()) {
        let c = parse_smiles(s).unwrap().to_canonical_smiles();
        prop_assert_eq!(parse_smiles(&c).unwrap().to_canonical_smiles(), c);
    }

    #[test]
    fn fingerprint_is_permutation_invariant(s in corpus_molecule(), seed in any::<u64>(), radius in 0u32..4) {
        let m = parse_smiles(s).unwrap();
        let p = shuffled_copy(&m, seed);
        prop_assert_eq!(circular_fingerprint(&m, radius, 1024).unwrap(), circular_fingerprint(&p, radius, 1024).unwrap());
    }

    #[test]
    fn tanimoto_laws(a in corpus_molecule(), b in corpus_molecule()) {
        let fa = circular_fingerprint(&parse_smiles(a).unwrap(), 2, 2048).unwrap();
        let fb = circular_fingerprint(&parse_smiles(b).unwrap(), 2, 2048).unwrap();
        let ab = tanimoto(&fa, &fb).unwrap();
        prop_assert_eq!(ab, tanimoto(&fb, &fa).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(tanimoto(&fa, &fa).unwrap(), 1.0);
    }

    #[test]
    fn parser_never_panics(s in "[CNOcnos()=#123%\\[\\]H+\\-.@/\\\\]{0,24}") {
        let _ = parse_smiles(&s);
    }

    #[test]
    fn shuffled_atom_order_keeps_canonical_form(s in corpus_molecule(), seed in any::<u64>()) {
        let m = parse_smiles(s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parts: Vec<String> = m.to_canonical_smiles().split('.').map(String::from).collect();
        parts.shuffle(&mut rng);
        let joined = parts.join(".");
        prop_assert_eq!(parse_smiles(&joined).unwrap().to_canonical_smiles(), m.to_canonical_smiles());
    }
}

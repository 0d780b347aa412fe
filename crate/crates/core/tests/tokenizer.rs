use std::collections::{BTreeMap, BTreeSet};

use gym_core::chem::parse_smiles;
use gym_core::selfies::{decode_selfies, encode_selfies};
use gym_core::task::{AnswerType, Entity, Format, TaskRecord};
use gym_core::tokenizer::{augment_record, detokenize, tokenize, AugmentationPolicy, Vocabulary};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: &str = include_str!("data/corpus_1000.smi");

fn names(text: &str) -> Vec<String> {
    let v = Vocabulary::builtin();
    tokenize(text, &v, true).unwrap().names(&v).into_iter().map(String::from).collect()
}

#[test]
fn acetic_acid_token_sequence() {
    assert_eq!(
        names("<smiles>CC(=O)O</smiles>"),
        ["<smiles>", "sm_C", "sm_C", "sm_(", "sm_=", "sm_O", "sm_)", "sm_O", "</smiles>"]
    );
    let v = Vocabulary::builtin();
    let seq = tokenize("<smiles>CC(=O)O</smiles>", &v, true).unwrap();
    assert_eq!(detokenize(&seq.ids, &v).unwrap(), "<smiles>CC(=O)O</smiles>");
    assert_eq!(seq.spans.len(), 1);
    assert_eq!((seq.spans[0].start, seq.spans[0].end), (0, 9));
}

#[test]
fn empty_text() {
    let v = Vocabulary::builtin();
    let seq = tokenize("", &v, true).unwrap();
    assert!(seq.is_empty());
    assert_eq!(detokenize(&seq.ids, &v).unwrap(), "");
}

#[test]
fn multi_character_symbols_are_atomic() {
    assert_eq!(names("<smiles>CCl</smiles>"), ["<smiles>", "sm_C", "sm_Cl", "</smiles>"]);
    assert_eq!(
        names("<smiles>C%12CC%12Br</smiles>"),
        ["<smiles>", "sm_C", "sm_%12", "sm_C", "sm_C", "sm_%12", "sm_Br", "</smiles>"]
    );
    assert_eq!(
        names("<smiles>[NH4+]</smiles>"),
        ["<smiles>", "sm_[", "sm_N", "sm_H", "sm_4", "sm_+", "sm_]", "</smiles>"]
    );
    assert_eq!(
        names("<selfies>[C][=Branch1]</selfies>"),
        ["<selfies>", "sf_[C]", "sf_[=Branch1]", "</selfies>"]
    );
}

fn random_form(smiles: &str, rng: &mut ChaCha8Rng) -> (Format, String) {
    let m = parse_smiles(smiles).unwrap();
    match rng.gen_range(0..4) {
        0 => (Format::Smiles, m.to_canonical_smiles()),
        1 => (Format::Smiles, m.random_traversal_smiles(rng)),
        2 => (Format::Selfies, encode_selfies(&m).unwrap().to_string()),
        _ => {
            let r = parse_smiles(&m.random_traversal_smiles(rng)).unwrap();
            (Format::Selfies, encode_selfies(&r).unwrap().to_string())
        }
    }
}

/// Chat lines mixing prose, tagged molecules and protein sequences.
fn corpus_lines(n: usize, seed: u64) -> Vec<String> {
    let mols: Vec<&str> = CORPUS.lines().collect();
    let prose = ["What is the solubility of ", "Consider ", "Ünïcode ✓ and ", "", "  \t"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (format, value) = random_form(mols.choose(&mut rng).unwrap(), &mut rng);
            let (second_format, second) = random_form(mols.choose(&mut rng).unwrap(), &mut rng);
            let p = prose.choose(&mut rng).unwrap();
            match rng.gen_range(0..3) {
                0 => format!("{p}{}?", format.wrap(&value)),
                1 => format!(
                    "<|im_start|>user\n{p}{}<|im_end|>\n<|im_start|>assistant\n<think>ok</think><answer>{}</answer><|im_end|>",
                    format.wrap(&value),
                    Format::Smiles.wrap(&parse_smiles(&decode_or_parse(second_format, &second)).unwrap().to_canonical_smiles())
                ),
                _ => format!("{p}{} binds <fasta>MKTAYIAKQR</fasta>", format.wrap(&value)),
            }
        })
        .collect()
}

fn decode_or_parse(format: Format, value: &str) -> String {
    match format {
        Format::Selfies => decode_selfies(&value.parse().unwrap()).unwrap().to_canonical_smiles(),
        _ => value.to_string(),
    }
}

#[test]
fn corpus_lines_round_trip_byte_identically() {
    let v = Vocabulary::builtin();
    let lines = corpus_lines(10_000, 42);
    for (i, line) in lines.iter().enumerate() {
        for isolate in [true, false] {
            let seq = tokenize(line, &v, isolate).unwrap_or_else(|e| panic!("line {i}: {e}: {line}"));
            assert_eq!(&detokenize(&seq.ids, &v).unwrap(), line, "line {i}");
        }
    }
}

#[test]
fn every_serializer_output_has_tokens() {
    let v = Vocabulary::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for smiles in CORPUS.lines() {
        let m = parse_smiles(smiles).unwrap();
        for s in [m.to_canonical_smiles(), m.to_smiles(), m.random_traversal_smiles(&mut rng)] {
            tokenize(&Format::Smiles.wrap(&s), &v, true).unwrap();
        }
        tokenize(&Format::Selfies.wrap(&encode_selfies(&m).unwrap().to_string()), &v, true).unwrap();
    }
}

#[test]
fn isolation_only_changes_user_spans() {
    let v = Vocabulary::builtin();
    let text = "<|im_start|>user\nIs <smiles>CCO</smiles> toxic?<|im_end|>\n<|im_start|>assistant\n<answer><smiles>CCO</smiles></answer><|im_end|>";
    let on = tokenize(text, &v, true).unwrap();
    let off = tokenize(text, &v, false).unwrap();
    assert_eq!(on.spans.len(), 2);
    assert_eq!(off.spans.len(), 1);
    assert!(on.len() < off.len());
}

fn record(entities: &[(&str, Format, &str)]) -> TaskRecord {
    let template: String = entities.iter().map(|(k, _, _)| format!("{{{k}}} ")).collect();
    TaskRecord {
        category: "2d_molecule".into(),
        task_id: "demo".into(),
        prompt_templates: vec![template],
        entities: entities
            .iter()
            .map(|(k, f, v)| (k.to_string(), Entity::new(*f, *v)))
            .collect::<BTreeMap<_, _>>(),
        answer: "True".into(),
        answer_type: AnswerType::Classification {
            labels: vec!["True".into(), "False".into()],
        },
    }
}

fn canonical(e: &Entity) -> String {
    match e.format {
        Format::Smiles => parse_smiles(&e.value).unwrap().to_canonical_smiles(),
        Format::Selfies => decode_selfies(&e.value.parse().unwrap()).unwrap().to_canonical_smiles(),
        _ => e.value.clone(),
    }
}

#[test]
fn identity_policy_leaves_records_unchanged() {
    let rec = record(&[("a", Format::Smiles, "OC(C)=O"), ("b", Format::Selfies, "[C][O]"), ("p", Format::Fasta, "MKV")]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        assert_eq!(augment_record(&rec, &AugmentationPolicy::identity(), &mut rng).unwrap(), rec);
    }
}

#[test]
fn format_conversion_retags_and_keeps_identity() {
    let rec = record(&[("a", Format::Smiles, "CC(=O)O")]);
    let policy = AugmentationPolicy {
        p_format_convert: 1.0,
        p_random_traversal: 0.0,
        ..AugmentationPolicy::default()
    };
    let out = augment_record(&rec, &policy, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let e = &out.entities["a"];
    assert_eq!(e.format, Format::Selfies);
    assert!(e.tagged().starts_with("<selfies>"));
    assert_eq!(canonical(e), canonical(&rec.entities["a"]));
}

#[test]
fn random_traversal_gives_many_surfaces_of_one_molecule() {
    let rec = record(&[("a", Format::Smiles, "CC(=O)Oc1ccccc1C(=O)O")]);
    let policy = AugmentationPolicy {
        p_format_convert: 0.0,
        p_random_traversal: 1.0,
        ..AugmentationPolicy::default()
    };
    let target = canonical(&rec.entities["a"]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut surfaces = BTreeSet::new();
    for _ in 0..1000 {
        let out = augment_record(&rec, &policy, &mut rng).unwrap();
        let e = &out.entities["a"];
        assert_eq!(canonical(e), target);
        surfaces.insert(e.value.clone());
    }
    assert!(surfaces.len() >= 3, "{} surfaces", surfaces.len());
}

#[test]
fn generation_targets_are_canonicalized_not_traversed() {
    let mut rec = record(&[("a", Format::Smiles, "CCO")]);
    rec.answer = "OCC".into();
    rec.answer_type = AnswerType::Generation {
        ground_truth: Some(vec!["OCC".into(), "C(C)O".into()]),
    };
    let out = augment_record(&rec, &AugmentationPolicy::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let c = parse_smiles("CCO").unwrap().to_canonical_smiles();
    assert_eq!(out.answer, c);
    assert_eq!(out.answer_type, AnswerType::Generation { ground_truth: Some(vec![c.clone(), c]) });
}

#[test]
fn augmentation_is_seed_deterministic() {
    let rec = record(&[("a", Format::Smiles, "c1ccccc1CN"), ("b", Format::Smiles, "CC(=O)Cl")]);
    let p = AugmentationPolicy::default();
    let a = augment_record(&rec, &p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = augment_record(&rec, &p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unparseable_entity_is_an_error() {
    let rec = record(&[("a", Format::Smiles, "C1CC")]);
    assert!(augment_record(&rec, &AugmentationPolicy::default(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn detokenize_inverts_tokenize(text in "\\PC{0,60}", isolate in any::<bool>()) {
        let v = Vocabulary::builtin();
        if let Ok(seq) = tokenize(&text, &v, isolate) {
            prop_assert_eq!(detokenize(&seq.ids, &v).unwrap(), text);
        }
    }

    #[test]
    fn isolation_does_not_change_text(seed in any::<u64>()) {
        let v = Vocabulary::builtin();
        let line = &corpus_lines(1, seed)[0];
        let a = detokenize(&tokenize(line, &v, true).unwrap().ids, &v).unwrap();
        let b = detokenize(&tokenize(line, &v, false).unwrap().ids, &v).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn augmentation_preserves_molecules(pick in 0usize..1000, seed in any::<u64>()) {
        let smiles = CORPUS.lines().nth(pick).unwrap();
        let rec = record(&[("a", Format::Smiles, smiles)]);
        let out = augment_record(&rec, &AugmentationPolicy::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(canonical(&out.entities["a"]), canonical(&rec.entities["a"]));
    }

    #[test]
    fn chemical_spans_tokenize_to_one_token_per_symbol(pick in 0usize..1000) {
        let smiles = CORPUS.lines().nth(pick).unwrap();
        let v = Vocabulary::builtin();
        let seq = tokenize(&Format::Smiles.wrap(smiles), &v, true).unwrap();
        // Every inner token is a chemical token.
        for &id in &seq.ids[1..seq.len() - 1] {
            prop_assert!(v.chem_range().contains(&id));
        }
    }
}

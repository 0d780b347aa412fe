use std::sync::Arc;

use gym_core::sampler::{sample_batch, ExampleStore, Registry, Sampler, SamplerError, DEFAULT_CATEGORIES};
use gym_core::task::TaskRecord;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn record(category: &str, task: &str, answer: &str) -> TaskRecord {
    serde_json::from_value(serde_json::json!({
        "category": category,
        "task_id": task,
        "prompt_templates": ["Is {m} active?"],
        "entities": {"m": {"format": "smiles", "value": "CCO"}},
        "answer": answer,
        "answer_type": {"kind": "classification", "labels": ["Yes", "No"]},
    }))
    .unwrap()
}

/// Category `i` gets `i + 1` tasks; example counts run from 1 to 10^6.
fn skewed_registry() -> Registry {
    let mut reg = Registry::default();
    for (i, cat) in DEFAULT_CATEGORIES.iter().enumerate() {
        for j in 0..=i {
            let task = format!("t{j}");
            let shared = Arc::new(record(cat, &task, "Yes"));
            let count = 10usize.pow(((i + j) % 7) as u32);
            reg.add_task(cat, &task, ExampleStore::from_shared(std::iter::repeat_n(shared, count)))
                .unwrap();
        }
    }
    reg
}

fn chi_square_p(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn stores_are_skewed_one_to_a_million() {
    let reg = skewed_registry();
    let sizes: Vec<usize> = reg.categories().iter().flat_map(|c| c.tasks.iter().map(|t| t.store.len())).collect();
    assert_eq!(sizes.iter().min(), Some(&1));
    assert_eq!(sizes.iter().max(), Some(&1_000_000));
}

#[test]
fn categories_and_tasks_are_uniform() {
    let reg = skewed_registry();
    let draws = reg.sample_draws(60_000, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
    let mut per_category = vec![0u64; 6];
    let mut per_task: Vec<Vec<u64>> = (0..6).map(|i| vec![0; i + 1]).collect();
    for d in &draws {
        per_category[d.category] += 1;
        per_task[d.category][d.task] += 1;
    }
    let p = chi_square_p(&per_category);
    assert!(p > 0.001, "categories {per_category:?} p={p}");
    for counts in per_task.iter().filter(|c| c.len() > 1) {
        let p = chi_square_p(counts);
        assert!(p > 0.001, "tasks {counts:?} p={p}");
    }
}

#[test]
fn examples_within_a_task_are_uniform() {
    let mut reg = Registry::new(["c".to_string()]);
    reg.add_task("c", "t", ExampleStore::from_records((0..10).map(|i| record("c", "t", if i % 2 == 0 { "Yes" } else { "No" }))))
        .unwrap();
    let draws = reg.sample_draws(20_000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let mut counts = vec![0u64; 10];
    for d in draws {
        counts[d.example] += 1;
    }
    assert!(chi_square_p(&counts) > 0.001, "{counts:?}");
}

#[test]
fn two_categories_ignore_example_counts() {
    let mut reg = Registry::new(["small".to_string(), "large".to_string()]);
    reg.add_task("small", "a", ExampleStore::from_records([record("small", "a", "Yes")])).unwrap();
    let big = Arc::new(record("large", "b", "No"));
    reg.add_task("large", "b", ExampleStore::from_shared(std::iter::repeat_n(big, 1_000_000))).unwrap();
    let draws = reg.sample_draws(100_000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let small = draws.iter().filter(|d| d.category == 0).count() as u64;
    assert!(chi_square_p(&[small, 100_000 - small]) > 0.001, "{small}");
}

#[test]
fn same_seed_same_stream() {
    let reg = skewed_registry();
    let run = |seed| {
        let mut s = Sampler::new(&reg, seed);
        (0..5).map(|_| s.next_batch(16).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(run(11), run(11));
    let a = reg.sample_draws(64, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let b = reg.sample_draws(64, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, recs: &[TaskRecord]| {
        let body: String = recs.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
        std::fs::write(dir.path().join(name), body).unwrap();
    };
    write("a.jsonl", &[record("mol", "a", "Yes"), record("mol", "a", "No"), record("mol", "a", "Yes")]);
    write("b.jsonl", &[record("prot", "b", "No")]);
    let manifest = dir.path().join("gym.toml");
    std::fs::write(
        &manifest,
        "categories = [\"mol\", \"prot\"]\n[tasks.mol]\na = \"a.jsonl\"\n[tasks.prot]\nb = \"b.jsonl\"\n",
    )
    .unwrap();
    let reg = Registry::from_manifest(&manifest).unwrap();
    assert_eq!(reg.categories()[0].tasks[0].store.len(), 3);
    let batch = sample_batch(&reg, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(batch.iter().any(|r| r.category == "prot") && batch.iter().any(|r| r.category == "mol"));

    // A record filed under the wrong category is a schema error on its line.
    write("b.jsonl", &[record("prot", "b", "No"), record("mol", "b", "No")]);
    assert!(matches!(Registry::from_manifest(&manifest), Err(SamplerError::Schema { line: 2, .. })));

    std::fs::write(&manifest, "[tasks.other]\na = \"a.jsonl\"\n").unwrap();
    assert!(matches!(Registry::from_manifest(&manifest), Err(SamplerError::UnknownCategory(_))));

    // Default categories: four of six are left empty.
    write("c.jsonl", &[record("2d_molecule", "c", "No")]);
    std::fs::write(&manifest, "[tasks.2d_molecule]\nc = \"c.jsonl\"\n").unwrap();
    let reg = Registry::from_manifest(&manifest).unwrap();
    assert!(matches!(
        sample_batch(&reg, 1, &mut ChaCha8Rng::seed_from_u64(1)),
        Err(SamplerError::EmptyCategory(_))
    ));
}

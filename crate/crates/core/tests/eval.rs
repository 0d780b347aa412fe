use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;

use gym_core::eval::harness::{write_results_jsonl, write_summary_csv, Runner, SuiteReport};
use gym_core::eval::metrics::{accuracy, auprc, auroc, mae, rmse, spearman, tanimoto_sim_mean};
use gym_core::eval::provider::{CompletionProvider, CompletionRequest, HttpConfig, HttpProvider, ProviderError};
use gym_core::eval::{
    aggregate, assemble_prompt, class_probs_from_logprobs, demo, parse_completion, EvalError, Prediction, PromptPlan,
    Rule, Value,
};
use gym_core::task::TaskRecord;
use gym_core::tokenizer::{AugmentationPolicy, Vocabulary};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Deserialize)]
struct StatsCase {
    labels: Vec<u8>,
    scores: Vec<f64>,
    auroc: f64,
    auprc: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    spearman: f64,
}

#[derive(Deserialize)]
struct StatsGolden {
    cases: Vec<StatsCase>,
    softmax_1_0_m1: Vec<f64>,
}

fn golden() -> StatsGolden {
    serde_json::from_str(include_str!("data/stats_golden.json")).unwrap()
}

fn nums(xs: &[f64]) -> Vec<Prediction> {
    xs.iter().map(|&x| Prediction::new(Value::Number(x))).collect()
}

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn record(templates: &[&str]) -> TaskRecord {
    serde_json::from_value(serde_json::json!({
        "category": "2d_molecule",
        "task_id": "t",
        "prompt_templates": templates,
        "entities": {"mol": {"format": "smiles", "value": "CC(=O)O"}},
        "answer": "True",
        "answer_type": {"kind": "classification", "labels": ["True", "False"]},
    }))
    .unwrap()
}

#[test]
fn aggregation_worked_examples() {
    assert_eq!(aggregate(nums(&[1.0, 3.0, 2.0]), &Rule::Median).unwrap().value, Value::Number(2.0));
    assert_eq!(aggregate(nums(&[1.0, 2.0, 3.0, 4.0]), &Rule::Median).unwrap().value, Value::Number(2.5));
    let votes = ["A", "A", "B"].map(|l| Prediction::new(Value::Label(l.into()))).to_vec();
    assert_eq!(aggregate(votes, &Rule::Majority).unwrap().value, Value::Label("A".into()));
    assert_eq!(aggregate(vec![], &Rule::Median), Err(EvalError::Empty));
}

#[test]
fn softmax_worked_examples() {
    let v = Vocabulary::builtin();
    let tf = labels(&["True", "False"]);
    let eq = class_probs_from_logprobs(&BTreeMap::from([("True".into(), -0.7), ("False".into(), -0.7)]), &tf, &v).unwrap();
    assert_eq!((eq["True"], eq["False"]), (0.5, 0.5));
    let lp = BTreeMap::from([("True".into(), 0.0), ("False".into(), -(3f64.ln()))]);
    let p = class_probs_from_logprobs(&lp, &tf, &v).unwrap();
    assert!((p["True"] - 0.75).abs() <= 1e-15 && (p["False"] - 0.25).abs() <= 1e-15, "{p:?}");

    let abc = labels(&["A", "B", "C"]);
    let lp = BTreeMap::from([("A".into(), 1.0), ("B".into(), 0.0), ("C".into(), -1.0)]);
    let p = class_probs_from_logprobs(&lp, &abc, &v).unwrap();
    for (label, want) in abc.iter().zip(golden().softmax_1_0_m1) {
        assert!((p[label] - want).abs() <= 1e-15, "{label}: {} vs {want}", p[label]);
    }
}

#[test]
fn shared_first_tokens_are_ambiguous() {
    let v = Vocabulary::builtin();
    let lp = BTreeMap::from([("Y".into(), -0.1)]);
    assert!(matches!(
        class_probs_from_logprobs(&lp, &labels(&["Yes", "Yeah"]), &v),
        Err(EvalError::AmbiguousLabelTokens { .. })
    ));
    assert_eq!(
        class_probs_from_logprobs(&BTreeMap::new(), &labels(&["True", "False"]), &v),
        Err(EvalError::NoLabelLogprobs)
    );
}

#[test]
fn golden_rank_statistics() {
    for (i, c) in golden().cases.iter().enumerate() {
        let l: Vec<bool> = c.labels.iter().map(|&x| x == 1).collect();
        let (a, p, s) = (auroc(&l, &c.scores).unwrap(), auprc(&l, &c.scores).unwrap(), spearman(&c.x, &c.y).unwrap());
        assert!((a - c.auroc).abs() <= 1e-9, "case {i} auroc {a} vs {}", c.auroc);
        assert!((p - c.auprc).abs() <= 1e-9, "case {i} auprc {p} vs {}", c.auprc);
        assert!((s - c.spearman).abs() <= 1e-9, "case {i} spearman {s} vs {}", c.spearman);
    }
}

#[test]
fn auroc_ignores_monotone_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..100 {
        let n = rng.gen_range(4..40);
        let mut l: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        l[0] = true;
        l[1] = false;
        let s: Vec<f64> = (0..n).map(|_| (rng.gen_range(0.0..1.0f64) * 20.0).round() / 20.0).collect();
        let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() + x.powi(3) - 7.0).collect();
        assert_eq!(auroc(&l, &s).unwrap(), auroc(&l, &t).unwrap());
    }
}

#[test]
fn identical_predictions_score_perfectly() {
    let xs = [0.5, -1.0, 2.25];
    assert_eq!(mae(&xs, &xs).unwrap(), 0.0);
    assert_eq!(rmse(&xs, &xs).unwrap(), 0.0);
    assert_eq!(accuracy(&["a", "b"], &["a", "b"]).unwrap(), 1.0);
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[9.0, 5.0, 1.0]).unwrap(), -1.0);
    assert_eq!(auroc(&[false, true, false, true], &[0.1, 0.8, 0.3, 0.9]).unwrap(), 1.0);
    let same = tanimoto_sim_mean(&["CCO".into()], &[Some("OCC".into())]).unwrap();
    assert_eq!(same, 1.0);
}

#[test]
fn parsing_worked_examples() {
    let reg: gym_core::task::AnswerType = serde_json::from_str(r#"{"kind":"regression","range":[0,1]}"#).unwrap();
    assert_eq!(parse_completion("<think>…</think><answer>0.82</answer>", &reg).value, Value::Number(0.82));
    assert!(matches!(parse_completion("<think>…</think>", &reg).value, Value::Invalid(_)));
    let gen: gym_core::task::AnswerType = serde_json::from_str(r#"{"kind":"generation"}"#).unwrap();
    assert_eq!(parse_completion("<answer>CC(=O)O</answer>", &gen).value, Value::Molecule("CC(=O)O".into()));
}

#[test]
fn single_template_without_augmentation_is_stable() {
    let rec = record(&["Is {mol} toxic?"]);
    let plan = PromptPlan {
        augmentation: AugmentationPolicy::identity(),
        ..PromptPlan::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10 {
        let p = assemble_prompt(&rec, &plan, &[], &mut rng).unwrap();
        assert_eq!(p.text, "Is <smiles>CC(=O)O</smiles> toxic?");
    }
}

#[test]
fn templates_are_drawn_uniformly() {
    let rec = record(&["A {mol}", "B {mol}", "C {mol}", "D {mol}"]);
    let plan = PromptPlan::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = [0u64; 4];
    for _ in 0..400 {
        counts[assemble_prompt(&rec, &plan, &[], &mut rng).unwrap().template] += 1;
    }
    let stat: f64 = counts.iter().map(|&c| (c as f64 - 100.0).powi(2) / 100.0).sum();
    let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(stat);
    assert!(p > 0.001, "{counts:?}");
}

#[test]
fn few_shot_prepends_solved_examples() {
    let rec = record(&["Q {mol}"]);
    let shots: Vec<TaskRecord> = (0..5)
        .map(|i| {
            let mut s = record(&["Q {mol}"]);
            s.entities.get_mut("mol").unwrap().value = "C".repeat(i + 1);
            s
        })
        .collect();
    let plan = PromptPlan {
        few_shot: 2,
        augmentation: AugmentationPolicy::identity(),
        ..PromptPlan::default()
    };
    let p = assemble_prompt(&rec, &plan, &shots, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let blocks: Vec<&str> = p.text.split("\n\n").collect();
    assert_eq!(blocks.len(), 3);
    assert!(blocks[..2].iter().all(|b| b.ends_with("<answer>True</answer>")));
    assert_eq!(blocks[2], "Q <smiles>CC(=O)O</smiles>");
}

#[test]
fn missing_placeholder_is_reported() {
    let rec = record(&["Is {mol} toxic?"]);
    let plan = PromptPlan {
        template_pool: Some(vec!["Is it toxic?".into()]),
        ..PromptPlan::default()
    };
    assert!(matches!(
        assemble_prompt(&rec, &plan, &[], &mut ChaCha8Rng::seed_from_u64(0)),
        Err(EvalError::MissingPlaceholder { .. })
    ));
}

/// Serves one canned chat-completion response and returns the request body.
fn one_shot_server(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            if line == "\r\n" {
                break;
            }
        }
        let mut req = vec![0; len];
        reader.read_exact(&mut req).unwrap();
        reader.get_mut().write_all(response.as_bytes()).unwrap();
        String::from_utf8(req).unwrap()
    });
    (url, handle)
}

fn request() -> CompletionRequest {
    CompletionRequest {
        prompt: "Is <smiles>CCO</smiles> toxic?".into(),
        temperature: 1.4,
        max_tokens: 64,
        logprobs: true,
        seed: 9,
        example_id: "x#0".into(),
        repetition: 0,
    }
}

#[test]
fn http_provider_round_trip() {
    let body = r#"{"choices":[{"message":{"content":"<answer>True</answer>"},
        "logprobs":{"content":[{"token":"True","logprob":-0.1,"top_logprobs":[{"token":"True","logprob":-0.1},{"token":"False","logprob":-2.4}]}]}}]}"#;
    let (url, server) = one_shot_server("200 OK", body);
    let p = HttpProvider::new(HttpConfig {
        base_url: url,
        model: "m".into(),
        api_key_env: String::new(),
        ..HttpConfig::default()
    })
    .unwrap();
    let r = p.complete(&request()).unwrap();
    assert_eq!(r.text, "<answer>True</answer>");
    assert_eq!(r.first_token_logprobs.unwrap()["False"], -2.4);
    let sent: serde_json::Value = serde_json::from_str(&server.join().unwrap()).unwrap();
    assert_eq!(sent["messages"][0]["content"], "Is <smiles>CCO</smiles> toxic?");
    assert_eq!(sent["temperature"], 1.4);
    assert_eq!(sent["logprobs"], true);
}

#[test]
fn http_provider_errors() {
    let (url, server) = one_shot_server("500 Internal Server Error", r#"{"error":"boom"}"#);
    let p = HttpProvider::new(HttpConfig {
        base_url: url,
        api_key_env: String::new(),
        ..HttpConfig::default()
    })
    .unwrap();
    assert!(matches!(p.complete(&request()), Err(ProviderError::Status { status: 500, .. })));
    server.join().unwrap();
    let missing = HttpProvider::new(HttpConfig {
        api_key_env: "GYM_TEST_KEY_THAT_IS_NOT_SET".into(),
        ..HttpConfig::default()
    });
    assert!(matches!(missing, Err(ProviderError::MissingApiKey(_))));
}

fn run_demo(seed: u64) -> SuiteReport {
    let suite = demo::suite().unwrap();
    let mock = demo::mock().unwrap();
    let vocab = Vocabulary::builtin();
    Runner::new(&mock, &vocab).run(&suite, seed).unwrap()
}

#[test]
fn demo_suite_matches_hand_computed_summary() {
    let report = run_demo(0);
    assert_eq!(report.results.len(), 50);
    let expected: BTreeMap<String, BTreeMap<String, f64>> =
        serde_json::from_str(include_str!("../data/demo/expected.json")).unwrap();
    for s in &report.summary {
        for (metric, want) in &expected[&s.task_id] {
            let got = s.metrics[metric];
            assert!((got - want).abs() <= 1e-9, "{} {metric}: {got} vs {want}", s.task_id);
        }
        assert!(s.metric_errors.is_empty(), "{:?}", s.metric_errors);
    }
    assert_eq!(report.summary[1].metrics["validity"], 56.0 / 60.0);
}

#[test]
fn demo_outputs_are_deterministic() {
    let render = |seed| {
        let r = run_demo(seed);
        let (mut csv, mut jsonl) = (Vec::new(), Vec::new());
        write_summary_csv(&r, &mut csv).unwrap();
        write_results_jsonl(&r, &mut jsonl).unwrap();
        (String::from_utf8(csv).unwrap(), String::from_utf8(jsonl).unwrap())
    };
    let (csv, jsonl) = render(3);
    assert_eq!(render(3), (csv.clone(), jsonl.clone()));
    assert_eq!(jsonl.lines().count(), 50);
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("suite,task,kind,examples,predictions,accuracy,mae"));
    assert!(csv.contains("demo,demo_logp,regression,20,60,,0.180000"), "{csv}");
    // The seed moves templates and augmentation, not the scripted answers.
    assert_eq!(render(4).0, csv);
}

proptest! {
    #[test]
    fn aggregation_is_permutation_invariant(xs in prop::collection::vec(-1e3f64..1e3, 1..12), seed in any::<u64>()) {
        let mut shuffled = xs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(aggregate(nums(&xs), &Rule::Median).unwrap().value, aggregate(nums(&shuffled), &Rule::Median).unwrap().value);
        let ls: Vec<Prediction> = xs.iter().map(|x| Prediction::new(Value::Label(format!("{}", (*x as i64).rem_euclid(3))))).collect();
        let mut lsh = ls.clone();
        lsh.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(aggregate(ls, &Rule::Majority).unwrap().value, aggregate(lsh, &Rule::Majority).unwrap().value);
    }

    #[test]
    fn median_ignores_moves_on_one_side(xs in prop::collection::vec(-1e3f64..1e3, 1..12).prop_map(|mut v| { if v.len() % 2 == 0 { v.pop(); } v }), pick in any::<prop::sample::Index>(), shift in 0.0f64..1e3) {
        prop_assume!(!xs.is_empty());
        let m = aggregate(nums(&xs), &Rule::Median).unwrap().value.as_number().unwrap();
        let i = pick.index(xs.len());
        let mut ys = xs.clone();
        if ys[i] > m { ys[i] += shift } else if ys[i] < m { ys[i] -= shift }
        prop_assert_eq!(aggregate(nums(&ys), &Rule::Median).unwrap().value.as_number().unwrap(), m);
    }

    #[test]
    fn softmax_ignores_constant_shift(a in -20.0f64..0.0, b in -20.0f64..0.0, c in -20.0f64..0.0, shift in -50.0f64..50.0) {
        let v = Vocabulary::builtin();
        let ls = labels(&["A", "B", "C"]);
        let lp = BTreeMap::from([("A".to_string(), a), ("B".to_string(), b), ("C".to_string(), c)]);
        let shifted: BTreeMap<String, f64> = lp.iter().map(|(k, x)| (k.clone(), x + shift)).collect();
        let (p, q) = (class_probs_from_logprobs(&lp, &ls, &v).unwrap(), class_probs_from_logprobs(&shifted, &ls, &v).unwrap());
        prop_assert!((p.values().sum::<f64>() - 1.0).abs() <= 1e-6);
        for k in &ls {
            prop_assert!((p[k] - q[k]).abs() <= 1e-12);
        }
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn gym(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_gym"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: &str) -> String {
    let out = gym(args, stdin);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json_lines(s: &str) -> Vec<Value> {
    s.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn core_data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel)
}

#[test]
fn convert_to_selfies_round_trips() {
    let out = json_lines(&ok(&["convert", "--to", "selfies"], "CC(=O)O\n"));
    let selfies = out[0]["output"].as_str().unwrap().to_string();
    assert!(selfies.starts_with("[C]"));
    let back = json_lines(&ok(&["convert", "--from", "selfies", "--to", "canonical"], &format!("{selfies}\n")));
    let canon = json_lines(&ok(&["convert", "--to", "canonical"], "CC(=O)O\n"));
    assert_eq!(back[0]["output"], canon[0]["output"]);
}

#[test]
fn random_conversion_follows_the_seed() {
    let input = "c1ccccc1CC(=O)Nc1ccc(O)cc1\n".repeat(5);
    let a = ok(&["convert", "--to", "random", "--seed", "3"], &input);
    assert_eq!(a, ok(&["convert", "--to", "random", "--seed", "3"], &input));
    assert_ne!(a, ok(&["convert", "--to", "random", "--seed", "4"], &input));
    let canon: Vec<Value> = json_lines(&ok(&["convert", "--to", "canonical"], &input));
    for (line, c) in json_lines(&a).iter().zip(canon) {
        let again = ok(&["convert", "--to", "canonical"], &format!("{}\n", line["output"].as_str().unwrap()));
        assert_eq!(json_lines(&again)[0]["output"], c["output"]);
    }
}

#[test]
fn tokenize_then_detokenize() {
    let text = "What is <smiles>CC(=O)O</smiles>?";
    let line = serde_json::json!({ "text": text }).to_string();
    let toks = json_lines(&ok(&["tokenize", "--names", "--isolate-inputs"], &format!("{line}\n")));
    let names: Vec<&str> = toks[0]["tokens"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(names.contains(&"<smiles>") && names.contains(&"sm_C") && names.contains(&"sm_="), "{names:?}");
    let ids = toks[0]["ids"].to_string();
    let back = json_lines(&ok(&["detokenize"], &format!("{ids}\n{{\"ids\": {ids}}}\n")));
    assert_eq!(back.len(), 2);
    assert!(back.iter().all(|b| b["text"] == text));
}

#[test]
fn score_reproduces_frozen_reports() {
    let fixtures = std::fs::read_to_string(core_data("tests/data/reward_transcripts.jsonl")).unwrap();
    let out = json_lines(&ok(&["score"], &fixtures));
    let expected: Vec<Value> = json_lines(&fixtures).into_iter().map(|l| l["expected"].clone()).collect();
    assert_eq!(out, expected);
}

#[test]
fn evaluate_demo_with_mock_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.jsonl");
    let args = ["evaluate", "--provider", "mock", "--suite", "demo", "--results", results.to_str().unwrap()];
    let csv = ok(&args, "");
    assert_eq!(csv, ok(&args, ""));
    assert_eq!(std::fs::read_to_string(&results).unwrap().lines().count(), 50);

    let expected: Value = serde_json::from_str(&std::fs::read_to_string(core_data("data/demo/expected.json")).unwrap()).unwrap();
    let mut rows = csv::Reader::from_reader(csv.as_bytes());
    let header = rows.headers().unwrap().clone();
    for row in rows.records() {
        let row = row.unwrap();
        let task = &row[1];
        for (metric, want) in expected[task].as_object().unwrap() {
            let col = header.iter().position(|h| h == metric).unwrap();
            let got: f64 = row[col].parse().unwrap();
            assert!((got - want.as_f64().unwrap()).abs() <= 5e-7, "{task} {metric}");
        }
    }
}

#[test]
fn evaluate_suite_file_with_script() {
    let demo = core_data("data/demo");
    let out = ok(
        &[
            "evaluate",
            "--provider",
            "mock",
            "--suite",
            demo.join("suite.toml").to_str().unwrap(),
            "--mock-script",
            demo.join("mock.jsonl").to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out, ok(&["evaluate", "--provider", "mock", "--suite", "demo"], ""));
    let missing = gym(&["evaluate", "--provider", "mock", "--suite", demo.join("suite.toml").to_str().unwrap()], "");
    assert_eq!(missing.status.code(), Some(2));
}

fn task_line(smiles: &str, category: &str) -> String {
    serde_json::json!({
        "category": category,
        "task_id": "t",
        "prompt_templates": ["Describe {mol}."],
        "entities": {"mol": {"format": "smiles", "value": smiles}},
        "answer": "yes",
        "answer_type": {"kind": "classification", "labels": ["yes", "no"]},
    })
    .to_string()
}

#[test]
fn augment_is_a_pure_transform_under_a_seed() {
    let input: String = ["CCO", "c1ccccc1O", "CC(=O)Nc1ccccc1"]
        .iter()
        .map(|s| task_line(s, "2d_molecule") + "\n")
        .collect();
    let a = ok(&["augment", "--seed", "11"], &input);
    assert_eq!(a, ok(&["augment", "--seed", "11"], &input));
    assert_eq!(a.lines().count(), 3);
    let none = ok(&["augment", "--p-format-convert", "0", "--p-random-traversal", "0"], &input);
    let unchanged: Vec<Value> = json_lines(&input);
    assert_eq!(json_lines(&none), unchanged);
    assert_eq!(gym(&["augment", "--p-format-convert", "1.5"], &input).status.code(), Some(2));
}

#[test]
fn sample_follows_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::from("[tasks.2d_molecule]\n");
    for (i, s) in ["CCO", "CCN", "CCC"].iter().enumerate() {
        std::fs::write(dir.path().join(format!("t{i}.jsonl")), task_line(s, "2d_molecule") + "\n").unwrap();
        manifest.push_str(&format!("t{i} = \"t{i}.jsonl\"\n"));
    }
    let path = dir.path().join("manifest.toml");
    std::fs::write(&path, format!("categories = [\"2d_molecule\"]\n{manifest}")).unwrap();
    let args = ["sample", "--manifest", path.to_str().unwrap(), "--batch-size", "5", "--batches", "3", "--seed", "2"];
    let a = ok(&args, "");
    assert_eq!(a.lines().count(), 15);
    assert_eq!(a, ok(&args, ""));
}

#[test]
fn opcheck_passes() {
    let out = json_lines(&ok(&["opcheck"], ""));
    assert_eq!(out.len(), 10);
    assert!(out.iter().all(|c| c["passed"] == true));
}

#[test]
fn vocab_gen_emits_the_inventory() {
    let full = ok(&["vocab-gen"], "");
    let ids: Vec<u32> = full.lines().map(|l| l.rsplit_once('\t').unwrap().1.parse().unwrap()).collect();
    assert_eq!(ids, (0..ids.len() as u32).collect::<Vec<_>>());
    let chem = ok(&["vocab-gen", "--chemical-only"], "");
    assert!(chem.lines().count() > 100 && chem.lines().count() < ids.len());
    assert!(chem.lines().any(|l| l.starts_with("sm_C\t")));

    let dir = tempfile::tempdir().unwrap();
    let inv = dir.path().join("text.tsv");
    std::fs::write(&inv, "a\t0\nb\t1\n").unwrap();
    let small = ok(&["vocab-gen", "--vocab", inv.to_str().unwrap()], "");
    assert!(small.starts_with("a\t0\nb\t1\n<|im_start|>\t2\n"));
}

#[test]
fn exit_codes_and_json_errors() {
    assert_eq!(gym(&["no-such-command"], "").status.code(), Some(2));
    assert_eq!(gym(&["convert"], "CCO\n").status.code(), Some(2));
    let bad = gym(&["--json-errors", "convert", "--to", "selfies"], "CCO\nC(\n");
    assert_eq!(bad.status.code(), Some(1));
    let err: Value = serde_json::from_str(String::from_utf8(bad.stderr).unwrap().trim()).unwrap();
    assert_eq!(err["error"], "data");
    assert!(err["message"].as_str().unwrap().starts_with("input line 2"));
    // Output before the bad line is still written.
    assert_eq!(String::from_utf8(bad.stdout).unwrap().lines().count(), 1);
    let usage = gym(&["--json-errors", "convert", "--to", "nowhere"], "");
    assert_eq!(usage.status.code(), Some(2));
    let err: Value = serde_json::from_str(String::from_utf8(usage.stderr).unwrap().trim()).unwrap();
    assert_eq!(err["error"], "usage");
    assert_eq!(gym(&["score"], "{\"task\": 1}\n").status.code(), Some(1));
}

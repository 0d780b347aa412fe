//! One function per subcommand.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gym_core::chem::{parse_smiles, Molecule};
use gym_core::eval::demo;
use gym_core::eval::harness::{write_results_jsonl, write_summary_csv, Runner, Suite};
use gym_core::eval::provider::{CompletionProvider, HttpConfig, HttpProvider, MockProvider};
use gym_core::rewards::{RewardWeights, ScoreRequest};
use gym_core::sampler::{Registry, Sampler};
use gym_core::selfies::{decode_selfies, encode_selfies, SelfiesString};
use gym_core::task::TaskRecord;
use gym_core::tokenizer::{augment_record, detokenize, tokenize, AugmentationPolicy, Vocabulary};
use hybrid_ops::check;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::io::{each_line, open_input, open_output, parse_line, write_json};
use crate::{
    AugmentArgs, Cli, Command, ConvertArgs, EvaluateArgs, From, OpcheckArgs, ProviderKind, SampleArgs, ScoreArgs, To,
    TokenizeArgs, UsageError, VocabArgs, VocabGenArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let mut out = open_output(cli.output.as_deref())?;
    let input = || open_input(cli.input.as_deref());
    match &cli.command {
        Command::Convert(a) => convert(a, input()?, &mut out, cli.seed)?,
        Command::Tokenize(a) => tokenize_cmd(a, input()?, &mut out)?,
        Command::Detokenize(a) => detokenize_cmd(a, input()?, &mut out)?,
        Command::Augment(a) => augment(a, input()?, &mut out, cli.seed)?,
        Command::Sample(a) => sample(a, &mut out, cli.seed)?,
        Command::Score(a) => score(a, input()?, &mut out)?,
        Command::Evaluate(a) => evaluate(a, &mut out, cli.seed)?,
        Command::Opcheck(a) => opcheck(a, &mut out, cli.seed)?,
        Command::VocabGen(a) => vocab_gen(a, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn load_vocab(a: &VocabArgs) -> Result<Vocabulary> {
    match &a.vocab {
        Some(p) => Vocabulary::from_text_file(p).with_context(|| format!("loading vocabulary {}", p.display())),
        None => Ok(Vocabulary::builtin()),
    }
}

fn read_molecule(from: From, s: &str) -> Result<Molecule> {
    Ok(match from {
        From::Smiles => parse_smiles(s)?,
        From::Selfies => decode_selfies(&s.parse::<SelfiesString>()?)?,
    })
}

fn convert(a: &ConvertArgs, input: impl std::io::BufRead, out: &mut dyn std::io::Write, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    each_line(input, |line| {
        let s = line.trim();
        let m = read_molecule(a.from, s)?;
        let converted = match a.to {
            To::Smiles => m.to_smiles(),
            To::Selfies => encode_selfies(&m)?.to_string(),
            To::Canonical => m.to_canonical_smiles(),
            To::Random => m.random_traversal_smiles(&mut rng),
        };
        write_json(out, &json!({"input": s, "output": converted}))
    })
}

#[derive(Deserialize)]
struct TextLine {
    text: String,
}

fn tokenize_cmd(a: &TokenizeArgs, input: impl std::io::BufRead, out: &mut dyn std::io::Write) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    each_line(input, |line| {
        let TextLine { text } = parse_line(line)?;
        let seq = tokenize(&text, &vocab, a.isolate_inputs)?;
        let mut v = serde_json::to_value(&seq)?;
        if a.names {
            v["tokens"] = json!(seq.names(&vocab));
        }
        write_json(out, &v)
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdsLine {
    Bare(Vec<u32>),
    Object { ids: Vec<u32> },
}

fn detokenize_cmd(a: &VocabArgs, input: impl std::io::BufRead, out: &mut dyn std::io::Write) -> Result<()> {
    let vocab = load_vocab(a)?;
    each_line(input, |line| {
        let ids = match parse_line(line)? {
            IdsLine::Bare(ids) | IdsLine::Object { ids } => ids,
        };
        write_json(out, &json!({"text": detokenize(&ids, &vocab)?}))
    })
}

fn load_policy(a: &AugmentArgs) -> Result<AugmentationPolicy> {
    let mut policy = match &a.policy {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            if p.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text)?
            } else {
                toml::from_str(&text)?
            }
        }
        None => AugmentationPolicy::default(),
    };
    for (slot, flag) in [
        (&mut policy.p_format_convert, a.p_format_convert),
        (&mut policy.p_random_traversal, a.p_random_traversal),
        (&mut policy.p_input_isolation, a.p_input_isolation),
    ] {
        if let Some(p) = flag {
            *slot = p;
        }
    }
    policy.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(policy)
}

fn augment(a: &AugmentArgs, input: impl std::io::BufRead, out: &mut dyn std::io::Write, seed: u64) -> Result<()> {
    let policy = load_policy(a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    each_line(input, |line| {
        let rec: TaskRecord = parse_line(line)?;
        rec.validate()?;
        write_json(out, &augment_record(&rec, &policy, &mut rng)?)
    })
}

fn sample(a: &SampleArgs, out: &mut dyn std::io::Write, seed: u64) -> Result<()> {
    if a.batch_size == 0 {
        bail!(UsageError("--batch-size must be positive".into()));
    }
    let reg = Registry::from_manifest(&a.manifest)?;
    let mut sampler = Sampler::new(&reg, seed);
    for _ in 0..a.batches {
        for rec in sampler.next_batch(a.batch_size)? {
            write_json(out, &rec)?;
        }
    }
    Ok(())
}

fn score(a: &ScoreArgs, input: impl std::io::BufRead, out: &mut dyn std::io::Write) -> Result<()> {
    let w = RewardWeights {
        format: a.w_format,
        think: a.w_think,
        task: a.w_task,
    };
    each_line(input, |line| {
        let req: ScoreRequest = parse_line(line)?;
        write_json(out, &req.score(&w)?)
    })
}

fn mock_from(path: &Path) -> Result<MockProvider> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(MockProvider::from_jsonl(&text)?)
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn std::io::Write, seed: u64) -> Result<()> {
    let builtin = a.suite == "demo";
    let suite = if builtin { demo::suite()? } else { Suite::load(&a.suite)? };
    let provider: Box<dyn CompletionProvider> = match (a.provider, &a.mock_script) {
        (ProviderKind::Mock, Some(p)) => Box::new(mock_from(p)?),
        (ProviderKind::Mock, None) if builtin => Box::new(demo::mock()?),
        (ProviderKind::Mock, None) => bail!(UsageError("--provider mock needs --mock-script for a suite file".into())),
        (ProviderKind::Http, _) => Box::new(HttpProvider::new(HttpConfig {
            base_url: a.base_url.clone(),
            model: a.model.clone(),
            api_key_env: a.api_key_env.clone(),
            timeout_secs: a.timeout_secs,
            max_in_flight: a.max_in_flight,
            ..HttpConfig::default()
        })?),
    };
    let vocab = load_vocab(&VocabArgs { vocab: a.vocab.clone() })?;
    let report = Runner::new(provider.as_ref(), &vocab).run(&suite, seed)?;
    if let Some(p) = &a.results {
        let file = std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
        write_results_jsonl(&report, std::io::BufWriter::new(file))?;
    }
    write_summary_csv(&report, out)?;
    Ok(())
}

fn opcheck(a: &OpcheckArgs, out: &mut dyn std::io::Write, seed: u64) -> Result<()> {
    let results = check::run_all(seed, a.timing)?;
    let mut failed = Vec::new();
    for r in &results {
        let v: Value = json!({
            "check": r.name,
            "value": r.value,
            "bound": if r.at_least { "greater_than" } else { "at_most" },
            "tolerance": r.tolerance,
            "passed": r.passed(),
        });
        write_json(out, &v)?;
        if !r.passed() {
            failed.push(r.name);
        }
    }
    out.flush()?;
    if !failed.is_empty() {
        return Err(anyhow!("failed checks: {}", failed.join(", ")));
    }
    Ok(())
}

fn vocab_gen(a: &VocabGenArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let tsv = vocab.to_tsv();
    if !a.chemical_only {
        out.write_all(tsv.as_bytes())?;
        return Ok(());
    }
    let range = vocab.chem_range();
    for line in tsv.lines() {
        let id: u32 = line.rsplit_once('\t').and_then(|(_, id)| id.parse().ok()).expect("to_tsv writes ids");
        if range.contains(&id) {
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

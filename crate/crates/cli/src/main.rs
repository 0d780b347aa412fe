//! `gym`: JSONL pipelines over the chemistry gym.
//!
//! Exit codes: 0 on success, 1 for data errors (bad input, failed checks),
//! 2 for usage errors. With `--json-errors` the error goes to stderr as one
//! JSON object instead of text.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "gym", version, about = "Chemistry gym pipelines: convert, tokenize, augment, sample, score, evaluate")]
struct Cli {
    /// Report errors on stderr as a JSON object.
    #[arg(long, global = true)]
    json_errors: bool,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Input file; stdin when absent.
    #[arg(short, long, global = true)]
    input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert molecules, one per input line, to JSONL {input, output}.
    Convert(ConvertArgs),
    /// Tokenize JSONL {text} lines into {ids, spans}.
    Tokenize(TokenizeArgs),
    /// Turn JSONL {ids} lines (or bare id arrays) back into {text}.
    Detokenize(VocabArgs),
    /// Augment JSONL task records.
    Augment(AugmentArgs),
    /// Draw balanced batches from a task manifest.
    Sample(SampleArgs),
    /// Score JSONL {task, completion} lines into reward reports.
    Score(ScoreArgs),
    /// Run a benchmark suite; writes the summary CSV.
    Evaluate(EvaluateArgs),
    /// Verify the sequence operators against oracles and finite differences.
    Opcheck(OpcheckArgs),
    /// Write the full token inventory as token<TAB>id lines.
    VocabGen(VocabGenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum From {
    Smiles,
    Selfies,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum To {
    /// SMILES in the input's atom order.
    Smiles,
    Selfies,
    /// Canonical SMILES.
    Canonical,
    /// SMILES from a random traversal.
    Random,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long, value_enum, default_value = "smiles")]
    from: From,
    #[arg(long, value_enum)]
    to: To,
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    /// Text inventory (token<TAB>id); the built-in one when absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TokenizeArgs {
    #[command(flatten)]
    vocab: VocabArgs,
    /// Give user-input chemical spans chemical tokens too.
    #[arg(long)]
    isolate_inputs: bool,
    /// Add the token names to each output line.
    #[arg(long)]
    names: bool,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// TOML or JSON file with the policy; flags override it.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    p_format_convert: Option<f64>,
    #[arg(long)]
    p_random_traversal: Option<f64>,
    #[arg(long)]
    p_input_isolation: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// TOML manifest mapping categories and tasks to JSONL files.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    batches: usize,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long, default_value_t = 1.0)]
    w_format: f64,
    #[arg(long, default_value_t = 1.0)]
    w_think: f64,
    #[arg(long, default_value_t = 1.0)]
    w_task: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// `demo` for the built-in suite, or a suite TOML file.
    #[arg(long)]
    suite: String,
    #[arg(long, value_enum)]
    provider: ProviderKind,
    /// Scripted responses for the mock; built in for the demo suite.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    #[arg(long, default_value = "http://localhost:8000/v1")]
    base_url: String,
    #[arg(long, default_value = "default")]
    model: String,
    /// Environment variable holding the API key; empty for none.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    #[arg(long, default_value_t = 8)]
    max_in_flight: usize,
    #[arg(long, default_value_t = 600)]
    timeout_secs: u64,
    /// Also write per-example results as JSONL here.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Text inventory used to map labels to first tokens.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OpcheckArgs {
    /// Include the timing-slope checks (a few seconds).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
pub struct VocabGenArgs {
    #[command(flatten)]
    vocab: VocabArgs,
    /// Only the chemical tokens.
    #[arg(long)]
    chemical_only: bool,
}

/// A problem with how the command was invoked rather than with its data.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn report(json_errors: bool, kind: &str, err: &anyhow::Error) {
    if json_errors {
        let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
        eprintln!("{}", json!({"error": kind, "message": format!("{err:#}"), "causes": chain}));
    } else {
        eprintln!("gym: {err:#}");
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version.
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if std::env::args().any(|a| a == "--json-errors") {
                let msg = e.render().to_string();
                eprintln!("{}", json!({"error": "usage", "message": msg.trim_end()}));
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`gym ... | head`) is not a failure.
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) if err.is::<UsageError>() => {
            report(cli.json_errors, "usage", &err);
            ExitCode::from(2)
        }
        Err(err) => {
            report(cli.json_errors, "data", &err);
            ExitCode::from(1)
        }
    }
}

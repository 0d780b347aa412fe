//! Line-oriented input and buffered output.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;

pub fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(
            File::open(p).with_context(|| format!("cannot open {}", p.display()))?,
        )),
        None => Box::new(BufReader::new(io::stdin())),
    })
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Calls `f` with each non-blank line and its 1-based number; errors are
/// tagged with the line.
pub fn each_line(input: impl BufRead, mut f: impl FnMut(&str) -> Result<()>) -> Result<()> {
    for (i, line) in input.lines().enumerate() {
        let line = line.with_context(|| format!("reading input line {}", i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        f(line.trim_end_matches('\r')).with_context(|| format!("input line {}", i + 1))?;
    }
    Ok(())
}

pub fn parse_line<T: DeserializeOwned>(line: &str) -> Result<T> {
    serde_json::from_str(line).context("malformed JSON")
}

pub fn write_json(out: &mut dyn Write, v: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, v)?;
    out.write_all(b"\n")?;
    Ok(())
}

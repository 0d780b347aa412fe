//! Balanced sampling over category, task and example.
//!
//! A [`Registry`] maps each configured category to its tasks and each task
//! to an [`ExampleStore`]. Every draw picks a category uniformly, then a task
//! of that category uniformly, then an example of that task uniformly, all
//! with replacement. How many examples a task has never changes how often
//! it is picked.
//!
//! File-backed stores keep only the byte offset and line number of each
//! record; payloads are read back when drawn.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::task::TaskRecord;

pub const DEFAULT_CATEGORIES: [&str; 6] = [
    "2d_molecule",
    "3d_molecule",
    "2d_protein",
    "3d_protein",
    "drug_gene",
    "cross_domain",
];

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Schema { path: PathBuf, line: usize, message: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("task {task:?} registered twice in category {category:?}")]
    DuplicateTask { category: String, task: String },
    #[error("category {0:?} has no tasks")]
    EmptyCategory(String),
    #[error("task {task:?} in category {category:?} has no examples")]
    EmptyTask { category: String, task: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SamplerError + '_ {
    move |source| SamplerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
enum Source {
    File {
        path: PathBuf,
        /// (byte offset, 1-based line number) of each record.
        index: Vec<(u64, usize)>,
    },
    Memory(Vec<Arc<TaskRecord>>),
}

/// The examples of one task.
#[derive(Debug, Clone)]
pub struct ExampleStore {
    source: Source,
}

impl ExampleStore {
    /// Reads a JSONL file one line at a time, validating each record and
    /// keeping its offset. Blank lines are skipped.
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self, SamplerError> {
        Self::load_checked(path.as_ref(), |_| Ok(()))
    }

    fn load_checked(path: &Path, check: impl Fn(&TaskRecord) -> Result<(), String>) -> Result<Self, SamplerError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut reader = BufReader::new(file);
        let mut index = Vec::new();
        let mut buf = String::new();
        let (mut offset, mut line) = (0u64, 0usize);
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf).map_err(io_err(path))?;
            if n == 0 {
                break;
            }
            line += 1;
            if !buf.trim().is_empty() {
                let schema = |message: String| SamplerError::Schema {
                    path: path.to_path_buf(),
                    line,
                    message,
                };
                let rec: TaskRecord = serde_json::from_str(&buf).map_err(|e| schema(e.to_string()))?;
                rec.validate().map_err(|e| schema(e.to_string()))?;
                check(&rec).map_err(schema)?;
                index.push((offset, line));
            }
            offset += n as u64;
        }
        Ok(ExampleStore {
            source: Source::File {
                path: path.to_path_buf(),
                index,
            },
        })
    }

    pub fn from_records(records: impl IntoIterator<Item = TaskRecord>) -> Self {
        Self::from_shared(records.into_iter().map(Arc::new))
    }

    /// Shared records; the same `Arc` may appear many times.
    pub fn from_shared(records: impl IntoIterator<Item = Arc<TaskRecord>>) -> Self {
        ExampleStore {
            source: Source::Memory(records.into_iter().collect()),
        }
    }

    pub fn len(&self) -> usize {
        match &self.source {
            Source::File { index, .. } => index.len(),
            Source::Memory(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Source line of example `i` for file-backed stores.
    pub fn line_of(&self, i: usize) -> Option<usize> {
        match &self.source {
            Source::File { index, .. } => index.get(i).map(|&(_, line)| line),
            Source::Memory(_) => None,
        }
    }

    /// Example `i`, re-read from disk for file-backed stores.
    pub fn get(&self, i: usize) -> Result<TaskRecord, SamplerError> {
        match &self.source {
            Source::Memory(v) => Ok(v[i].as_ref().clone()),
            Source::File { path, index } => {
                let (offset, line) = index[i];
                let mut file = File::open(path).map_err(io_err(path))?;
                file.seek(SeekFrom::Start(offset)).map_err(io_err(path))?;
                let mut buf = String::new();
                BufReader::new(file).read_line(&mut buf).map_err(io_err(path))?;
                serde_json::from_str(&buf).map_err(|e| SamplerError::Schema {
                    path: path.clone(),
                    line,
                    message: e.to_string(),
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaskEntry {
    pub id: String,
    pub store: ExampleStore,
}

#[derive(Debug, Clone)]
pub struct Category {
    pub name: String,
    pub tasks: Vec<TaskEntry>,
}

/// Where one draw landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Draw {
    pub category: usize,
    pub task: usize,
    pub example: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    categories: Option<Vec<String>>,
    #[serde(default)]
    tasks: BTreeMap<String, BTreeMap<String, PathBuf>>,
}

/// Categories, their tasks and the tasks' examples. Immutable once built.
#[derive(Debug, Clone)]
pub struct Registry {
    categories: Vec<Category>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new(DEFAULT_CATEGORIES.iter().map(|s| s.to_string()))
    }
}

impl Registry {
    /// An empty registry over the given category names.
    pub fn new(categories: impl IntoIterator<Item = String>) -> Self {
        Registry {
            categories: categories
                .into_iter()
                .map(|name| Category { name, tasks: Vec::new() })
                .collect(),
        }
    }

    pub fn add_task(&mut self, category: &str, task: &str, store: ExampleStore) -> Result<(), SamplerError> {
        let cat = self
            .categories
            .iter_mut()
            .find(|c| c.name == category)
            .ok_or_else(|| SamplerError::UnknownCategory(category.to_string()))?;
        if cat.tasks.iter().any(|t| t.id == task) {
            return Err(SamplerError::DuplicateTask {
                category: category.to_string(),
                task: task.to_string(),
            });
        }
        cat.tasks.push(TaskEntry {
            id: task.to_string(),
            store,
        });
        Ok(())
    }

    /// Loads a TOML manifest:
    ///
    /// ```toml
    /// categories = ["2d_molecule", "3d_molecule"]   # optional
    /// [tasks.2d_molecule]
    /// bbbp = "bbbp.jsonl"
    /// ```
    ///
    /// Relative paths resolve against the manifest's directory. Each
    /// record's `category` must match the section it is listed under.
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Self, SamplerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| SamplerError::Manifest(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut reg = match manifest.categories {
            Some(names) => Registry::new(names),
            None => Registry::default(),
        };
        for (category, tasks) in &manifest.tasks {
            if !reg.categories.iter().any(|c| &c.name == category) {
                return Err(SamplerError::UnknownCategory(category.clone()));
            }
            for (task, file) in tasks {
                let store = ExampleStore::load_checked(&base.join(file), |rec| {
                    if &rec.category == category {
                        Ok(())
                    } else {
                        Err(format!("record category {:?} listed under {category:?}", rec.category))
                    }
                })?;
                reg.add_task(category, task, store)?;
            }
        }
        Ok(reg)
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    /// Fails with the first empty category or task.
    pub fn check_nonempty(&self) -> Result<(), SamplerError> {
        if self.categories.is_empty() {
            return Err(SamplerError::EmptyCategory(String::new()));
        }
        for c in &self.categories {
            if c.tasks.is_empty() {
                return Err(SamplerError::EmptyCategory(c.name.clone()));
            }
            if let Some(t) = c.tasks.iter().find(|t| t.store.is_empty()) {
                return Err(SamplerError::EmptyTask {
                    category: c.name.clone(),
                    task: t.id.clone(),
                });
            }
        }
        Ok(())
    }

    /// One three-stage draw. Assumes [`Registry::check_nonempty`] passed.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        let category = rng.gen_range(0..self.categories.len());
        let tasks = &self.categories[category].tasks;
        let task = rng.gen_range(0..tasks.len());
        let example = rng.gen_range(0..tasks[task].store.len());
        Draw {
            category,
            task,
            example,
        }
    }

    pub fn fetch(&self, d: Draw) -> Result<TaskRecord, SamplerError> {
        self.categories[d.category].tasks[d.task].store.get(d.example)
    }

    /// `n` draws, validated up front.
    pub fn sample_draws<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Draw>, SamplerError> {
        self.check_nonempty()?;
        Ok((0..n).map(|_| self.draw(rng)).collect())
    }
}

/// Draws `n` records with replacement.
pub fn sample_batch<R: Rng + ?Sized>(reg: &Registry, n: usize, rng: &mut R) -> Result<Vec<TaskRecord>, SamplerError> {
    reg.sample_draws(n, rng)?.into_iter().map(|d| reg.fetch(d)).collect()
}

/// A registry paired with its own seeded stream.
#[derive(Debug, Clone)]
pub struct Sampler<'r> {
    registry: &'r Registry,
    rng: ChaCha8Rng,
}

impl<'r> Sampler<'r> {
    pub fn new(registry: &'r Registry, seed: u64) -> Self {
        Sampler {
            registry,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_batch(&mut self, n: usize) -> Result<Vec<TaskRecord>, SamplerError> {
        sample_batch(self.registry, n, &mut self.rng)
    }
}

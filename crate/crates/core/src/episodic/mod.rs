//! Episodic memory: acquisition-stage trajectories stored per scene and
//! retrieved by instruction similarity.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::ProviderError;

mod cache;
mod corrupt;
mod render;
mod retrieve;

pub use cache::CachedEmbedder;
pub use corrupt::{corrupt_memory, CorruptMode};
pub use render::{render_memory, Summarizer};
pub use retrieve::{ensure_gold, recall_at_k, retrieve_topk, Ranked};

#[derive(Debug, Error)]
pub enum EpisodicError {
    #[error("record {0} already stored")]
    DuplicateId(String),
    #[error("unknown record {0}")]
    UnknownRecord(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{gold} gold memories do not fit in k = {k}")]
    KTooSmall { gold: usize, k: usize },
    #[error("summarization needs a language-model provider")]
    ProviderUnavailable,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("embedding cache was built by {found}, active embedder is {expected}")]
    CacheMismatch { expected: String, found: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid corruption spec: {0}")]
    InvalidCorruption(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EpisodicError + '_ {
    move |source| EpisodicError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub thought: String,
    /// Rendered skill call or perception query, e.g. `Pick[cup_0]`.
    pub action: String,
    pub observation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct OutcomeSummary {
    pub percent_complete: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub record_id: String,
    pub scene_id: String,
    pub instruction: String,
    pub steps: Vec<Step>,
    pub outcome: OutcomeSummary,
    /// Assigned by [`EpisodicStore::store`].
    #[serde(default)]
    pub created_seq: u64,
}

impl EpisodeRecord {
    pub fn new(record_id: &str, scene_id: &str, instruction: &str) -> Self {
        Self {
            record_id: record_id.into(),
            scene_id: scene_id.into(),
            instruction: instruction.into(),
            steps: Vec::new(),
            outcome: OutcomeSummary::default(),
            created_seq: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryQuery {
    pub instruction: String,
    pub scene_id: String,
    pub k: usize,
    #[serde(default)]
    pub gold_ids: Option<BTreeSet<String>>,
    #[serde(default)]
    pub exclude_ids: BTreeSet<String>,
}

impl MemoryQuery {
    pub fn new(instruction: &str, scene_id: &str, k: usize) -> Self {
        Self {
            instruction: instruction.into(),
            scene_id: scene_id.into(),
            k,
            gold_ids: None,
            exclude_ids: BTreeSet::new(),
        }
    }

    pub fn with_gold<I: IntoIterator<Item = S>, S: Into<String>>(mut self, gold: I) -> Self {
        self.gold_ids = Some(gold.into_iter().map(Into::into).collect());
        self
    }

    pub fn excluding(mut self, id: &str) -> Self {
        self.exclude_ids.insert(id.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MemoryFormat {
    #[default]
    Full,
    Summarization,
    InstructionOnly,
}

impl std::str::FromStr for MemoryFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "full" => Ok(Self::Full),
            "summary" | "summarization" => Ok(Self::Summarization),
            "instruction_only" => Ok(Self::InstructionOnly),
            other => Err(format!("unknown memory format {other}")),
        }
    }
}

impl MemoryFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Summarization => "summarization",
            Self::InstructionOnly => "instruction_only",
        }
    }
}

/// Append-only record store. Records keep their insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodicStore {
    records: Vec<EpisodeRecord>,
    index: BTreeMap<String, usize>,
    next_seq: u64,
}

impl EpisodicStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn store(&mut self, mut record: EpisodeRecord) -> Result<String, EpisodicError> {
        if self.index.contains_key(&record.record_id) {
            return Err(EpisodicError::DuplicateId(record.record_id));
        }
        record.created_seq = self.next_seq;
        self.next_seq += 1;
        let id = record.record_id.clone();
        self.index.insert(id.clone(), self.records.len());
        self.records.push(record);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<&EpisodeRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.records.iter()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), EpisodicError> {
        let file = fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes()).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    /// Reloads a store; stored `created_seq` values are kept.
    pub fn load(path: &Path) -> Result<Self, EpisodicError> {
        let file = fs::File::open(path).map_err(io_err(path))?;
        let mut store = Self::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: EpisodeRecord = serde_json::from_str(&line).map_err(|e| EpisodicError::Parse {
                path: path.display().to_string(),
                line: n + 1,
                message: e.to_string(),
            })?;
            if store.index.contains_key(&record.record_id) {
                return Err(EpisodicError::DuplicateId(record.record_id));
            }
            store.next_seq = store.next_seq.max(record.created_seq + 1);
            store.index.insert(record.record_id.clone(), store.records.len());
            store.records.push(record);
        }
        Ok(store)
    }
}

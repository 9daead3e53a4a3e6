//! Domain types and line-delimited dataset I/O.
//!
//! A corpus file holds one JSON document record per line. Fields the engine
//! does not know about are kept in `extra` and written back unchanged.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::text::word_count;

fn unknown_generator() -> String {
    "unknown".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub candidate_id: String,
    #[serde(default = "unknown_generator")]
    pub generator_id: String,
    pub text: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl CandidateSummary {
    pub fn new(
        candidate_id: impl Into<String>,
        generator_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Self {
            candidate_id: candidate_id.into(),
            generator_id: generator_id.into(),
            text: text.into(),
            extra: Map::new(),
        }
    }

    /// Length used by the length penalty: whitespace-delimited words.
    pub fn token_count(&self) -> usize {
        word_count(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub article: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<String>,
    pub candidates: Vec<CandidateSummary>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        article: impl Into<String>,
        candidates: Vec<CandidateSummary>,
    ) -> Self {
        Self {
            doc_id: doc_id.into(),
            article: article.into(),
            references: Vec::new(),
            candidates,
            extra: Map::new(),
        }
    }

    pub fn with_references(mut self, references: Vec<String>) -> Self {
        self.references = references;
        self
    }

    /// Checks the per-document invariants. Empty candidate lists are allowed
    /// here (generation inputs); ranking operations check that separately.
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(Error::Validation("empty doc_id".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.candidates {
            if !seen.insert(c.candidate_id.as_str()) {
                return Err(Error::Validation(format!(
                    "document {}: duplicate candidate_id {:?}",
                    self.doc_id, c.candidate_id
                )));
            }
            if c.text.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "document {}: candidate {:?} has empty text",
                    self.doc_id, c.candidate_id
                )));
            }
        }
        Ok(())
    }

    pub fn candidate_index(&self, candidate_id: &str) -> Option<usize> {
        self.candidates
            .iter()
            .position(|c| c.candidate_id == candidate_id)
    }
}

/// One extracted summary content unit with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScuRecord {
    pub doc_id: String,
    pub candidate_id: String,
    pub index: usize,
    pub text: String,
}

/// Wire form of the SCUs of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScusRecord {
    pub doc_id: String,
    pub candidate_id: String,
    pub scus: Vec<String>,
}

impl ScusRecord {
    pub fn from_records(doc_id: &str, candidate_id: &str, records: &[ScuRecord]) -> Self {
        Self {
            doc_id: doc_id.to_string(),
            candidate_id: candidate_id.to_string(),
            scus: records.iter().map(|r| r.text.clone()).collect(),
        }
    }

    pub fn to_records(&self) -> Vec<ScuRecord> {
        self.scus
            .iter()
            .enumerate()
            .map(|(index, text)| ScuRecord {
                doc_id: self.doc_id.clone(),
                candidate_id: self.candidate_id.clone(),
                index,
                text: text.clone(),
            })
            .collect()
    }
}

/// Wire form of one ranked document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecord {
    pub doc_id: String,
    /// Candidate ids, best first.
    pub order: Vec<String>,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    CandidatesJsonl,
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<Document>> {
    let path = path.as_ref();
    match format {
        CorpusFormat::CandidatesJsonl => {
            let docs: Vec<Document> = read_jsonl(path)?;
            let mut ids = HashSet::new();
            for doc in &docs {
                doc.validate()?;
                if !ids.insert(doc.doc_id.as_str()) {
                    return Err(Error::Validation(format!(
                        "duplicate doc_id {:?}",
                        doc.doc_id
                    )));
                }
            }
            Ok(docs)
        }
    }
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    write_jsonl(path, docs)
}

/// Reads one JSON value per nonblank line. Errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub candidates: usize,
    pub references: usize,
    pub mean_article_words: f64,
    pub mean_candidate_words: f64,
    pub mean_reference_words: f64,
}

fn mean_words<'a>(texts: impl Iterator<Item = &'a str>) -> (usize, f64) {
    let (n, total) = texts.fold((0usize, 0usize), |(n, t), s| (n + 1, t + word_count(s)));
    if n == 0 {
        (0, 0.0)
    } else {
        (n, total as f64 / n as f64)
    }
}

pub fn corpus_stats(corpus: &[Document]) -> CorpusStats {
    let (documents, mean_article_words) = mean_words(corpus.iter().map(|d| d.article.as_str()));
    let (candidates, mean_candidate_words) = mean_words(
        corpus
            .iter()
            .flat_map(|d| d.candidates.iter().map(|c| c.text.as_str())),
    );
    let (references, mean_reference_words) = mean_words(
        corpus
            .iter()
            .flat_map(|d| d.references.iter().map(String::as_str)),
    );
    CorpusStats {
        documents,
        candidates,
        references,
        mean_article_words,
        mean_candidate_words,
        mean_reference_words,
    }
}

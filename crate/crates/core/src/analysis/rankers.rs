use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{read_jsonl, Document, RankedRecord};
use crate::error::{Error, Result};
use crate::metrics::{rouge_mean_f1, Ranking};
use crate::scoring::Pipeline;

/// Anything that orders the candidates of a document.
///
/// `run` is the zero-based repetition index; deterministic rankers ignore it.
pub trait Ranker: Sync {
    fn name(&self) -> String;
    fn rank(&self, doc: &Document, run: usize) -> Result<Ranking>;
}

/// Ranking where higher scores come first and equal scores share a rank
/// (the smallest position they occupy). Items keep the given order.
pub fn ranking_from_scores(items: &[String], scores: &[f64]) -> Result<Ranking> {
    assert_eq!(items.len(), scores.len());
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("NaN score".into()));
    }
    let ranks = items
        .iter()
        .zip(scores)
        .map(|(id, s)| {
            let better = scores.iter().filter(|o| *o > s).count();
            (id.clone(), (better + 1) as f64)
        })
        .collect::<BTreeMap<_, _>>();
    Ranking::from_ranks(items.to_vec(), ranks)
}

fn candidate_ids(doc: &Document) -> Vec<String> {
    doc.candidates
        .iter()
        .map(|c| c.candidate_id.clone())
        .collect()
}

/// The consensus pipeline as a ranker. Tied scores share a rank, so the
/// result does not depend on candidate presentation order.
pub struct ScurankRanker<'a> {
    pub pipeline: Pipeline<'a>,
}

impl Ranker for ScurankRanker<'_> {
    fn name(&self) -> String {
        format!("scurank[{}]", self.pipeline.extractor.describe())
    }

    fn rank(&self, doc: &Document, _run: usize) -> Result<Ranking> {
        let ranked = self.pipeline.rank_document(doc)?;
        let ids = candidate_ids(doc);
        let scores: Vec<f64> = ids.iter().map(|id| ranked.scores[id]).collect();
        ranking_from_scores(&ids, &scores)
    }
}

/// Ranks candidates by mean ROUGE-1/2/L F1 against their best-matching
/// reference. Equal scores keep candidate order.
pub fn rouge_ranker(doc: &Document) -> Result<Ranking> {
    if doc.references.is_empty() {
        return Err(Error::Validation(format!(
            "document {}: ROUGE ranking needs a reference",
            doc.doc_id
        )));
    }
    if doc.candidates.is_empty() {
        return Err(Error::Validation(format!(
            "document {}: no candidates",
            doc.doc_id
        )));
    }
    let scores: Vec<f64> = doc
        .candidates
        .iter()
        .map(|c| {
            doc.references
                .iter()
                .map(|r| rouge_mean_f1(&c.text, r))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let order: Vec<&str> = idx
        .iter()
        .map(|&i| doc.candidates[i].candidate_id.as_str())
        .collect();
    Ok(Ranking::from_order(&order))
}

pub struct RougeRanker;

impl Ranker for RougeRanker {
    fn name(&self) -> String {
        "rouge".into()
    }

    fn rank(&self, doc: &Document, _run: usize) -> Result<Ranking> {
        rouge_ranker(doc)
    }
}

/// A fresh uniform permutation per document and run. Useful as a null model.
pub struct RandomRanker {
    pub seed: u64,
}

impl Ranker for RandomRanker {
    fn name(&self) -> String {
        format!("random[seed={}]", self.seed)
    }

    fn rank(&self, doc: &Document, run: usize) -> Result<Ranking> {
        let digest = Sha256::digest(doc.doc_id.as_bytes());
        let doc_key = u64::from_le_bytes(digest[..8].try_into().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ doc_key);
        rng.set_stream(run as u64);
        let mut ids = candidate_ids(doc);
        ids.shuffle(&mut rng);
        Ok(Ranking::from_order(&ids))
    }
}

/// Rankings produced elsewhere, one ranked-records file per run.
pub struct RecordedRanker {
    label: String,
    runs: Vec<HashMap<String, RankedRecord>>,
}

impl RecordedRanker {
    pub fn new(label: impl Into<String>, runs: Vec<Vec<RankedRecord>>) -> Self {
        Self {
            label: label.into(),
            runs: runs
                .into_iter()
                .map(|recs| recs.into_iter().map(|r| (r.doc_id.clone(), r)).collect())
                .collect(),
        }
    }

    pub fn from_files<P: AsRef<Path>>(label: impl Into<String>, paths: &[P]) -> Result<Self> {
        let runs = paths
            .iter()
            .map(read_jsonl::<RankedRecord>)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(label, runs))
    }

    pub fn runs(&self) -> usize {
        self.runs.len()
    }
}

impl Ranker for RecordedRanker {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn rank(&self, doc: &Document, run: usize) -> Result<Ranking> {
        let rec = self
            .runs
            .get(run)
            .ok_or_else(|| Error::Validation(format!("no recorded ranking for run {run}")))?
            .get(&doc.doc_id)
            .ok_or_else(|| {
                Error::Validation(format!("run {run}: no ranking for document {}", doc.doc_id))
            })?;
        Ok(Ranking::from_order(&rec.order))
    }
}

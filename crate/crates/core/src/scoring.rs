//! Consensus scores and the candidate ranking.
//!
//! Each SCU scores the size of its cluster. A candidate's raw score is the
//! sum over its SCUs (optionally transformed), divided by a length penalty
//! on its whitespace word count. Candidates are ranked by the adjusted score,
//! highest first, ties broken by original candidate position.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::clustering::{
    cluster_scus, promote_noise, ClusterAssignment, ClusterContext, ClusterDump, Clustering,
};
use crate::corpus::{Document, RankedRecord, ScuRecord};
use crate::error::{Error, Result};
use crate::extraction::ScuExtractor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTransform {
    #[default]
    Sum,
    SqrtSum,
    LogSum,
}

impl ScoreTransform {
    pub const ALL: [ScoreTransform; 3] = [Self::Sum, Self::SqrtSum, Self::LogSum];

    pub fn apply(self, total: f64) -> f64 {
        match self {
            Self::Sum => total,
            Self::SqrtSum => total.sqrt(),
            Self::LogSum => (total + 1.0).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthPenalty {
    None,
    Linear,
    #[default]
    Sqrt,
    Log,
}

impl LengthPenalty {
    pub const ALL: [LengthPenalty; 4] = [Self::None, Self::Linear, Self::Sqrt, Self::Log];

    pub fn divisor(self, tokens: usize) -> f64 {
        let len = tokens as f64;
        match self {
            Self::None => 1.0,
            Self::Linear => len,
            Self::Sqrt => len.sqrt(),
            Self::Log => (len + 1.0).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    #[default]
    Whitespace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub score_transform: ScoreTransform,
    pub length_penalty: LengthPenalty,
    pub tokenizer: Tokenizer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredSummary {
    pub candidate_id: String,
    pub phi_values: Vec<usize>,
    pub raw_score: f64,
    pub adjusted_score: f64,
    pub token_count: usize,
}

/// Maps SCUs of one document to their positions in the clustered point list.
#[derive(Debug, Clone)]
pub struct ScuIndex {
    positions: HashMap<(String, usize), usize>,
}

impl ScuIndex {
    pub fn new(scus: &[ScuRecord]) -> Self {
        Self {
            positions: scus
                .iter()
                .enumerate()
                .map(|(i, s)| ((s.candidate_id.clone(), s.index), i))
                .collect(),
        }
    }

    pub fn position(&self, scu: &ScuRecord) -> Option<usize> {
        self.positions
            .get(&(scu.candidate_id.clone(), scu.index))
            .copied()
    }
}

/// Size of the cluster that holds `scu`.
pub fn phi(scu: &ScuRecord, index: &ScuIndex, assignment: &ClusterAssignment) -> Result<usize> {
    index
        .position(scu)
        .and_then(|p| assignment.size_of_point(p))
        .ok_or_else(|| {
            Error::Validation(format!(
                "SCU {}/{}#{} is not in the cluster assignment",
                scu.doc_id, scu.candidate_id, scu.index
            ))
        })
}

/// Scores from per-SCU φ values and a token count.
pub fn score_from_phi(
    candidate_id: &str,
    phi_values: Vec<usize>,
    token_count: usize,
    cfg: &ScoringConfig,
) -> Result<ScoredSummary> {
    if token_count == 0 {
        return Err(Error::Validation(format!(
            "candidate {candidate_id} has zero tokens"
        )));
    }
    let (raw_score, adjusted_score) = if phi_values.is_empty() {
        log::warn!("candidate {candidate_id} has no SCUs; scoring 0");
        (0.0, 0.0)
    } else {
        let total: usize = phi_values.iter().sum();
        let raw = cfg.score_transform.apply(total as f64);
        (raw, raw / cfg.length_penalty.divisor(token_count))
    };
    Ok(ScoredSummary {
        candidate_id: candidate_id.to_string(),
        phi_values,
        raw_score,
        adjusted_score,
        token_count,
    })
}

pub fn score_summary(
    candidate_id: &str,
    token_count: usize,
    scus: &[ScuRecord],
    index: &ScuIndex,
    assignment: &ClusterAssignment,
    cfg: &ScoringConfig,
) -> Result<ScoredSummary> {
    let phi_values = scus
        .iter()
        .map(|s| phi(s, index, assignment))
        .collect::<Result<Vec<_>>>()?;
    score_from_phi(candidate_id, phi_values, token_count, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedSet {
    pub doc_id: String,
    pub order: Vec<String>,
    pub scores: BTreeMap<String, f64>,
    pub rank_of: BTreeMap<String, usize>,
}

impl RankedSet {
    pub fn to_record(&self) -> RankedRecord {
        RankedRecord {
            doc_id: self.doc_id.clone(),
            order: self.order.clone(),
            scores: self.scores.clone(),
        }
    }
}

/// Sorts by adjusted score, descending; equal scores keep input order.
pub fn rank(doc_id: &str, scored: &[ScoredSummary]) -> Result<RankedSet> {
    if scored.is_empty() {
        return Err(Error::Validation(format!(
            "document {doc_id}: nothing to rank"
        )));
    }
    let mut seen = HashSet::new();
    for s in scored {
        if !seen.insert(s.candidate_id.as_str()) {
            return Err(Error::Validation(format!(
                "document {doc_id}: duplicate candidate_id {:?}",
                s.candidate_id
            )));
        }
        if s.adjusted_score.is_nan() {
            return Err(Error::Validation(format!(
                "document {doc_id}: candidate {} has a NaN score",
                s.candidate_id
            )));
        }
    }
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&a, &b| {
        scored[b]
            .adjusted_score
            .partial_cmp(&scored[a].adjusted_score)
            .expect("NaN rejected above")
    });
    let order: Vec<String> = idx
        .iter()
        .map(|&i| scored[i].candidate_id.clone())
        .collect();
    Ok(RankedSet {
        doc_id: doc_id.to_string(),
        rank_of: order
            .iter()
            .enumerate()
            .map(|(r, id)| (id.clone(), r + 1))
            .collect(),
        scores: scored
            .iter()
            .map(|s| (s.candidate_id.clone(), s.adjusted_score))
            .collect(),
        order,
    })
}

/// Extraction, clustering and scoring results for one document.
#[derive(Debug, Clone)]
pub struct DocumentAnalysis {
    pub doc_id: String,
    pub scus: Vec<ScuRecord>,
    pub assignment: ClusterAssignment,
    pub scored: Vec<ScoredSummary>,
    pub ranked: RankedSet,
    pub dump: Option<ClusterDump>,
}

/// Clusters and scores a document whose SCUs are already known.
/// `scus_by_candidate` must follow the document's candidate order.
pub fn rank_with_scus(
    doc: &Document,
    scus_by_candidate: Vec<Vec<ScuRecord>>,
    ctx: &ClusterContext<'_>,
    cfg: &ScoringConfig,
    keep_tree: bool,
) -> Result<DocumentAnalysis> {
    let run = || -> Result<DocumentAnalysis> {
        if doc.candidates.is_empty() {
            return Err(Error::Validation("document has no candidates".into()));
        }
        assert_eq!(scus_by_candidate.len(), doc.candidates.len());
        let all: Vec<ScuRecord> = scus_by_candidate.iter().flatten().cloned().collect();
        let index = ScuIndex::new(&all);
        let (assignment, tree) = if all.is_empty() {
            (promote_noise(&Clustering { labels: vec![] }), None)
        } else {
            let (a, t) = cluster_scus(&all, ctx)?;
            (a, Some(t))
        };
        let scored = doc
            .candidates
            .iter()
            .zip(&scus_by_candidate)
            .map(|(c, scus)| {
                score_summary(
                    &c.candidate_id,
                    c.token_count(),
                    scus,
                    &index,
                    &assignment,
                    cfg,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let ranked = rank(&doc.doc_id, &scored)?;
        let dump = match (keep_tree, tree) {
            (true, Some(tree)) => Some(ClusterDump {
                doc_id: doc.doc_id.clone(),
                labels: assignment.labels.clone(),
                raw_noise: assignment.raw_noise.iter().copied().collect(),
                tree,
            }),
            _ => None,
        };
        Ok(DocumentAnalysis {
            doc_id: doc.doc_id.clone(),
            scus: all,
            assignment,
            scored,
            ranked,
            dump,
        })
    };
    run().map_err(|e| e.in_document(&doc.doc_id))
}

/// The full pipeline for one document: extract, encode, cluster, score, rank.
pub struct Pipeline<'a> {
    pub extractor: &'a dyn ScuExtractor,
    pub cluster: ClusterContext<'a>,
    pub scoring: ScoringConfig,
    pub keep_tree: bool,
}

impl Pipeline<'_> {
    pub fn extract(&self, doc: &Document) -> Result<Vec<Vec<ScuRecord>>> {
        doc.candidates
            .iter()
            .map(|c| self.extractor.extract(&doc.doc_id, c))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_document(&doc.doc_id))
    }

    pub fn analyze(&self, doc: &Document) -> Result<DocumentAnalysis> {
        let scus = self.extract(doc)?;
        rank_with_scus(doc, scus, &self.cluster, &self.scoring, self.keep_tree)
    }

    pub fn rank_document(&self, doc: &Document) -> Result<RankedSet> {
        self.analyze(doc).map(|a| a.ranked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn scored(id: &str, score: f64) -> ScoredSummary {
        ScoredSummary {
            candidate_id: id.into(),
            phi_values: vec![],
            raw_score: score,
            adjusted_score: score,
            token_count: 1,
        }
    }

    fn assignment(labels: Vec<usize>) -> ClusterAssignment {
        let mut cluster_sizes = BTreeMap::new();
        for &l in &labels {
            *cluster_sizes.entry(l).or_insert(0) += 1;
        }
        ClusterAssignment {
            labels,
            cluster_sizes,
            raw_noise: BTreeSet::new(),
        }
    }

    fn scu(cand: &str, index: usize) -> ScuRecord {
        ScuRecord {
            doc_id: "d".into(),
            candidate_id: cand.into(),
            index,
            text: format!("{cand}{index}"),
        }
    }

    #[test]
    fn phi_is_cluster_size() {
        // Cluster 0 holds five SCUs.
        let scus: Vec<_> = (0..5).map(|i| scu("a", i)).chain([scu("b", 0)]).collect();
        let a = assignment(vec![0, 0, 0, 0, 0, 1]);
        let idx = ScuIndex::new(&scus);
        assert_eq!(phi(&scus[2], &idx, &a).unwrap(), 5);
        assert_eq!(phi(&scus[5], &idx, &a).unwrap(), 1);
        assert!(phi(&scu("zzz", 0), &idx, &a).is_err());
    }

    #[test]
    fn same_candidate_scus_in_one_cluster_each_count() {
        let scus = vec![scu("a", 0), scu("a", 1), scu("b", 0)];
        let a = assignment(vec![0, 0, 0]);
        let idx = ScuIndex::new(&scus);
        let s = score_summary("a", 9, &scus[..2], &idx, &a, &ScoringConfig::default()).unwrap();
        assert_eq!(s.phi_values, vec![3, 3]);
        assert_eq!(s.raw_score, 6.0);
        assert_eq!(s.adjusted_score, 2.0);
    }

    #[test]
    fn default_scoring_arithmetic() {
        let s = score_from_phi("a", vec![5, 5, 2], 25, &ScoringConfig::default()).unwrap();
        assert_eq!(s.raw_score, 12.0);
        assert!((s.adjusted_score - 2.4).abs() < 1e-12);
    }

    #[test]
    fn log_sum_without_penalty() {
        let cfg = ScoringConfig {
            score_transform: ScoreTransform::LogSum,
            length_penalty: LengthPenalty::None,
            ..ScoringConfig::default()
        };
        let s = score_from_phi("a", vec![4], 16, &cfg).unwrap();
        assert!((s.adjusted_score - 1.6094379124341003).abs() < 1e-12);
    }

    #[test]
    fn empty_and_zero_token_cases() {
        let s = score_from_phi("a", vec![], 10, &ScoringConfig::default()).unwrap();
        assert_eq!((s.raw_score, s.adjusted_score), (0.0, 0.0));
        assert!(score_from_phi("a", vec![1], 0, &ScoringConfig::default()).is_err());
    }

    #[test]
    fn rank_sorts_descending_with_stable_ties() {
        let r = rank("d", &[scored("a", 3.0), scored("b", 1.0), scored("c", 2.0)]).unwrap();
        assert_eq!(r.order, ["a", "c", "b"]);
        assert_eq!(r.rank_of["c"], 2);

        let tie = rank("d", &[scored("x", 1.0), scored("y", 1.0), scored("z", 1.0)]).unwrap();
        assert_eq!(tie.order, ["x", "y", "z"]);
    }

    #[test]
    fn rank_rejects_nan_duplicates_and_empty() {
        assert!(rank("d", &[scored("a", f64::NAN)]).is_err());
        assert!(rank("d", &[scored("a", 1.0), scored("a", 2.0)]).is_err());
        assert!(rank("d", &[]).is_err());
    }

    #[test]
    fn penalties_strictly_decrease_with_length() {
        for p in [
            LengthPenalty::Linear,
            LengthPenalty::Sqrt,
            LengthPenalty::Log,
        ] {
            let mut prev = f64::INFINITY;
            for len in 1..50 {
                let cfg = ScoringConfig {
                    length_penalty: p,
                    ..ScoringConfig::default()
                };
                let s = score_from_phi("a", vec![7], len, &cfg)
                    .unwrap()
                    .adjusted_score;
                assert!(s < prev, "{p:?} at {len}");
                prev = s;
            }
        }
    }
}

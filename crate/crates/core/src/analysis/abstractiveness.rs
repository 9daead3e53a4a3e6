use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, RankedRecord};
use crate::error::{Error, Result};
use crate::metrics::coverage_density;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummarySource {
    Candidates,
    RankedTop,
    References,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractivenessRow {
    pub source: SummarySource,
    pub summaries: usize,
    pub coverage: f64,
    pub density: f64,
}

/// Mean coverage and density of the chosen summaries against their articles.
///
/// `RankedTop` uses the first candidate of each document's ranking and needs
/// `ranked`; the other sources ignore it.
pub fn abstractiveness_report(
    corpus: &[Document],
    source: SummarySource,
    ranked: Option<&[RankedRecord]>,
) -> Result<AbstractivenessRow> {
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    match source {
        SummarySource::Candidates => {
            for d in corpus {
                pairs.extend(
                    d.candidates
                        .iter()
                        .map(|c| (c.text.as_str(), d.article.as_str())),
                );
            }
        }
        SummarySource::References => {
            for d in corpus {
                pairs.extend(
                    d.references
                        .iter()
                        .map(|r| (r.as_str(), d.article.as_str())),
                );
            }
        }
        SummarySource::RankedTop => {
            let ranked =
                ranked.ok_or_else(|| Error::Config("ranked_top needs ranked records".into()))?;
            let by_doc: HashMap<&str, &RankedRecord> =
                ranked.iter().map(|r| (r.doc_id.as_str(), r)).collect();
            for d in corpus {
                let rec = by_doc.get(d.doc_id.as_str()).ok_or_else(|| {
                    Error::Validation(format!("no ranking for document {}", d.doc_id))
                })?;
                let top = rec.order.first().ok_or_else(|| {
                    Error::Validation(format!("empty ranking for document {}", d.doc_id))
                })?;
                let idx = d.candidate_index(top).ok_or_else(|| {
                    Error::Validation(format!("document {}: unknown candidate {top:?}", d.doc_id))
                })?;
                pairs.push((d.candidates[idx].text.as_str(), d.article.as_str()));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Validation(format!(
            "no summaries for source {source:?}"
        )));
    }
    let n = pairs.len() as f64;
    let (cov, den) = pairs.iter().fold((0.0, 0.0), |(c, d), (s, a)| {
        let e = coverage_density(s, a);
        (c + e.coverage, d + e.density)
    });
    Ok(AbstractivenessRow {
        source,
        summaries: pairs.len(),
        coverage: cov / n,
        density: den / n,
    })
}

/// Training record for contrastive fine-tuning: candidates best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrioRecord {
    pub article: String,
    #[serde(rename = "abstract")]
    pub reference: String,
    pub candidates: Vec<String>,
}

pub fn brio_record(doc: &Document, ranked: &RankedRecord) -> Result<BrioRecord> {
    if ranked.doc_id != doc.doc_id || ranked.order.len() != doc.candidates.len() {
        return Err(Error::Validation(format!(
            "ranking does not match document {}",
            doc.doc_id
        )));
    }
    let candidates = ranked
        .order
        .iter()
        .map(|id| {
            doc.candidate_index(id)
                .map(|i| doc.candidates[i].text.clone())
                .ok_or_else(|| {
                    Error::Validation(format!("document {}: unknown candidate {id:?}", doc.doc_id))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BrioRecord {
        article: doc.article.clone(),
        reference: doc.references.first().cloned().unwrap_or_default(),
        candidates,
    })
}

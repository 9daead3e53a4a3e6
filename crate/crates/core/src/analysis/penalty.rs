//! How strongly each scoring variant tracks summary length.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::kendall_tau_b;
use crate::scoring::{score_from_phi, LengthPenalty, ScoreTransform, ScoredSummary, ScoringConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyCell {
    pub score_transform: ScoreTransform,
    pub length_penalty: LengthPenalty,
    /// Kendall tau-b between adjusted scores and word counts; `None` when
    /// undefined (no untied pairs).
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyScanReport {
    pub documents: usize,
    pub candidates: usize,
    pub cells: Vec<PenaltyCell>,
}

impl PenaltyScanReport {
    pub fn cell(&self, t: ScoreTransform, p: LengthPenalty) -> &PenaltyCell {
        self.cells
            .iter()
            .find(|c| c.score_transform == t && c.length_penalty == p)
            .expect("scan covers the full grid")
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<9}", "transform");
        for p in LengthPenalty::ALL {
            out.push_str(&format!("  {:>7}", format!("{p:?}").to_lowercase()));
        }
        out.push('\n');
        for t in ScoreTransform::ALL {
            out.push_str(&format!("{:<9}", format!("{t:?}")));
            for p in LengthPenalty::ALL {
                match self.cell(t, p).tau {
                    Some(v) => out.push_str(&format!("  {v:>7.4}")),
                    None => out.push_str(&format!("  {:>7}", "n/a")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Rescores every candidate under each transform and penalty, pooling all
/// documents, and correlates the scores with word counts.
///
/// Input is the per-document output of the main scorer; only `phi_values`
/// and `token_count` are read, and rescoring goes through the same
/// [`score_from_phi`].
pub fn penalty_scan(documents: &[Vec<ScoredSummary>]) -> Result<PenaltyScanReport> {
    let pooled: Vec<&ScoredSummary> = documents.iter().flatten().collect();
    let lengths: Vec<f64> = pooled.iter().map(|s| s.token_count as f64).collect();
    let mut cells = Vec::with_capacity(12);
    for score_transform in ScoreTransform::ALL {
        for length_penalty in LengthPenalty::ALL {
            let cfg = ScoringConfig {
                score_transform,
                length_penalty,
                ..Default::default()
            };
            let scores = pooled
                .iter()
                .map(|s| {
                    score_from_phi(&s.candidate_id, s.phi_values.clone(), s.token_count, &cfg)
                        .map(|x| x.adjusted_score)
                })
                .collect::<Result<Vec<_>>>()?;
            let tau = match kendall_tau_b(&scores, &lengths) {
                Ok(t) => Some(t),
                Err(Error::Undefined(_)) => None,
                Err(e) => return Err(e),
            };
            cells.push(PenaltyCell {
                score_transform,
                length_penalty,
                tau,
            });
        }
    }
    Ok(PenaltyScanReport {
        documents: documents.len(),
        candidates: pooled.len(),
        cells,
    })
}

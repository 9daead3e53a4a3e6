//! ROUGE, intrinsic SCU evaluation and extractive fragment statistics.
//!
//! All three tokenize with [`metric_tokens`](crate::text::metric_tokens).

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::text::metric_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeOrder {
    R1,
    R2,
    Rl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub order: RougeOrder,
}

impl RougeScore {
    fn from_counts(overlap: usize, candidate: usize, reference: usize, order: RougeOrder) -> Self {
        let precision = if candidate == 0 {
            0.0
        } else {
            overlap as f64 / candidate as f64
        };
        let recall = if reference == 0 {
            0.0
        } else {
            overlap as f64 / reference as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            order,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn rouge_n_tokens(cand: &[String], reference: &[String], n: usize) -> RougeScore {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let overlap: usize = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    let order = if n == 1 {
        RougeOrder::R1
    } else {
        RougeOrder::R2
    };
    RougeScore::from_counts(
        overlap,
        cand.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
        order,
    )
}

/// ROUGE-N with clipped n-gram counts. Only `n` of 1 or 2 is meaningful to
/// the order tag; other `n` are computed but tagged as R2.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> RougeScore {
    assert!(n >= 1, "n-gram order must be positive");
    rouge_n_tokens(&metric_tokens(candidate), &metric_tokens(reference), n)
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let c = metric_tokens(candidate);
    let r = metric_tokens(reference);
    RougeScore::from_counts(lcs_len(&c, &r), c.len(), r.len(), RougeOrder::Rl)
}

/// Mean F1 of ROUGE-1, ROUGE-2 and ROUGE-L.
pub fn rouge_mean_f1(candidate: &str, reference: &str) -> f64 {
    let c = metric_tokens(candidate);
    let r = metric_tokens(reference);
    let r1 = rouge_n_tokens(&c, &r, 1).f1;
    let r2 = rouge_n_tokens(&c, &r, 2).f1;
    let rl = RougeScore::from_counts(lcs_len(&c, &r), c.len(), r.len(), RougeOrder::Rl).f1;
    (r1 + r2 + rl) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntrinsicScore {
    /// Mean over human SCUs of the best ROUGE-1 F1 against any extracted SCU.
    pub recall: f64,
    /// Mean over extracted SCUs of the best ROUGE-1 F1 against any human SCU.
    pub precision: f64,
}

pub fn intrinsic_scu_eval<S: AsRef<str>>(extracted: &[S], human: &[S]) -> Result<IntrinsicScore> {
    if extracted.is_empty() || human.is_empty() {
        return Err(Error::Validation(
            "intrinsic evaluation needs nonempty extracted and human SCU lists".into(),
        ));
    }
    let ext: Vec<Vec<String>> = extracted
        .iter()
        .map(|s| metric_tokens(s.as_ref()))
        .collect();
    let hum: Vec<Vec<String>> = human.iter().map(|s| metric_tokens(s.as_ref())).collect();
    let best_mean = |from: &[Vec<String>], against: &[Vec<String>]| {
        from.iter()
            .map(|f| {
                against
                    .iter()
                    .map(|a| rouge_n_tokens(a, f, 1).f1)
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(IntrinsicScore {
        recall: best_mean(&hum, &ext),
        precision: best_mean(&ext, &hum),
    })
}

/// Lengths of the greedy extractive fragments of `summary` in `article`.
///
/// Scanning the summary left to right, at each position the longest
/// article span that matches from there is taken as a fragment and the scan
/// jumps past it; unmatched tokens advance by one.
pub fn extractive_fragments<T: PartialEq>(summary: &[T], article: &[T]) -> Vec<usize> {
    let mut fragments = Vec::new();
    let mut i = 0;
    while i < summary.len() {
        let mut best = 0;
        let mut j = 0;
        while j < article.len() {
            if summary[i] == article[j] {
                let mut len = 0;
                while i + len < summary.len()
                    && j + len < article.len()
                    && summary[i + len] == article[j + len]
                {
                    len += 1;
                }
                best = best.max(len);
                j += len;
            } else {
                j += 1;
            }
        }
        if best > 0 {
            fragments.push(best);
        }
        i += best.max(1);
    }
    fragments
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extractiveness {
    pub coverage: f64,
    pub density: f64,
}

/// Coverage is Σ|f| / |summary| and density Σ|f|² / |summary| over the
/// extractive fragments. A summary without tokens scores zero on both.
pub fn coverage_density(summary: &str, article: &str) -> Extractiveness {
    let s = metric_tokens(summary);
    let a = metric_tokens(article);
    if s.is_empty() {
        return Extractiveness {
            coverage: 0.0,
            density: 0.0,
        };
    }
    let frags = extractive_fragments(&s, &a);
    let n = s.len() as f64;
    Extractiveness {
        coverage: frags.iter().sum::<usize>() as f64 / n,
        density: frags.iter().map(|&f| (f * f) as f64).sum::<f64>() / n,
    }
}

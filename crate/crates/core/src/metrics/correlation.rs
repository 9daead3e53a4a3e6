//! Rank and linear correlation, and Krippendorff's alpha.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate ids with 1-based ranks. Equal ranks express ties.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub items: Vec<String>,
    pub ranks: BTreeMap<String, f64>,
}

impl Ranking {
    /// Ranking from a best-first order: the first id gets rank 1.
    pub fn from_order<S: AsRef<str>>(order: &[S]) -> Self {
        let items: Vec<String> = order.iter().map(|s| s.as_ref().to_string()).collect();
        let ranks = items
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), (i + 1) as f64))
            .collect();
        Self { items, ranks }
    }

    pub fn from_ranks(items: Vec<String>, ranks: BTreeMap<String, f64>) -> Result<Self> {
        let ids: BTreeSet<&String> = items.iter().collect();
        if ids.len() != items.len() || ids != ranks.keys().collect::<BTreeSet<_>>() {
            return Err(Error::Validation("ranking items and ranks disagree".into()));
        }
        if ranks.values().any(|&r| !(r >= 1.0)) {
            return Err(Error::Validation("ranks must be >= 1".into()));
        }
        Ok(Self { items, ranks })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Rank vectors of `self` and `other` over `self.items` order.
    pub fn aligned(&self, other: &Ranking) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.ranks.len() != other.ranks.len()
            || self.ranks.keys().any(|k| !other.ranks.contains_key(k))
        {
            return Err(Error::Validation(
                "rankings cover different candidate ids".into(),
            ));
        }
        Ok(self
            .items
            .iter()
            .map(|id| (self.ranks[id], other.ranks[id]))
            .unzip())
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value".into()));
    }
    Ok(())
}

/// Kendall's τ-b: `(C - D) / sqrt((n0 - n1)(n0 - n2))`, where `n1` and `n2`
/// count pairs tied in `x` and in `y`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as i64;
    let denom = ((pairs - tied_x) as f64 * (pairs - tied_y) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Undefined(
            "Kendall tau: no untied pairs in one of the rankings".into(),
        ));
    }
    Ok((concordant - discordant) as f64 / denom)
}

pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64> {
    let (x, y) = a.aligned(b)?;
    kendall_tau_b(&x, &y)
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::Undefined("Pearson r needs at least 2 values".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("Pearson r: zero variance".into()));
    }
    // sqrt of the product keeps identical inputs at exactly 1.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks `values` ascending from 1, giving tied values their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = mean;
        }
        i = j + 1;
    }
    out
}

pub fn spearman_rho_values(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

pub fn spearman_rho(a: &Ranking, b: &Ranking) -> Result<f64> {
    let (x, y) = a.aligned(b)?;
    spearman_rho_values(&x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaLevel {
    #[default]
    Ordinal,
    Interval,
}

/// Krippendorff's alpha from a raters × items matrix; `None` is missing.
///
/// Builds the coincidence matrix over distinct values, then
/// `alpha = 1 - (n - 1) Σ o_ck δ²_ck / Σ n_c n_k δ²_ck`. Items with fewer than
/// two values are not pairable and are ignored.
pub fn krippendorff_alpha(matrix: &[Vec<Option<f64>>], level: AlphaLevel) -> Result<f64> {
    if matrix.len() < 2 {
        return Err(Error::Validation(
            "Krippendorff's alpha needs at least 2 raters".into(),
        ));
    }
    let n_items = matrix[0].len();
    if matrix.iter().any(|r| r.len() != n_items) {
        return Err(Error::Validation("ragged reliability matrix".into()));
    }
    if n_items < 2 {
        return Err(Error::Validation(
            "Krippendorff's alpha needs at least 2 items".into(),
        ));
    }
    let mut values: Vec<f64> = matrix.iter().flatten().flatten().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite rating".into()));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    let k = values.len();
    let index_of = |v: f64| values.binary_search_by(|p| p.total_cmp(&v)).unwrap();

    let mut coincidence = vec![vec![0.0; k]; k];
    for item in 0..n_items {
        let unit: Vec<usize> = matrix
            .iter()
            .filter_map(|r| r[item])
            .map(index_of)
            .collect();
        let m = unit.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m - 1) as f64;
        for (a, &c) in unit.iter().enumerate() {
            for (b, &d) in unit.iter().enumerate() {
                if a != b {
                    coincidence[c][d] += w;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return Err(Error::Undefined("fewer than 2 pairable values".into()));
    }

    let delta2 = |c: usize, d: usize| -> f64 {
        match level {
            AlphaLevel::Interval => (values[c] - values[d]).powi(2),
            AlphaLevel::Ordinal => {
                let (lo, hi) = (c.min(d), c.max(d));
                let between: f64 = marginals[lo..=hi].iter().sum();
                (between - (marginals[lo] + marginals[hi]) / 2.0).powi(2)
            }
        }
    };

    let (mut observed, mut expected) = (0.0, 0.0);
    for c in 0..k {
        for d in 0..k {
            if c == d {
                continue;
            }
            let dd = delta2(c, d);
            observed += coincidence[c][d] * dd;
            expected += marginals[c] * marginals[d] * dd;
        }
    }
    if expected == 0.0 {
        return Err(Error::Undefined(
            "Krippendorff's alpha: zero expected disagreement".into(),
        ));
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

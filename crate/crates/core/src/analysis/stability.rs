//! Repeated-run agreement of a ranker.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::rankers::Ranker;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::metrics::{
    kendall_tau, krippendorff_alpha, pearson_r, spearman_rho, AlphaLevel, Ranking,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityConfig {
    pub runs: usize,
    pub shuffle: bool,
    pub seed: u64,
    pub alpha_level: AlphaLevel,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            runs: 5,
            shuffle: false,
            seed: 0,
            alpha_level: AlphaLevel::Ordinal,
        }
    }
}

/// Mean correlation of the representative run and which run it was.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Representative {
    pub run: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleStability {
    pub doc_id: String,
    pub candidates: usize,
    pub tau: Option<Representative>,
    pub rho: Option<Representative>,
    pub r: Option<Representative>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSample {
    pub doc_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub ranker: String,
    pub runs: usize,
    pub shuffle: bool,
    pub seed: u64,
    pub alpha_level: AlphaLevel,
    pub samples: Vec<SampleStability>,
    pub mean_tau: Option<f64>,
    pub mean_rho: Option<f64>,
    pub mean_r: Option<f64>,
    pub alpha: Option<f64>,
    pub skipped: Vec<SkippedSample>,
}

impl StabilityReport {
    /// Plain-text summary with correlations scaled by 100.
    pub fn table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.1}", 100.0 * x));
        format!(
            "ranker  runs  shuffle  samples  skipped  tau    rho    r      alpha\n\
             {}  {}  {}  {}  {}  {}  {}  {}  {}\n",
            self.ranker,
            self.runs,
            self.shuffle,
            self.samples.len(),
            self.skipped.len(),
            pct(self.mean_tau),
            pct(self.mean_rho),
            pct(self.mean_r),
            pct(self.alpha),
        )
    }
}

/// The run with the highest mean correlation to all other runs; ties go to
/// the lowest run index. Undefined if any pair is undefined.
pub fn representative(
    rankings: &[Ranking],
    corr: impl Fn(&Ranking, &Ranking) -> Result<f64>,
) -> Option<Representative> {
    let n = rankings.len();
    if n < 2 {
        return None;
    }
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = corr(&rankings[i], &rankings[j]).ok()?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    let mut best: Option<Representative> = None;
    for (i, row) in m.iter().enumerate() {
        let mean = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v)
            .sum::<f64>()
            / (n - 1) as f64;
        if best.is_none_or(|b| mean > b.mean) {
            best = Some(Representative { run: i, mean });
        }
    }
    best
}

fn pearson_on_ranks(a: &Ranking, b: &Ranking) -> Result<f64> {
    let (x, y) = a.aligned(b)?;
    pearson_r(&x, &y)
}

fn presented(doc: &Document, cfg: &StabilityConfig, sample: usize, run: usize) -> Document {
    if !cfg.shuffle {
        return doc.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream((sample * cfg.runs + run) as u64);
    let mut d = doc.clone();
    d.candidates.shuffle(&mut rng);
    d
}

/// All runs of one sample, as rankings over the canonical candidate order.
fn sample_runs(
    doc: &Document,
    ranker: &dyn Ranker,
    cfg: &StabilityConfig,
    sample: usize,
) -> Result<Vec<Ranking>> {
    let ids: Vec<String> = doc
        .candidates
        .iter()
        .map(|c| c.candidate_id.clone())
        .collect();
    (0..cfg.runs)
        .map(|run| {
            let got = ranker.rank(&presented(doc, cfg, sample, run), run)?;
            Ranking::from_ranks(ids.clone(), got.ranks).map_err(|_| {
                Error::Validation(format!(
                    "run {run}: ranking does not cover the document's candidates"
                ))
            })
        })
        .collect()
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (n, sum) = values
        .flatten()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

/// Ranks every document `runs` times and measures how well the runs agree.
///
/// With `shuffle`, each run of each sample sees its candidates in an order
/// drawn from a ChaCha8 stream keyed by the seed, sample and run. Samples the
/// ranker fails on are skipped and listed.
pub fn stability_run(
    corpus: &[Document],
    ranker: &dyn Ranker,
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    if cfg.runs < 2 {
        return Err(Error::Config("stability needs at least 2 runs".into()));
    }
    let per_sample: Vec<Result<Vec<Ranking>>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, doc)| sample_runs(doc, ranker, cfg, i))
        .collect();

    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    let mut alpha_rows: Vec<Vec<Option<f64>>> = vec![Vec::new(); cfg.runs];
    for (doc, outcome) in corpus.iter().zip(per_sample) {
        match outcome {
            Err(e) => {
                log::warn!("stability: skipping {}: {e}", doc.doc_id);
                skipped.push(SkippedSample {
                    doc_id: doc.doc_id.clone(),
                    error: e.to_string(),
                });
            }
            Ok(rankings) => {
                for (row, ranking) in alpha_rows.iter_mut().zip(&rankings) {
                    row.extend(ranking.items.iter().map(|id| Some(ranking.ranks[id])));
                }
                samples.push(SampleStability {
                    doc_id: doc.doc_id.clone(),
                    candidates: doc.candidates.len(),
                    tau: representative(&rankings, kendall_tau),
                    rho: representative(&rankings, spearman_rho),
                    r: representative(&rankings, pearson_on_ranks),
                });
            }
        }
    }

    let alpha = match krippendorff_alpha(&alpha_rows, cfg.alpha_level) {
        Ok(a) => Some(a),
        Err(e) => {
            log::warn!("stability: alpha undefined: {e}");
            None
        }
    };
    Ok(StabilityReport {
        ranker: ranker.name(),
        runs: cfg.runs,
        shuffle: cfg.shuffle,
        seed: cfg.seed,
        alpha_level: cfg.alpha_level,
        mean_tau: mean_defined(samples.iter().map(|s| s.tau.map(|t| t.mean))),
        mean_rho: mean_defined(samples.iter().map(|s| s.rho.map(|t| t.mean))),
        mean_r: mean_defined(samples.iter().map(|s| s.r.map(|t| t.mean))),
        samples,
        alpha,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::RandomRanker;
    use crate::corpus::CandidateSummary;

    struct ByIdRanker;

    impl Ranker for ByIdRanker {
        fn name(&self) -> String {
            "by-id".into()
        }
        fn rank(&self, doc: &Document, _run: usize) -> Result<Ranking> {
            let mut ids: Vec<&str> = doc
                .candidates
                .iter()
                .map(|c| c.candidate_id.as_str())
                .collect();
            ids.sort();
            Ok(Ranking::from_order(&ids))
        }
    }

    /// Ranks by presentation order, so shuffling changes its output.
    struct PositionalRanker;

    impl Ranker for PositionalRanker {
        fn name(&self) -> String {
            "positional".into()
        }
        fn rank(&self, doc: &Document, _run: usize) -> Result<Ranking> {
            let ids: Vec<&str> = doc
                .candidates
                .iter()
                .map(|c| c.candidate_id.as_str())
                .collect();
            Ok(Ranking::from_order(&ids))
        }
    }

    struct FailsOn(&'static str);

    impl Ranker for FailsOn {
        fn name(&self) -> String {
            "fails".into()
        }
        fn rank(&self, doc: &Document, run: usize) -> Result<Ranking> {
            if doc.doc_id == self.0 {
                return Err(Error::Transport("boom".into()));
            }
            ByIdRanker.rank(doc, run)
        }
    }

    fn corpus(docs: usize, cands: usize) -> Vec<Document> {
        (0..docs)
            .map(|d| {
                Document::new(
                    format!("d{d}"),
                    "a",
                    (0..cands)
                        .map(|c| CandidateSummary::new(format!("c{c}"), "m", "t"))
                        .collect(),
                )
            })
            .collect()
    }

    fn cfg(runs: usize, shuffle: bool) -> StabilityConfig {
        StabilityConfig {
            runs,
            shuffle,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn order_invariant_ranker_agrees_perfectly_with_shuffle() {
        let c = corpus(4, 5);
        let on = stability_run(&c, &ByIdRanker, &cfg(5, true)).unwrap();
        let off = stability_run(&c, &ByIdRanker, &cfg(5, false)).unwrap();
        assert_eq!(on.mean_tau, Some(1.0));
        assert_eq!(on.mean_rho, Some(1.0));
        assert_eq!(on.mean_r, Some(1.0));
        assert_eq!(on.alpha, Some(1.0));
        assert_eq!(on.samples, off.samples);
    }

    #[test]
    fn shuffle_exposes_a_positional_ranker() {
        let c = corpus(6, 6);
        let report = stability_run(&c, &PositionalRanker, &cfg(4, true)).unwrap();
        assert!(report.mean_tau.unwrap() < 1.0);
        assert!(report.alpha.unwrap() < 1.0);
    }

    #[test]
    fn random_ranker_mean_tau_is_near_zero() {
        let c = corpus(400, 9);
        let report = stability_run(&c, &RandomRanker { seed: 3 }, &cfg(2, false)).unwrap();
        let t = report.mean_tau.unwrap();
        // Std of tau for n=9 is about 0.27; over 400 samples about 0.014.
        assert!(t.abs() < 0.07, "{t}");
    }

    #[test]
    fn failing_sample_is_skipped_and_reported() {
        let c = corpus(3, 3);
        let report = stability_run(&c, &FailsOn("d1"), &cfg(2, false)).unwrap();
        assert_eq!(report.samples.len(), 2);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].doc_id, "d1");
    }

    #[test]
    fn fewer_than_two_runs_is_rejected() {
        assert!(stability_run(&corpus(1, 2), &ByIdRanker, &cfg(1, false)).is_err());
    }

    #[test]
    fn representative_takes_lowest_index_on_ties() {
        let a = Ranking::from_order(&["x", "y", "z"]);
        let b = Ranking::from_order(&["z", "y", "x"]);
        // Runs: a, a, b. Runs 0 and 1 both average (1 + -1) / 2 = 0.
        let rep = representative(&[a.clone(), a, b], kendall_tau).unwrap();
        assert_eq!(rep.run, 0);
        assert_eq!(rep.mean, 0.0);
    }
}

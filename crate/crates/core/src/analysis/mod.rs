//! Experiments built on the ranking pipeline: run-to-run stability, the
//! length-penalty scan, abstractiveness statistics and training export.

mod abstractiveness;
mod penalty;
mod rankers;
mod stability;

pub use abstractiveness::{
    abstractiveness_report, brio_record, AbstractivenessRow, BrioRecord, SummarySource,
};
pub use penalty::{penalty_scan, PenaltyCell, PenaltyScanReport};
pub use rankers::{
    ranking_from_scores, rouge_ranker, RandomRanker, Ranker, RecordedRanker, RougeRanker,
    ScurankRanker,
};
pub use stability::{
    representative, stability_run, Representative, SampleStability, SkippedSample, StabilityConfig,
    StabilityReport,
};

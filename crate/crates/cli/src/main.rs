//! `scurank`: batch jobs over candidate-summary corpora.
//!
//! Usage errors exit with 2, failed runs with 1.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{parse_snake, parse_source, EncoderKind, ExtractorKind, RunConfig};
use scurank_core::analysis::SummarySource;
use scurank_core::embedding::Metric;
use scurank_core::metrics::AlphaLevel;
use scurank_core::scoring::{LengthPenalty, ScoreTransform};

#[derive(Parser, Debug)]
#[command(
    name = "scurank",
    version,
    about = "Rank candidate summaries by SCU consensus"
)]
struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-document work (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(flatten)]
    settings: SettingFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct SettingFlags {
    #[arg(long, global = true, value_enum)]
    encoder: Option<EncoderKind>,
    /// Embedding service root for `--encoder bridge`.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    encoder_model: Option<String>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true, value_enum)]
    extractor: Option<ExtractorKind>,
    /// Chat-completions API root.
    #[arg(long, global = true)]
    base_url: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    shots: Option<u8>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    min_cluster_size: Option<usize>,
    #[arg(long, global = true)]
    min_samples: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true, value_parser = parse_snake::<Metric>)]
    metric: Option<Metric>,
    #[arg(long, global = true, value_parser = parse_snake::<ScoreTransform>)]
    transform: Option<ScoreTransform>,
    #[arg(long, global = true, value_parser = parse_snake::<LengthPenalty>)]
    penalty: Option<LengthPenalty>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RankerKind {
    Scurank,
    Rouge,
    Random,
    Recorded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Cnndm,
    Xsum,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Extract SCUs for every candidate.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank the candidates of every document.
    Rank {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Precomputed SCUs from `extract`; skips extraction.
        #[arg(long)]
        scus: Option<PathBuf>,
        /// Write per-document cluster labels and condensed trees here.
        #[arg(long)]
        dump_clusters: Option<PathBuf>,
    },
    /// Agreement of repeated ranking runs.
    Stability {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "scurank")]
        ranker: RankerKind,
        /// Ranked-record files, one per run, for `--ranker recorded`.
        #[arg(long, value_delimiter = ',')]
        recorded: Vec<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        /// Present candidates in a fresh seeded order on every run.
        #[arg(long)]
        shuffle: bool,
        #[arg(long, value_parser = parse_snake::<AlphaLevel>)]
        alpha_level: Option<AlphaLevel>,
    },
    /// Kendall tau between each scoring variant and summary length.
    PenaltyScan {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scus: Option<PathBuf>,
    },
    /// Compare extracted SCUs with human-written ones.
    IntrinsicEval {
        /// Human SCUs, in the same record format `extract` writes.
        #[arg(long = "in")]
        input: PathBuf,
        /// Extracted SCUs to evaluate.
        #[arg(long)]
        scus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean extractive coverage and density.
    Abstractiveness {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// candidates, ranked-top or references; repeatable.
        #[arg(long = "source", value_parser = parse_source, default_value = "candidates")]
        sources: Vec<SummarySource>,
        /// Ranked records for `ranked-top`.
        #[arg(long)]
        ranked: Option<PathBuf>,
    },
    /// Write ranked candidate lists for contrastive training.
    ExportBrio {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use these rankings instead of ranking now.
        #[arg(long)]
        ranked: Option<PathBuf>,
    },
    /// Generate one candidate per model for every article.
    Generate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<String>,
        #[arg(long, value_enum, default_value = "cnndm")]
        prompt: PromptKind,
    },
    /// Corpus size and length statistics.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Cli {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = RunConfig::load(self.config.as_deref())?;
        let f = &self.settings;
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        set!(self.jobs => c.jobs);
        set!(self.seed => c.seed);
        if let Some(d) = &self.cache_dir {
            c.cache_dir = Some(d.clone());
        }
        set!(f.encoder => c.encoder.backend);
        set!(f.endpoint => c.encoder.endpoint);
        if let Some(m) = &f.encoder_model {
            c.encoder.model = Some(m.clone());
        }
        if let Some(d) = f.dim {
            c.encoder.dimension = Some(d);
        }
        set!(f.extractor => c.extractor.backend);
        set!(f.base_url => c.extractor.base_url);
        set!(f.model => c.extractor.model);
        set!(f.shots => c.extractor.shots);
        set!(f.temperature => c.extractor.temperature);
        set!(f.min_cluster_size => c.clustering.min_cluster_size);
        set!(f.min_samples => c.clustering.min_samples);
        set!(f.epsilon => c.clustering.epsilon);
        set!(f.metric => c.clustering.metric);
        set!(f.transform => c.scoring.transform);
        set!(f.penalty => c.scoring.penalty);
        if let Command::Stability {
            runs,
            shuffle,
            alpha_level,
            ..
        } = &self.command
        {
            set!(runs => c.stability.runs);
            set!(alpha_level => c.stability.alpha_level);
            if *shuffle {
                c.stability.shuffle = true;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = cli
        .resolve()
        .and_then(|cfg| commands::run(&cli.command, &cfg));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

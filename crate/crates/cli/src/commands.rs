use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use scurank_core::analysis::{
    abstractiveness_report, brio_record, penalty_scan, stability_run, RandomRanker, Ranker,
    RecordedRanker, RougeRanker, ScurankRanker, StabilityConfig,
};
use scurank_core::cache::Cache;
use scurank_core::clustering::{ClusterContext, HdbscanParams};
use scurank_core::corpus::{
    corpus_stats, load_corpus, read_jsonl, write_corpus, write_jsonl, CorpusFormat, Document,
    RankedRecord, ScuRecord, ScusRecord,
};
use scurank_core::embedding::{Encoder, EncoderConfig};
use scurank_core::extraction::{
    generate_candidates, ExtractorConfig, GenerationPrompt, HttpChatClient, LlmExtractor,
    OfflineExtractor, ScuExtractor, ShotExample,
};
use scurank_core::metrics::intrinsic_scu_eval;
use scurank_core::scoring::{rank_with_scus, DocumentAnalysis, Pipeline, ScoringConfig};
use scurank_core::RetryPolicy;

use crate::config::{EncoderKind, ExtractorKind, RunConfig};
use crate::manifest::{digest_file, Manifest};
use crate::{Command, PromptKind, RankerKind};

/// Owned extractor, encoder and cache that a [`Pipeline`] borrows.
struct Stack {
    extractor: Box<dyn ScuExtractor>,
    encoder: Box<dyn Encoder>,
    cache: Option<Cache>,
    params: HdbscanParams,
    cfg: RunConfig,
}

fn retry(cfg: &RunConfig) -> RetryPolicy {
    RetryPolicy {
        max_attempts: cfg.extractor.max_attempts,
        ..RetryPolicy::default()
    }
}

fn extractor_config(cfg: &RunConfig) -> anyhow::Result<ExtractorConfig> {
    let extra_examples = match &cfg.extractor.examples {
        Some(p) => read_jsonl::<ShotExample>(p)?,
        None => Vec::new(),
    };
    Ok(ExtractorConfig {
        model_id: cfg.extractor.model.clone(),
        temperature: cfg.extractor.temperature,
        shots: cfg.extractor.shots,
        prompt_version: cfg.extractor.prompt_version.clone(),
        retry: retry(cfg),
        extra_examples,
    })
}

fn cache(cfg: &RunConfig) -> Option<Cache> {
    cfg.cache_dir.as_ref().map(Cache::new)
}

impl Stack {
    /// `cache_replies = false` keeps model replies out of the cache, for
    /// jobs whose runs must each reach the model.
    fn build(cfg: &RunConfig, cache_replies: bool) -> anyhow::Result<Self> {
        let cache = cache(cfg);
        let extractor: Box<dyn ScuExtractor> = match cfg.extractor.backend {
            ExtractorKind::Offline => Box::new(OfflineExtractor),
            ExtractorKind::Llm => {
                let backend = HttpChatClient::new(&cfg.extractor.base_url, retry(cfg))?;
                Box::new(LlmExtractor::new(
                    extractor_config(cfg)?,
                    Arc::new(backend),
                    cache.clone().filter(|_| cache_replies),
                )?)
            }
        };
        let e = &cfg.encoder;
        let mut enc = match e.backend {
            EncoderKind::Offline => {
                EncoderConfig::offline(e.dimension.unwrap_or(256), e.offline_seed)
            }
            EncoderKind::Bridge => EncoderConfig::bridge(e.endpoint.clone()),
        };
        if let Some(m) = &e.model {
            enc.model_id = m.clone();
        }
        if let Some(d) = e.dimension {
            enc.dimension = d;
        }
        enc.batch_size = e.batch_size;
        enc.normalize = e.normalize;
        let params = HdbscanParams {
            min_cluster_size: cfg.clustering.min_cluster_size,
            min_samples: cfg.clustering.min_samples,
            cluster_selection_epsilon: cfg.clustering.epsilon,
            ..HdbscanParams::default()
        };
        params.validate()?;
        Ok(Self {
            extractor,
            encoder: enc.build()?,
            cache,
            params,
            cfg: cfg.clone(),
        })
    }

    fn pipeline(&self, keep_tree: bool) -> Pipeline<'_> {
        Pipeline {
            extractor: self.extractor.as_ref(),
            cluster: ClusterContext {
                encoder: self.encoder.as_ref(),
                normalize: self.cfg.encoder.normalize,
                metric: self.cfg.clustering.metric,
                params: self.params,
                cache: self.cache.as_ref(),
            },
            scoring: ScoringConfig {
                score_transform: self.cfg.scoring.transform,
                length_penalty: self.cfg.scoring.penalty,
                ..ScoringConfig::default()
            },
            keep_tree,
        }
    }
}

fn thread_pool(cfg: &RunConfig) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()?)
}

/// Runs `f` on every document in parallel, keeping input order. Failures are
/// logged per document and counted.
fn per_document<T, F>(pool: &rayon::ThreadPool, docs: &[Document], f: F) -> (Vec<(usize, T)>, usize)
where
    T: Send,
    F: Fn(&Document) -> scurank_core::Result<T> + Sync,
{
    let results: Vec<_> = pool.install(|| docs.par_iter().map(&f).collect());
    let mut ok = Vec::with_capacity(docs.len());
    let mut failed = 0;
    for (i, (doc, r)) in docs.iter().zip(results).enumerate() {
        match r {
            Ok(v) => ok.push((i, v)),
            Err(e) => {
                log::error!("document {}: {e}", doc.doc_id);
                failed += 1;
            }
        }
    }
    (ok, failed)
}

fn check_failures(failed: usize, total: usize) -> anyhow::Result<()> {
    if failed > 0 {
        bail!("{failed} of {total} documents failed; see the log for details");
    }
    Ok(())
}

type ScuTable = HashMap<(String, String), Vec<ScuRecord>>;

fn load_scus(path: &Path) -> anyhow::Result<ScuTable> {
    Ok(read_jsonl::<ScusRecord>(path)?
        .into_iter()
        .map(|r| ((r.doc_id.clone(), r.candidate_id.clone()), r.to_records()))
        .collect())
}

fn analyze_all(
    pool: &rayon::ThreadPool,
    docs: &[Document],
    stack: &Stack,
    scus: Option<&ScuTable>,
    keep_tree: bool,
) -> (Vec<(usize, DocumentAnalysis)>, usize) {
    let pipeline = stack.pipeline(keep_tree);
    per_document(pool, docs, |doc| match scus {
        None => pipeline.analyze(doc),
        Some(table) => {
            let by_candidate = doc
                .candidates
                .iter()
                .map(|c| {
                    table
                        .get(&(doc.doc_id.clone(), c.candidate_id.clone()))
                        .cloned()
                        .ok_or_else(|| {
                            scurank_core::Error::Validation(format!(
                                "no SCUs for candidate {}",
                                c.candidate_id
                            ))
                        })
                })
                .collect::<scurank_core::Result<Vec<_>>>()?;
            rank_with_scus(
                doc,
                by_candidate,
                &pipeline.cluster,
                &pipeline.scoring,
                keep_tree,
            )
        }
    })
}

struct Job<'a> {
    command: &'a Command,
    cfg: &'a RunConfig,
}

impl Job<'_> {
    fn manifest(
        &self,
        out: &Path,
        inputs: &[&Path],
        extra_outputs: &[&Path],
        stack: Option<&Stack>,
    ) -> anyhow::Result<()> {
        let mut digests = inputs
            .iter()
            .map(|p| digest_file(p))
            .collect::<anyhow::Result<Vec<_>>>()?;
        if let Some(p) = &self.cfg.extractor.examples {
            digests.push(digest_file(p)?);
        }
        let mut outputs = vec![out.to_path_buf()];
        outputs.extend(extra_outputs.iter().map(|p| p.to_path_buf()));
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            invocation: self.command,
            config: self.cfg,
            prompt_version: &self.cfg.extractor.prompt_version,
            extractor: stack.map(|s| s.extractor.describe()),
            encoder: stack.map(|s| s.encoder.model_id().to_string()),
            inputs: digests,
            outputs,
        }
        .write_beside(out)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> anyhow::Result<Vec<Document>> {
    Ok(load_corpus(path, CorpusFormat::CandidatesJsonl)?)
}

pub fn run(command: &Command, cfg: &RunConfig) -> anyhow::Result<()> {
    let job = Job { command, cfg };
    let pool = thread_pool(cfg)?;
    match command {
        Command::Extract { input, out } => {
            let docs = load(input)?;
            let stack = Stack::build(cfg, true)?;
            let pipeline = stack.pipeline(false);
            let (ok, failed) = per_document(&pool, &docs, |d| pipeline.extract(d));
            let records: Vec<ScusRecord> = ok
                .iter()
                .flat_map(|(i, per_cand)| {
                    let doc = &docs[*i];
                    doc.candidates.iter().zip(per_cand).map(|(c, recs)| {
                        ScusRecord::from_records(&doc.doc_id, &c.candidate_id, recs)
                    })
                })
                .collect();
            write_jsonl(out, &records)?;
            job.manifest(out, &[input], &[], Some(&stack))?;
            check_failures(failed, docs.len())
        }
        Command::Rank {
            input,
            out,
            scus,
            dump_clusters,
        } => {
            let docs = load(input)?;
            let stack = Stack::build(cfg, true)?;
            let table = scus.as_deref().map(load_scus).transpose()?;
            let (ok, failed) = analyze_all(
                &pool,
                &docs,
                &stack,
                table.as_ref(),
                dump_clusters.is_some(),
            );
            let ranked: Vec<RankedRecord> = ok.iter().map(|(_, a)| a.ranked.to_record()).collect();
            write_jsonl(out, &ranked)?;
            let mut extra: Vec<&Path> = Vec::new();
            if let Some(path) = dump_clusters {
                let dumps: Vec<_> = ok.iter().filter_map(|(_, a)| a.dump.as_ref()).collect();
                write_jsonl(path, &dumps)?;
                extra.push(path);
            }
            let mut inputs: Vec<&Path> = vec![input];
            inputs.extend(scus.as_deref());
            job.manifest(out, &inputs, &extra, Some(&stack))?;
            check_failures(failed, docs.len())
        }
        Command::Stability {
            input,
            out,
            ranker,
            recorded,
            runs,
            ..
        } => {
            let docs = load(input)?;
            let mut scfg = StabilityConfig {
                runs: cfg.stability.runs,
                shuffle: cfg.stability.shuffle,
                seed: cfg.seed,
                alpha_level: cfg.stability.alpha_level,
            };
            let stack;
            let boxed: Box<dyn Ranker> = match ranker {
                RankerKind::Scurank => {
                    stack = Some(Stack::build(cfg, false)?);
                    Box::new(ScurankRanker {
                        pipeline: stack.as_ref().unwrap().pipeline(false),
                    })
                }
                RankerKind::Rouge => {
                    stack = None;
                    Box::new(RougeRanker)
                }
                RankerKind::Random => {
                    stack = None;
                    Box::new(RandomRanker { seed: cfg.seed })
                }
                RankerKind::Recorded => {
                    stack = None;
                    if recorded.len() < 2 {
                        bail!("--ranker recorded needs at least two --recorded files");
                    }
                    if runs.is_some_and(|r| r != recorded.len()) {
                        bail!("--runs disagrees with the number of --recorded files");
                    }
                    scfg.runs = recorded.len();
                    Box::new(RecordedRanker::from_files("recorded", recorded)?)
                }
            };
            let report = pool.install(|| stability_run(&docs, boxed.as_ref(), &scfg))?;
            print!("{}", report.table());
            if let Some(out) = out {
                write_json(out, &report)?;
                let mut inputs: Vec<&Path> = vec![input];
                inputs.extend(recorded.iter().map(PathBuf::as_path));
                job.manifest(out, &inputs, &[], stack.as_ref())?;
            }
            Ok(())
        }
        Command::PenaltyScan { input, out, scus } => {
            let docs = load(input)?;
            let stack = Stack::build(cfg, true)?;
            let table = scus.as_deref().map(load_scus).transpose()?;
            let (ok, failed) = analyze_all(&pool, &docs, &stack, table.as_ref(), false);
            let scored: Vec<_> = ok.into_iter().map(|(_, a)| a.scored).collect();
            let report = penalty_scan(&scored)?;
            print!("{}", report.table());
            if let Some(out) = out {
                write_json(out, &report)?;
                let mut inputs: Vec<&Path> = vec![input];
                inputs.extend(scus.as_deref());
                job.manifest(out, &inputs, &[], Some(&stack))?;
            }
            check_failures(failed, docs.len())
        }
        Command::IntrinsicEval { input, scus, out } => {
            let human: Vec<ScusRecord> = read_jsonl(input)?;
            let extracted: HashMap<(String, String), ScusRecord> = read_jsonl::<ScusRecord>(scus)?
                .into_iter()
                .map(|r| ((r.doc_id.clone(), r.candidate_id.clone()), r))
                .collect();
            let report = intrinsic_report(&human, &extracted)?;
            println!(
                "pairs  recall  precision\n{}  {:.4}  {:.4}",
                report.pairs, report.mean_recall, report.mean_precision
            );
            if let Some(out) = out {
                write_json(out, &report)?;
                job.manifest(out, &[input, scus], &[], None)?;
            }
            Ok(())
        }
        Command::Abstractiveness {
            input,
            out,
            sources,
            ranked,
        } => {
            let docs = load(input)?;
            let ranked_records: Option<Vec<RankedRecord>> =
                ranked.as_deref().map(read_jsonl).transpose()?;
            let rows = sources
                .iter()
                .map(|s| abstractiveness_report(&docs, *s, ranked_records.as_deref()))
                .collect::<scurank_core::Result<Vec<_>>>()?;
            println!("source       summaries  coverage  density");
            for r in &rows {
                let name = serde_json::to_value(r.source)?;
                println!(
                    "{:<12} {:>9}  {:>8.4}  {:>7.4}",
                    name.as_str().unwrap_or_default(),
                    r.summaries,
                    r.coverage,
                    r.density
                );
            }
            if let Some(out) = out {
                write_json(out, &rows)?;
                let mut inputs: Vec<&Path> = vec![input];
                inputs.extend(ranked.as_deref());
                job.manifest(out, &inputs, &[], None)?;
            }
            Ok(())
        }
        Command::ExportBrio { input, out, ranked } => {
            let docs = load(input)?;
            let (by_doc, failed, stack) = match ranked {
                Some(path) => {
                    let recs: Vec<RankedRecord> = read_jsonl(path)?;
                    let map: HashMap<String, RankedRecord> =
                        recs.into_iter().map(|r| (r.doc_id.clone(), r)).collect();
                    (map, 0, None)
                }
                None => {
                    let stack = Stack::build(cfg, true)?;
                    let (ok, failed) = analyze_all(&pool, &docs, &stack, None, false);
                    let map = ok
                        .into_iter()
                        .map(|(_, a)| (a.doc_id.clone(), a.ranked.to_record()))
                        .collect();
                    (map, failed, Some(stack))
                }
            };
            let mut records = Vec::with_capacity(docs.len());
            let mut missing = 0;
            for doc in &docs {
                match by_doc.get(&doc.doc_id) {
                    Some(r) => records.push(brio_record(doc, r)?),
                    None if ranked.is_some() => {
                        log::error!("document {}: no ranking", doc.doc_id);
                        missing += 1;
                    }
                    None => {}
                }
            }
            write_jsonl(out, &records)?;
            let mut inputs: Vec<&Path> = vec![input];
            inputs.extend(ranked.as_deref());
            job.manifest(out, &inputs, &[], stack.as_ref())?;
            check_failures(failed + missing, docs.len())
        }
        Command::Generate {
            input,
            out,
            models,
            prompt,
        } => {
            let mut docs = load(input)?;
            let backend = HttpChatClient::new(&cfg.extractor.base_url, retry(cfg))?;
            let ecfg = extractor_config(cfg)?;
            let cache = cache(cfg);
            let prompt = match prompt {
                PromptKind::Cnndm => GenerationPrompt::Cnndm,
                PromptKind::Xsum => GenerationPrompt::Xsum,
            };
            let (ok, failed) = per_document(&pool, &docs, |d| {
                generate_candidates(&d.article, prompt, models, &ecfg, &backend, cache.as_ref())
            });
            let mut model_failures = 0;
            for (i, outcome) in ok {
                let doc = &mut docs[i];
                for (model, err) in &outcome.failures {
                    log::error!("document {}: model {model}: {err}", doc.doc_id);
                    model_failures += 1;
                }
                for c in outcome.candidates {
                    if doc.candidate_index(&c.candidate_id).is_some() {
                        bail!(
                            "document {}: candidate {:?} already exists",
                            doc.doc_id,
                            c.candidate_id
                        );
                    }
                    doc.candidates.push(c);
                }
            }
            write_corpus(out, &docs)?;
            job.manifest(out, &[input], &[], None)?;
            if model_failures > 0 {
                bail!("{model_failures} generations failed; see the log for details");
            }
            check_failures(failed, docs.len())
        }
        Command::Stats { input, out } => {
            let docs = load(input)?;
            let stats = corpus_stats(&docs);
            println!("{}", serde_json::to_string_pretty(&stats)?);
            if let Some(out) = out {
                write_json(out, &stats)?;
                job.manifest(out, &[input], &[], None)?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct IntrinsicRow {
    doc_id: String,
    candidate_id: String,
    recall: f64,
    precision: f64,
}

#[derive(Debug, Serialize)]
struct IntrinsicReport {
    pairs: usize,
    mean_recall: f64,
    mean_precision: f64,
    rows: Vec<IntrinsicRow>,
}

fn intrinsic_report(
    human: &[ScusRecord],
    extracted: &HashMap<(String, String), ScusRecord>,
) -> anyhow::Result<IntrinsicReport> {
    if human.is_empty() {
        bail!("no human SCU records");
    }
    let rows = human
        .iter()
        .map(|h| {
            let key = (h.doc_id.clone(), h.candidate_id.clone());
            let e = extracted.get(&key).with_context(|| {
                format!("no extracted SCUs for {}/{}", h.doc_id, h.candidate_id)
            })?;
            let s = intrinsic_scu_eval(&e.scus, &h.scus)
                .with_context(|| format!("{}/{}", h.doc_id, h.candidate_id))?;
            Ok(IntrinsicRow {
                doc_id: h.doc_id.clone(),
                candidate_id: h.candidate_id.clone(),
                recall: s.recall,
                precision: s.precision,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    Ok(IntrinsicReport {
        pairs: rows.len(),
        mean_recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
        mean_precision: rows.iter().map(|r| r.precision).sum::<f64>() / n,
        rows,
    })
}

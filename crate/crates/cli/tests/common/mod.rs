#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scurank_core::corpus::{write_corpus, CandidateSummary, Document};

pub const FACTS: [&str; 8] = [
    "The city council approved a new budget for public transport on Tuesday after a long debate",
    "Heavy rain flooded several streets in the old town and forced dozens of shops to close early",
    "Schools across the region will stay closed until Friday while engineers inspect the buildings",
    "The river reached its highest level in more than a decade according to the national weather office",
    "Volunteers handed out sandbags and bottled water to residents living near the riverbank",
    "Officials expect the water to recede by the weekend if the forecast for dry weather holds",
    "The mayor said the cost of the repairs would be covered by an emergency fund set up last year",
    "Local businesses reported losses but most expect to reopen within the next two weeks",
];

/// One fact sentence with random case and end punctuation.
fn render(rng: &mut ChaCha8Rng, fact: &str) -> String {
    let body = match rng.gen_range(0..3) {
        0 => fact.to_string(),
        1 => fact.to_lowercase(),
        _ => fact.to_uppercase(),
    };
    let end = ['.', '!', '?'][rng.gen_range(0..3)];
    format!("{body}{end}")
}

/// Documents whose candidates restate overlapping subsets of a fact pool.
pub fn synthetic_corpus(n_docs: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_docs)
        .map(|d| {
            let n_cands = rng.gen_range(4..=9);
            let candidates = (0..n_cands)
                .map(|c| {
                    let k = rng.gen_range(1..=3);
                    let facts: Vec<&str> = FACTS.choose_multiple(&mut rng, k).copied().collect();
                    let text: Vec<String> = facts.iter().map(|f| render(&mut rng, f)).collect();
                    CandidateSummary::new(format!("c{c}"), format!("model-{}", c % 3), text.join(" "))
                })
                .collect();
            Document::new(format!("doc{d:02}"), FACTS.join(". ") + ".", candidates)
                .with_references(vec![format!("{}.", FACTS[d % FACTS.len()])])
        })
        .collect()
}

pub fn write_synthetic(dir: &Path, name: &str, n_docs: usize, seed: u64) {
    write_corpus(dir.join(name), &synthetic_corpus(n_docs, seed)).unwrap();
}

/// Runs the binary in `dir` with offline backends.
pub fn scurank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scurank"))
        .current_dir(dir)
        .env_remove("SCURANK_API_KEY")
        .env("RUST_LOG", "error")
        .args(["--extractor", "offline", "--encoder", "offline"])
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(out: &Output) -> &Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

//! Tokenizers shared across the crate.
//!
//! Two tokenizations are used and both are fixed:
//!
//! * [`word_count`] counts whitespace-delimited words. It is the length
//!   measure for the length penalty and for corpus statistics.
//! * [`metric_tokens`] lowercases and splits on every non-alphanumeric
//!   character. ROUGE, the intrinsic SCU evaluation and the extractive
//!   fragment statistics all use it. No stemming, no stopword removal.

/// Number of whitespace-delimited words in `text`.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercased alphanumeric tokens of `text`, in order.
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

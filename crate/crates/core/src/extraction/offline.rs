//! Rule-based SCU decomposition used when no model endpoint is available.
//!
//! Sentences end at `.`, `!` or `?` followed by whitespace or end of text.
//! Each sentence is then split at `;` and at a comma followed by a
//! coordinating conjunction (for, and, nor, but, or, yet, so). The
//! conjunction is dropped and every clause inherits the sentence's
//! terminal punctuation.

const CONJUNCTIONS: [&str; 7] = ["for", "and", "nor", "but", "or", "yet", "so"];
const CLOSERS: [char; 5] = ['"', '\'', ')', '\u{201d}', '\u{2019}'];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_terminal(c) {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, nc)) = chars.peek() {
            if is_terminal(nc) || CLOSERS.contains(&nc) {
                end = j + nc.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        if chars.peek().is_none_or(|&(_, nc)| nc.is_whitespace()) {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Byte offsets `(cut_start, resume)` of each ", <conjunction> " in `s`.
fn conjunction_cuts(s: &str) -> Vec<(usize, usize)> {
    let mut cuts = Vec::new();
    for (i, _) in s.match_indices(',') {
        let after = &s[i + 1..];
        let trimmed = after.trim_start();
        if trimmed.len() == after.len() {
            continue;
        }
        let word_len = trimmed
            .find(|c: char| !c.is_alphabetic())
            .unwrap_or(trimmed.len());
        let word = &trimmed[..word_len];
        let rest = &trimmed[word_len..];
        if CONJUNCTIONS.contains(&word.to_lowercase().as_str())
            && rest.starts_with(char::is_whitespace)
        {
            let resume = s.len() - rest.trim_start().len();
            cuts.push((i, resume));
        }
    }
    cuts
}

fn finish_clause(raw: &str, terminator: Option<char>) -> Option<String> {
    let t = raw.trim().trim_end_matches([',', ';']).trim_end();
    if t.is_empty() || !t.chars().any(char::is_alphanumeric) {
        return None;
    }
    let mut clause = t.to_string();
    let ends_terminal = t
        .trim_end_matches(CLOSERS)
        .chars()
        .next_back()
        .is_some_and(is_terminal);
    if let (Some(term), false) = (terminator, ends_terminal) {
        clause.push(term);
    }
    Some(clause)
}

/// Deterministic clause-level decomposition of `text`.
pub fn split_clauses(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for sentence in sentences(text) {
        let terminator = sentence
            .trim_end_matches(CLOSERS)
            .chars()
            .next_back()
            .filter(|&c| is_terminal(c));
        for part in sentence.split(';') {
            let mut pos = 0;
            for (cut, resume) in conjunction_cuts(part) {
                out.extend(finish_clause(&part[pos..cut], terminator));
                pos = resume;
            }
            out.extend(finish_clause(&part[pos..], terminator));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sentences() {
        assert_eq!(split_clauses("A ran. B slept."), vec!["A ran.", "B slept."]);
    }

    #[test]
    fn empty_input() {
        assert!(split_clauses("").is_empty());
        assert!(split_clauses("  . ").is_empty());
    }

    #[test]
    fn coordinated_clauses_split() {
        // "X won, and Y lost." -> cut at ", and " -> "X won" + "Y lost.";
        // the first clause inherits the sentence terminator.
        assert_eq!(
            split_clauses("X won, and Y lost."),
            vec!["X won.", "Y lost."]
        );
    }

    #[test]
    fn semicolons_split_and_plain_commas_do_not() {
        assert_eq!(
            split_clauses("Prices rose; wages fell. Red, green, blue paint sold!"),
            vec![
                "Prices rose.",
                "wages fell.",
                "Red, green, blue paint sold!"
            ]
        );
    }

    #[test]
    fn decimals_and_quotes_stay_inside_sentence() {
        assert_eq!(
            split_clauses("It cost 3.5 million. He said \"no.\" Then left"),
            vec!["It cost 3.5 million.", "He said \"no.\"", "Then left"]
        );
    }

    #[test]
    fn conjunction_must_be_a_whole_word() {
        assert_eq!(
            split_clauses("Cats, andirons and dogs."),
            vec!["Cats, andirons and dogs."]
        );
    }
}

//! Text normalization shared by condition matching and diagnosis extraction.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Normalize free text for robust matching: lowercase, strip accents,
/// replace punctuation with spaces, and collapse whitespace.
///
/// The same function backs condition-name normalization and diagnosis
/// extraction so that the two sides can never disagree on surface form.
pub fn normalize(s: &str) -> String {
    let folded: String = s
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(|c| c.to_lowercase())
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    collapse_whitespace(&folded)
}

/// Collapse runs of whitespace into single spaces and trim the ends.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Remove bracketed machine tags of the form `[code:...]` that the oracle
/// doctor embeds in its questions. Applied before any text is persisted or
/// exported so transcripts and packets stay human-readable.
pub fn strip_machine_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find("[code:") {
        match rest[start..].find(']') {
            Some(end) => {
                out.push_str(rest[..start].trim_end());
                rest = &rest[start + end + 1..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    collapse_whitespace(&out)
}

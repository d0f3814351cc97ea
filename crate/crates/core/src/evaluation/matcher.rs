//! Diagnosis extraction: map a free-text diagnosis utterance onto the
//! condition catalog by longest normalized-substring containment.

use serde::{Deserialize, Serialize};

use crate::dataset::ConditionCatalog;
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    ExactSubstring,
    None,
}

/// Matching rule. Several condition names nest (one is a substring of
/// another), so the default picks the longest; the strict mode only accepts
/// an utterance that *is* a condition name, for sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchPolicy {
    #[default]
    LongestSubstring,
    ExactOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisMatch {
    pub raw: String,
    pub matched: Option<String>,
    pub method: MatchMethod,
    pub correct: bool,
}

impl DiagnosisMatch {
    /// Mark correctness against the ground-truth pathology.
    pub fn with_truth(mut self, pathology: &str) -> Self {
        self.correct = self.matched.as_deref() == Some(pathology);
        self
    }
}

/// Extract the diagnosed condition from an utterance: normalize, find every
/// condition whose normalized name occurs as a substring, keep the longest,
/// break ties by earliest occurrence. Total: unmatched text yields `None`.
pub fn extract_diagnosis(
    raw: &str,
    conditions: &ConditionCatalog,
    policy: MatchPolicy,
) -> DiagnosisMatch {
    let haystack = normalize(raw);
    let mut best: Option<(usize, usize, &str)> = None; // (len, pos, name)
    for condition in conditions.iter() {
        let needle = &condition.normalized_name;
        if needle.is_empty() {
            continue;
        }
        let hit = match policy {
            MatchPolicy::LongestSubstring => haystack
                .find(needle.as_str())
                .map(|pos| (pos, needle.len())),
            MatchPolicy::ExactOnly => (haystack == *needle).then_some((0, needle.len())),
        };
        if let Some((pos, len)) = hit {
            let candidate = (len, pos, condition.name.as_str());
            best = Some(match best {
                None => candidate,
                Some(current) => {
                    let (cur_len, cur_pos, _) = current;
                    if len > cur_len || (len == cur_len && pos < cur_pos) {
                        candidate
                    } else {
                        current
                    }
                }
            });
        }
    }
    match best {
        Some((_, _, name)) => DiagnosisMatch {
            raw: raw.to_string(),
            matched: Some(name.to_string()),
            method: MatchMethod::ExactSubstring,
            correct: false,
        },
        None => DiagnosisMatch {
            raw: raw.to_string(),
            matched: None,
            method: MatchMethod::None,
            correct: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(names: &[&str]) -> ConditionCatalog {
        let mut catalog = ConditionCatalog::new();
        for name in names {
            catalog.insert(name).unwrap();
        }
        catalog
    }

    #[test]
    fn direct_containment_matches() {
        let catalog = catalog(&["Bronchitis", "URTI"]);
        let m = extract_diagnosis(
            "[inform] Based on the symptoms, the diagnosis is bronchitis.",
            &catalog,
            MatchPolicy::LongestSubstring,
        );
        assert_eq!(m.matched.as_deref(), Some("Bronchitis"));
        assert_eq!(m.method, MatchMethod::ExactSubstring);
    }

    #[test]
    fn longest_match_wins_over_nested_name() {
        let catalog = catalog(&["Pharyngitis", "Viral pharyngitis"]);
        let m = extract_diagnosis(
            "it could be viral pharyngitis",
            &catalog,
            MatchPolicy::LongestSubstring,
        );
        assert_eq!(m.matched.as_deref(), Some("Viral pharyngitis"));
    }

    #[test]
    fn earliest_occurrence_breaks_length_ties() {
        let catalog = catalog(&["Anemia", "Angina"]);
        let m = extract_diagnosis(
            "angina first, then anemia",
            &catalog,
            MatchPolicy::LongestSubstring,
        );
        assert_eq!(m.matched.as_deref(), Some("Angina"));
    }

    #[test]
    fn unmatched_text_is_total() {
        let catalog = catalog(&["URTI"]);
        let m = extract_diagnosis(
            "I cannot determine the diagnosis.",
            &catalog,
            MatchPolicy::LongestSubstring,
        );
        assert!(m.matched.is_none());
        assert!(!m.correct);
        assert_eq!(m.method, MatchMethod::None);
    }

    #[test]
    fn correctness_requires_pathology_match() {
        let catalog = catalog(&["URTI", "Bronchitis"]);
        let m = extract_diagnosis("likely URTI", &catalog, MatchPolicy::LongestSubstring);
        assert!(m.clone().with_truth("URTI").correct);
        assert!(!m.with_truth("Bronchitis").correct);
    }

    #[test]
    fn exact_only_rejects_containment() {
        let catalog = catalog(&["URTI"]);
        let contained = extract_diagnosis("likely URTI today", &catalog, MatchPolicy::ExactOnly);
        assert!(contained.matched.is_none());
        let exact = extract_diagnosis("URTI.", &catalog, MatchPolicy::ExactOnly);
        assert_eq!(exact.matched.as_deref(), Some("URTI"));
    }

    #[test]
    fn accents_and_punctuation_are_ignored() {
        let catalog = catalog(&["Guillain-Barré syndrome"]);
        let m = extract_diagnosis(
            "the diagnosis is guillain barre syndrome",
            &catalog,
            MatchPolicy::LongestSubstring,
        );
        assert_eq!(m.matched.as_deref(), Some("Guillain-Barré syndrome"));
    }
}

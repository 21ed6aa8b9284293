//! Gazetteer: finds occurrences of index terms in raw text.
//!
//! Matching is case-insensitive (per-character simple folding) and anchored
//! at word boundaries. Overlaps are resolved by preferring the longest match,
//! then the leftmost one. Offsets are in Unicode scalar values.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};
use unicode_normalization::{is_nfc, UnicodeNormalization};

use crate::index::InvertedIndex;
use crate::normalize::{fold_case, fold_char};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TermOccurrence {
    pub start: usize,
    pub end: usize,
    /// Canonical index term.
    pub term: String,
    /// The matched text, exactly as it appears.
    pub surface: String,
}

impl TermOccurrence {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

pub struct Matcher {
    automaton: Option<AhoCorasick>,
    /// Canonical term per automaton pattern id.
    canonical: Vec<String>,
    vocabulary: BTreeSet<String>,
}

impl std::fmt::Debug for Matcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Matcher")
            .field("patterns", &self.canonical.len())
            .field("vocabulary", &self.vocabulary.len())
            .finish()
    }
}

/// Whether the character just outside a match permits a word boundary.
fn is_boundary(c: Option<char>) -> bool {
    c.is_none_or(|c| !c.is_alphanumeric())
}

impl Matcher {
    pub fn from_index(index: &InvertedIndex) -> Self {
        Self::from_terms(index.terms())
    }

    /// Several terms can fold to the same key (`Lisbon`, `LISBON`); the
    /// lexicographically smallest becomes the canonical term for that key.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let vocabulary: BTreeSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        let mut by_key: BTreeMap<String, &str> = BTreeMap::new();
        for term in &vocabulary {
            by_key.entry(fold_case(term)).or_insert(term.as_str());
        }
        let (keys, canonical): (Vec<String>, Vec<String>) = by_key
            .into_iter()
            .map(|(k, t)| (k, t.to_string()))
            .unzip();
        let automaton = if keys.is_empty() {
            None
        } else {
            Some(
                AhoCorasickBuilder::new()
                    .match_kind(MatchKind::Standard)
                    .build(&keys)
                    .expect("automaton construction over a finite vocabulary"),
            )
        };
        Matcher {
            automaton,
            canonical,
            vocabulary,
        }
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    /// Non-overlapping occurrences sorted by start. Input that is not NFC is
    /// normalized first and offsets refer to the normalized text.
    pub fn find_occurrences(&self, text: &str) -> Vec<TermOccurrence> {
        let Some(automaton) = &self.automaton else {
            return Vec::new();
        };
        if text.is_empty() {
            return Vec::new();
        }
        let text: Cow<str> = if is_nfc(text) {
            Cow::Borrowed(text)
        } else {
            Cow::Owned(text.nfc().collect())
        };
        let chars: Vec<char> = text.chars().collect();
        let folded: String = chars.iter().copied().map(fold_char).collect();

        // byte offset in `folded` -> char offset
        let mut char_at_byte = vec![usize::MAX; folded.len() + 1];
        for (ci, (bi, _)) in folded.char_indices().enumerate() {
            char_at_byte[bi] = ci;
        }
        char_at_byte[folded.len()] = chars.len();

        let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
        for m in automaton.find_overlapping_iter(&folded) {
            let start = char_at_byte[m.start()];
            let end = char_at_byte[m.end()];
            debug_assert!(start != usize::MAX && end != usize::MAX);
            let before = start.checked_sub(1).map(|i| chars[i]);
            let after = chars.get(end).copied();
            if is_boundary(before) && is_boundary(after) {
                candidates.push((start, end, m.pattern().as_usize()));
            }
        }

        candidates.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
        let mut taken = vec![false; chars.len()];
        let mut selected = Vec::new();
        for (start, end, pattern) in candidates {
            if taken[start..end].iter().any(|&t| t) {
                continue;
            }
            taken[start..end].iter_mut().for_each(|t| *t = true);
            selected.push((start, end, pattern));
        }
        selected.sort_unstable_by_key(|&(start, _, _)| start);
        selected
            .into_iter()
            .map(|(start, end, pattern)| TermOccurrence {
                start,
                end,
                term: self.canonical[pattern].clone(),
                surface: chars[start..end].iter().collect(),
            })
            .collect()
    }
}

/// Distinct canonical terms among the occurrences.
pub fn occurrence_terms(occurrences: &[TermOccurrence]) -> BTreeSet<String> {
    occurrences.iter().map(|o| o.term.clone()).collect()
}

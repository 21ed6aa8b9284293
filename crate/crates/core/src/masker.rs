//! Selection of terms to mask so that every combination of surviving terms,
//! up to a maximum arity, matches either nobody or at least `k` individuals
//! in the index.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{PredictedSpan, Span, SpanSource};
use crate::error::{Error, Result};
use crate::gazetteer::TermOccurrence;
use crate::index::{intersect_count, InvertedIndex};
use crate::kg::PersonId;
use crate::normalize::char_len;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_MAX_ARITY: usize = 3;
pub const DEFAULT_PLACEHOLDER: &str = "*******";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Mask the member with the shortest posting list.
    #[default]
    Greedy,
    /// Mask a uniformly drawn member.
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(Strategy::Greedy),
            "random" => Ok(Strategy::Random),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskerConfig {
    pub k: usize,
    pub max_arity: usize,
    pub strategy: Strategy,
    /// Only consulted by [`Strategy::Random`].
    pub seed: u64,
}

impl Default for MaskerConfig {
    fn default() -> Self {
        MaskerConfig {
            k: DEFAULT_K,
            max_arity: DEFAULT_MAX_ARITY,
            strategy: Strategy::Greedy,
            seed: 0,
        }
    }
}

impl MaskerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!(
                "k must be at least 2 (k=1 gives no anonymity), got {}",
                self.k
            )));
        }
        if self.max_arity < 1 {
            return Err(Error::Config("max_arity must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rule {
    /// The term alone matches fewer than k individuals.
    Single,
    /// A combination of unmasked terms matches fewer than k individuals.
    Combination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub trigger: Vec<String>,
    pub count: usize,
    pub selected: String,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MaskResult {
    pub masked_terms: BTreeSet<String>,
    /// Decisions in the order they were taken.
    pub trace: Vec<Decision>,
    /// Seed of the random stream actually used, when the strategy is random.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Argmin of posting length; ties go to the lexicographically smallest term.
pub fn greedy_select<'a>(combination: &[&'a str], index: &InvertedIndex) -> &'a str {
    combination
        .iter()
        .copied()
        .min_by(|a, b| {
            index
                .postings_of(a)
                .len()
                .cmp(&index.postings_of(b).len())
                .then_with(|| a.cmp(b))
        })
        .expect("combination must not be empty")
}

/// Uniform choice; always consumes exactly one draw.
pub fn random_select<'a, R: Rng + ?Sized>(combination: &[&'a str], rng: &mut R) -> &'a str {
    assert!(!combination.is_empty(), "combination must not be empty");
    let i = rng.random_range(0..combination.len());
    combination[i]
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the per-document random stream, so results do not depend on the
/// order in which documents are processed.
pub fn stream_seed(seed: u64, stream: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// First combination (arity ascending, lexicographic within an arity) whose
/// intersection holds between 1 and k-1 individuals.
fn first_violation<'a>(
    remaining: &[&'a str],
    lists: &[&[PersonId]],
    k: usize,
    max_arity: usize,
) -> Option<(Vec<&'a str>, usize)> {
    let mut scratch: Vec<&[PersonId]> = Vec::with_capacity(max_arity);
    for arity in 2..=max_arity.min(remaining.len()) {
        for combo in (0..remaining.len()).combinations(arity) {
            scratch.clear();
            scratch.extend(combo.iter().map(|&i| lists[i]));
            if scratch.iter().any(|l| l.is_empty()) {
                continue;
            }
            let count = intersect_count(&scratch);
            if (1..k).contains(&count) {
                return Some((combo.iter().map(|&i| remaining[i]).collect(), count));
            }
        }
    }
    None
}

/// Terms to mask in one document, using `config.seed` directly as the
/// random stream seed.
pub fn terms_to_mask(
    terms: &BTreeSet<String>,
    index: &InvertedIndex,
    config: &MaskerConfig,
) -> Result<MaskResult> {
    terms_to_mask_seeded(terms, index, config, config.seed)
}

/// Like [`terms_to_mask`], with the random stream derived from the run seed
/// and a document id.
pub fn terms_to_mask_for_document(
    terms: &BTreeSet<String>,
    index: &InvertedIndex,
    config: &MaskerConfig,
    doc_id: &str,
) -> Result<MaskResult> {
    terms_to_mask_seeded(terms, index, config, stream_seed(config.seed, doc_id))
}

fn terms_to_mask_seeded(
    terms: &BTreeSet<String>,
    index: &InvertedIndex,
    config: &MaskerConfig,
    seed: u64,
) -> Result<MaskResult> {
    config.validate()?;
    let k = config.k;
    let mut rng = match config.strategy {
        Strategy::Random => Some(ChaCha8Rng::seed_from_u64(seed)),
        Strategy::Greedy => None,
    };
    let mut result = MaskResult {
        seed: rng.as_ref().map(|_| seed),
        ..MaskResult::default()
    };

    // Terms that identify fewer than k individuals on their own. Unknown
    // terms (no postings) are left alone.
    for term in terms {
        let count = index.postings_of(term).len();
        if (1..k).contains(&count) {
            result.masked_terms.insert(term.clone());
            result.trace.push(Decision {
                trigger: vec![term.clone()],
                count,
                selected: term.clone(),
                rule: Rule::Single,
            });
        }
    }

    // Each pass either finds no violating combination or masks one more
    // term, so there are at most |terms| passes.
    loop {
        if result.masked_terms.len() == terms.len() {
            break;
        }
        let remaining: Vec<&str> = terms
            .iter()
            .filter(|t| !result.masked_terms.contains(*t))
            .map(String::as_str)
            .collect();
        let lists: Vec<&[PersonId]> = remaining.iter().map(|t| index.postings_of(t)).collect();
        let Some((combination, count)) = first_violation(&remaining, &lists, k, config.max_arity)
        else {
            break;
        };
        let selected = match rng.as_mut() {
            Some(rng) => random_select(&combination, rng),
            None => greedy_select(&combination, index),
        }
        .to_string();
        result.masked_terms.insert(selected.clone());
        result.trace.push(Decision {
            trigger: combination.iter().map(|t| t.to_string()).collect(),
            count,
            selected,
            rule: Rule::Combination,
        });
    }
    Ok(result)
}

/// Every occurrence of a masked term becomes a predicted span.
pub fn project_mask(occurrences: &[TermOccurrence], mask: &MaskResult) -> Vec<PredictedSpan> {
    occurrences
        .iter()
        .filter(|o| mask.masked_terms.contains(&o.term))
        .map(|o| PredictedSpan {
            start: o.start,
            end: o.end,
            term: Some(o.term.clone()),
            source: SpanSource::GazetteerKanon,
        })
        .collect()
}

/// Replaces each span with `placeholder`, leaving the rest untouched.
pub fn redact_text<S: Span>(text: &str, spans: &[S], placeholder: &str) -> Result<String> {
    let mut ranges: Vec<(usize, usize)> = spans.iter().map(|s| (s.start(), s.end())).collect();
    ranges.sort_unstable();
    let len = char_len(text);
    for (i, &(start, end)) in ranges.iter().enumerate() {
        if start >= end || end > len {
            return Err(Error::Validation(format!(
                "span {start}..{end} out of bounds for text of length {len}"
            )));
        }
        if i > 0 && ranges[i - 1].1 > start {
            return Err(Error::Validation(format!(
                "span {start}..{end} overlaps span {}..{}",
                ranges[i - 1].0,
                ranges[i - 1].1
            )));
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut next = ranges.iter().peekable();
    let mut inside_until: Option<usize> = None;
    for (i, c) in text.chars().enumerate() {
        if let Some(end) = inside_until {
            if i < end {
                continue;
            }
            inside_until = None;
        }
        if let Some(&&(start, end)) = next.peek() {
            if i == start {
                out.push_str(placeholder);
                inside_until = Some(end);
                next.next();
                continue;
            }
        }
        out.push(c);
    }
    Ok(out)
}

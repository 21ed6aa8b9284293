//! Entity-level scoring of predicted masks against gold annotations.

mod agreement;

pub use agreement::{
    agreement_report, cohen_kappa, cohen_kappa_from_pairs, krippendorff_alpha,
    krippendorff_alpha_nominal, AgreementLevel, AgreementReport, AnnotatorLayer, LabeledSpan,
};

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, GoldSpan, IdentifierType, PredictedSpan, Span};
use crate::error::{Error, Result};
use crate::normalize::char_slice;

const DEFAULT_STRIP_CHARS: &str = ".,;:!?\"'()[]{}<>-\u{2013}\u{2014}\u{ab}\u{bb}\u{201c}\u{201d}\u{2018}\u{2019}";

const DEFAULT_FUNCTION_WORDS: [&str; 23] = [
    "a", "an", "the", "of", "in", "to", "for", "with", "on", "at", "from", "by", "about", "as",
    "into", "like", "through", "after", "over", "between", "out", "against", "during",
];

/// Which boundary differences are forgiven when matching a prediction to a
/// gold span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    #[serde(with = "char_set")]
    pub strip_chars: BTreeSet<char>,
    /// Compared lowercased.
    pub function_words: BTreeSet<String>,
    #[serde(default = "yes")]
    pub strip_whitespace: bool,
}

fn yes() -> bool {
    true
}

mod char_set {
    use std::collections::BTreeSet;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(set: &BTreeSet<char>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&set.iter().collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<char>, D::Error> {
        Ok(String::deserialize(d)?.chars().collect())
    }
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            strip_chars: DEFAULT_STRIP_CHARS.chars().collect(),
            function_words: DEFAULT_FUNCTION_WORDS.iter().map(|w| w.to_string()).collect(),
            strip_whitespace: true,
        }
    }
}

impl ToleranceConfig {
    /// No tolerance: only identical spans match.
    pub fn exact() -> Self {
        ToleranceConfig {
            strip_chars: BTreeSet::new(),
            function_words: BTreeSet::new(),
            strip_whitespace: false,
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let mut cfg: ToleranceConfig = serde_json::from_str(json)
            .map_err(|e| Error::Config(format!("tolerance config: {e}")))?;
        cfg.function_words = cfg.function_words.iter().map(|w| w.to_lowercase()).collect();
        Ok(cfg)
    }

    fn is_separator(&self, c: char) -> bool {
        self.strip_chars.contains(&c) || (self.strip_whitespace && c.is_whitespace())
    }

    fn is_function_word(&self, word: &str) -> bool {
        !word.is_empty() && self.function_words.contains(&word.to_lowercase())
    }

    /// Removes leading/trailing separators and function words until stable.
    fn core<'a>(&self, mut s: &'a str) -> &'a str {
        loop {
            let t = s.trim_matches(|c| self.is_separator(c));
            if let Some(i) = t.find(|c| self.is_separator(c)) {
                if self.is_function_word(&t[..i]) {
                    s = &t[i..];
                    continue;
                }
            }
            if let Some((i, c)) = t.char_indices().rev().find(|&(_, c)| self.is_separator(c)) {
                if self.is_function_word(&t[i + c.len_utf8()..]) {
                    s = &t[..i];
                    continue;
                }
            }
            return t;
        }
    }

    /// True if `s` contains nothing but separators and function words.
    fn is_ignorable(&self, s: &str) -> bool {
        s.split(|c| self.is_separator(c))
            .all(|w| w.is_empty() || self.is_function_word(w))
    }
}

/// Whether a prediction counts as masking a gold span.
///
/// Matches when the spans are identical; when they overlap and their
/// surfaces agree once separators and function words are stripped from the
/// edges; or when the prediction covers the gold span and whatever it covers
/// beyond it is only separators and function words.
pub fn spans_match<P: Span, G: Span>(pred: &P, gold: &G, text: &str, tol: &ToleranceConfig) -> bool {
    let (ps, pe, gs, ge) = (pred.start(), pred.end(), gold.start(), gold.end());
    if ps == gs && pe == ge {
        return true;
    }
    if !pred.overlaps(gold) {
        return false;
    }
    let (Some(p_text), Some(g_text)) = (char_slice(text, ps, pe), char_slice(text, gs, ge)) else {
        return false;
    };
    let (p_core, g_core) = (tol.core(p_text), tol.core(g_text));
    if !p_core.is_empty() && p_core == g_core {
        return true;
    }
    if ps <= gs && ge <= pe {
        let left = char_slice(text, ps, gs).unwrap_or_default();
        let right = char_slice(text, ge, pe).unwrap_or_default();
        return tol.is_ignorable(left) && tol.is_ignorable(right);
    }
    false
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp_direct: usize,
    pub fn_direct: usize,
    pub tp_quasi: usize,
    pub fn_quasi: usize,
}

impl Add for EvalCounts {
    type Output = EvalCounts;

    fn add(self, o: EvalCounts) -> EvalCounts {
        EvalCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tp_direct: self.tp_direct + o.tp_direct,
            fn_direct: self.fn_direct + o.fn_direct,
            tp_quasi: self.tp_quasi + o.tp_quasi,
            fn_quasi: self.fn_quasi + o.fn_quasi,
        }
    }
}

impl AddAssign for EvalCounts {
    fn add_assign(&mut self, o: EvalCounts) {
        *self = *self + o;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall_all: f64,
    pub recall_direct: f64,
    pub recall_quasi: f64,
    pub f1: f64,
    pub counts: EvalCounts,
}

impl EvalReport {
    /// Undefined ratios (empty denominators) are reported as 0.
    pub fn from_counts(counts: EvalCounts) -> Self {
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall_all = ratio(counts.tp, counts.tp + counts.fn_);
        let f1 = if precision + recall_all == 0.0 {
            0.0
        } else {
            2.0 * precision * recall_all / (precision + recall_all)
        };
        EvalReport {
            precision,
            recall_all,
            recall_direct: ratio(counts.tp_direct, counts.tp_direct + counts.fn_direct),
            recall_quasi: ratio(counts.tp_quasi, counts.tp_quasi + counts.fn_quasi),
            f1,
            counts,
        }
    }
}

/// Counts for one document. Predictions are visited in document order and
/// each is paired with the first still-unmatched maskable gold span it
/// matches; a prediction left unpaired is a false positive.
pub fn evaluate_document(
    text: &str,
    pred: &[PredictedSpan],
    gold: &[GoldSpan],
    tol: &ToleranceConfig,
) -> EvalCounts {
    let mut maskable: Vec<&GoldSpan> = gold
        .iter()
        .filter(|g| g.identifier_type.is_maskable())
        .collect();
    maskable.sort_by_key(|g| (g.start, g.end));
    let mut preds: Vec<&PredictedSpan> = pred.iter().collect();
    preds.sort_by_key(|p| (p.start, p.end));

    let mut matched = vec![false; maskable.len()];
    let mut counts = EvalCounts::default();
    for p in preds {
        let hit = maskable
            .iter()
            .enumerate()
            .find(|(i, g)| !matched[*i] && spans_match(p, **g, text, tol));
        match hit {
            Some((i, _)) => matched[i] = true,
            None => counts.fp += 1,
        }
    }
    for (g, hit) in maskable.iter().zip(matched) {
        match (g.identifier_type, hit) {
            (IdentifierType::Direct, true) => counts.tp_direct += 1,
            (IdentifierType::Direct, false) => counts.fn_direct += 1,
            (_, true) => counts.tp_quasi += 1,
            (_, false) => counts.fn_quasi += 1,
        }
    }
    counts.tp = counts.tp_direct + counts.tp_quasi;
    counts.fn_ = counts.fn_direct + counts.fn_quasi;
    counts
}

/// Scores predictions against a single gold layer. All three maps are keyed
/// by document id; every document with spans must have a text.
pub fn evaluate(
    pred: &BTreeMap<String, Vec<PredictedSpan>>,
    gold: &BTreeMap<String, Vec<GoldSpan>>,
    texts: &BTreeMap<String, String>,
    tol: &ToleranceConfig,
) -> Result<EvalReport> {
    let doc_ids: BTreeSet<&String> = pred.keys().chain(gold.keys()).collect();
    let mut total = EvalCounts::default();
    for id in doc_ids {
        let text = texts
            .get(id)
            .ok_or_else(|| Error::Input(format!("no text for document '{id}'")))?;
        let p = pred.get(id).map_or(&[][..], Vec::as_slice);
        let g = gold.get(id).map_or(&[][..], Vec::as_slice);
        total += evaluate_document(text, p, g, tol);
    }
    Ok(EvalReport::from_counts(total))
}

/// Gold spans of one layer per document. Without an explicit annotator,
/// documents must carry at most one annotator.
pub fn gold_layer(corpus: &Corpus, annotator: Option<&str>) -> Result<BTreeMap<String, Vec<GoldSpan>>> {
    let mut out = BTreeMap::new();
    for doc in &corpus.documents {
        let spans: Vec<GoldSpan> = match annotator {
            Some(a) => doc.gold.iter().filter(|g| g.annotator == a).cloned().collect(),
            None => {
                let annotators: BTreeSet<&str> =
                    doc.gold.iter().map(|g| g.annotator.as_str()).collect();
                if annotators.len() > 1 {
                    return Err(Error::Input(format!(
                        "document '{}' has {} gold annotators; choose one",
                        doc.doc_id,
                        annotators.len()
                    )));
                }
                doc.gold.clone()
            }
        };
        out.insert(doc.doc_id.clone(), spans);
    }
    Ok(out)
}

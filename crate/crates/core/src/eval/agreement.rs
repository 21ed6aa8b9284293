//! Inter-annotator agreement on identifier types: Cohen's kappa and
//! Krippendorff's alpha (nominal), at span and character level.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, IdentifierType};
use crate::error::{Error, Result};
use crate::normalize::char_len;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementLevel {
    /// Units are spans with identical boundaries.
    Span,
    /// Units are characters; uncovered characters are labeled NONE.
    Char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub label: IdentifierType,
}

/// One annotator's spans per covered document.
pub type AnnotatorLayer = BTreeMap<String, Vec<LabeledSpan>>;

/// `None` stands for an unannotated character.
type Label = Option<IdentifierType>;

/// Cohen's kappa over paired labels. NaN when there are no pairs; 1 when
/// chance agreement is already perfect.
pub fn cohen_kappa_from_pairs<L: Ord + Copy>(pairs: &[(L, L)]) -> f64 {
    if pairs.is_empty() {
        return f64::NAN;
    }
    let n = pairs.len() as f64;
    let mut left: BTreeMap<L, usize> = BTreeMap::new();
    let mut right: BTreeMap<L, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for &(a, b) in pairs {
        *left.entry(a).or_default() += 1;
        *right.entry(b).or_default() += 1;
        if a == b {
            agree += 1;
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = left
        .iter()
        .map(|(c, &na)| na as f64 * *right.get(c).unwrap_or(&0) as f64)
        .sum::<f64>()
        / (n * n);
    if p_e == 1.0 {
        return 1.0;
    }
    (p_o - p_e) / (1.0 - p_e)
}

/// Nominal Krippendorff's alpha. Each unit lists the values it received;
/// units with fewer than two values are not pairable and are skipped.
/// NaN when nothing is pairable; 1 when expected disagreement is zero.
pub fn krippendorff_alpha_nominal<L: Ord + Copy>(units: &[Vec<L>]) -> f64 {
    // coincidence matrix
    let mut o: BTreeMap<(L, L), f64> = BTreeMap::new();
    for values in units {
        let m = values.len();
        if m < 2 {
            continue;
        }
        let w = 1.0 / (m as f64 - 1.0);
        for (i, &a) in values.iter().enumerate() {
            for (j, &b) in values.iter().enumerate() {
                if i != j {
                    *o.entry((a, b)).or_default() += w;
                }
            }
        }
    }
    let mut n_c: BTreeMap<L, f64> = BTreeMap::new();
    for (&(c, _), &v) in &o {
        *n_c.entry(c).or_default() += v;
    }
    let n: f64 = n_c.values().sum();
    if n == 0.0 {
        return f64::NAN;
    }
    let observed: f64 = o.iter().filter(|((a, b), _)| a != b).map(|(_, v)| v).sum::<f64>() / n;
    let sum_sq: f64 = n_c.values().map(|v| v * v).sum();
    let expected = (n * n - sum_sq) / (n * (n - 1.0));
    if expected == 0.0 {
        return 1.0;
    }
    1.0 - observed / expected
}

fn char_labels(spans: &[LabeledSpan], len: usize) -> Vec<Label> {
    let mut labels = vec![None; len];
    for s in spans {
        for l in labels.iter_mut().take(s.end.min(len)).skip(s.start) {
            *l = Some(s.label);
        }
    }
    labels
}

fn text_len(texts: &BTreeMap<String, String>, doc: &str) -> Result<usize> {
    texts
        .get(doc)
        .map(|t| char_len(t))
        .ok_or_else(|| Error::Input(format!("no text for document '{doc}'")))
}

/// Kappa between two annotators over the documents both cover.
pub fn cohen_kappa(
    a: &AnnotatorLayer,
    b: &AnnotatorLayer,
    level: AgreementLevel,
    texts: &BTreeMap<String, String>,
) -> Result<f64> {
    let mut pairs: Vec<(Label, Label)> = Vec::new();
    for (doc, a_spans) in a {
        let Some(b_spans) = b.get(doc) else { continue };
        match level {
            AgreementLevel::Span => {
                let b_by_bounds: BTreeMap<(usize, usize), IdentifierType> =
                    b_spans.iter().map(|s| ((s.start, s.end), s.label)).collect();
                for s in a_spans {
                    if let Some(&lb) = b_by_bounds.get(&(s.start, s.end)) {
                        pairs.push((Some(s.label), Some(lb)));
                    }
                }
            }
            AgreementLevel::Char => {
                let len = text_len(texts, doc)?;
                let la = char_labels(a_spans, len);
                let lb = char_labels(b_spans, len);
                pairs.extend(la.into_iter().zip(lb));
            }
        }
    }
    Ok(cohen_kappa_from_pairs(&pairs))
}

/// Alpha across any number of annotators; a document contributes the
/// annotators that cover it.
pub fn krippendorff_alpha(
    layers: &[&AnnotatorLayer],
    level: AgreementLevel,
    texts: &BTreeMap<String, String>,
) -> Result<f64> {
    let docs: BTreeSet<&String> = layers.iter().flat_map(|l| l.keys()).collect();
    let mut units: Vec<Vec<Label>> = Vec::new();
    for doc in docs {
        let covering: Vec<&Vec<LabeledSpan>> = layers.iter().filter_map(|l| l.get(doc)).collect();
        if covering.len() < 2 {
            continue;
        }
        match level {
            AgreementLevel::Span => {
                let mut by_bounds: BTreeMap<(usize, usize), Vec<Label>> = BTreeMap::new();
                for spans in &covering {
                    for s in *spans {
                        by_bounds.entry((s.start, s.end)).or_default().push(Some(s.label));
                    }
                }
                units.extend(by_bounds.into_values());
            }
            AgreementLevel::Char => {
                let len = text_len(texts, doc)?;
                let per_annotator: Vec<Vec<Label>> =
                    covering.iter().map(|s| char_labels(s, len)).collect();
                for i in 0..len {
                    units.push(per_annotator.iter().map(|l| l[i]).collect());
                }
            }
        }
    }
    Ok(krippendorff_alpha_nominal(&units))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub annotators: Vec<String>,
    /// Mean over annotator pairs when there are more than two annotators.
    pub kappa_span: f64,
    pub kappa_char: f64,
    pub alpha_span: f64,
    pub alpha_char: f64,
}

/// Agreement among the gold annotators of a corpus. An annotator covers a
/// document when they have at least one gold span in it.
pub fn agreement_report(corpus: &Corpus) -> Result<AgreementReport> {
    let mut layers: BTreeMap<String, AnnotatorLayer> = BTreeMap::new();
    let mut texts = BTreeMap::new();
    for doc in &corpus.documents {
        texts.insert(doc.doc_id.clone(), doc.text.clone());
        for g in &doc.gold {
            layers
                .entry(g.annotator.clone())
                .or_default()
                .entry(doc.doc_id.clone())
                .or_default()
                .push(LabeledSpan {
                    start: g.start,
                    end: g.end,
                    label: g.identifier_type,
                });
        }
    }
    if layers.len() < 2 {
        return Err(Error::Input(format!(
            "agreement needs at least two annotators, found {}",
            layers.len()
        )));
    }
    let names: Vec<String> = layers.keys().cloned().collect();
    let refs: Vec<&AnnotatorLayer> = layers.values().collect();

    let mean_kappa = |level| -> Result<f64> {
        let mut values = Vec::new();
        for i in 0..refs.len() {
            for j in i + 1..refs.len() {
                values.push(cohen_kappa(refs[i], refs[j], level, &texts)?);
            }
        }
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    };
    Ok(AgreementReport {
        annotators: names,
        kappa_span: mean_kappa(AgreementLevel::Span)?,
        kappa_char: mean_kappa(AgreementLevel::Char)?,
        alpha_span: krippendorff_alpha(&refs, AgreementLevel::Span, &texts)?,
        alpha_char: krippendorff_alpha(&refs, AgreementLevel::Char, &texts)?,
    })
}

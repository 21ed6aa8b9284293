//! Synthetic knowledge graphs and documents for benchmarks and randomized
//! tests. Posting lengths are skewed toward short lists, as in real
//! biographical data where most terms describe few people.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::index::InvertedIndex;
use crate::kg::{KgRecord, PersonId};

pub fn term_name(i: usize) -> String {
    format!("term{i:06}")
}

/// Length in `min..=max`, cubic skew toward `min`.
fn skewed_len<R: Rng + ?Sized>(rng: &mut R, min: usize, max: usize) -> usize {
    let u: f64 = rng.random();
    let span = (max - min + 1) as f64;
    (min + (span * u * u * u) as usize).min(max)
}

/// Index over `persons` individuals and `terms` terms whose posting
/// lengths lie in `min_len..=max_len`.
pub fn synthetic_index<R: Rng + ?Sized>(
    rng: &mut R,
    persons: usize,
    terms: usize,
    min_len: usize,
    max_len: usize,
) -> InvertedIndex {
    let max_len = max_len.min(persons);
    let ids: Vec<PersonId> = (0..persons as PersonId).collect();
    let postings = (0..terms).map(|t| {
        let len = skewed_len(rng, min_len, max_len);
        let chosen: Vec<PersonId> = ids.choose_multiple(rng, len).copied().collect();
        (term_name(t), chosen)
    });
    InvertedIndex::from_postings(postings)
}

/// `persons` records with `terms_per_person` distinct terms each, drawn from
/// a vocabulary of `vocabulary` terms with a power-law bias.
pub fn synthetic_records<R: Rng + ?Sized>(
    rng: &mut R,
    persons: usize,
    terms_per_person: usize,
    vocabulary: usize,
) -> Vec<KgRecord> {
    (0..persons)
        .map(|p| {
            let mut terms = BTreeSet::new();
            while terms.len() < terms_per_person.min(vocabulary) {
                let u: f64 = rng.random();
                let i = ((vocabulary as f64) * u * u) as usize;
                terms.insert(term_name(i.min(vocabulary - 1)));
            }
            KgRecord {
                person_id: p as PersonId,
                terms,
            }
        })
        .collect()
}

/// Between `min` and `max` distinct terms of the index.
pub fn sample_terms<R: Rng + ?Sized>(
    rng: &mut R,
    index: &InvertedIndex,
    min: usize,
    max: usize,
) -> BTreeSet<String> {
    let vocab: Vec<&str> = index.terms().collect();
    let n = rng.random_range(min..=max).min(vocab.len());
    vocab
        .choose_multiple(rng, n)
        .map(|t| t.to_string())
        .collect()
}

/// Text mentioning the given terms between filler words.
pub fn document_text<R: Rng + ?Sized>(rng: &mut R, terms: &BTreeSet<String>) -> String {
    const FILLER: [&str; 8] = ["was", "born", "in", "and", "later", "lived", "with", "the"];
    let mut words: Vec<String> = terms.iter().cloned().collect();
    for _ in 0..terms.len() * 2 {
        words.push(FILLER.choose(rng).expect("non-empty").to_string());
    }
    for i in (1..words.len()).rev() {
        let j = rng.random_range(0..=i);
        words.swap(i, j);
    }
    words.join(" ") + "."
}

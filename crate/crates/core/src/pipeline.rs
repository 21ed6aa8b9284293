//! Document annotation: gazetteer lookup, term selection, span projection.

use serde::Serialize;

use crate::corpus::{Corpus, Document, PredictedSpan};
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::gazetteer::{occurrence_terms, Matcher};
use crate::index::InvertedIndex;
use crate::masker::{project_mask, terms_to_mask_for_document, MaskResult, MaskerConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentAnnotation {
    pub doc_id: String,
    pub spans: Vec<PredictedSpan>,
    pub mask: MaskResult,
}

pub struct Annotator<'a> {
    index: &'a InvertedIndex,
    matcher: &'a Matcher,
    config: MaskerConfig,
}

impl<'a> Annotator<'a> {
    pub fn new(index: &'a InvertedIndex, matcher: &'a Matcher, config: MaskerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Annotator {
            index,
            matcher,
            config,
        })
    }

    pub fn annotate_document(&self, doc: &Document) -> Result<DocumentAnnotation> {
        let occurrences = self.matcher.find_occurrences(&doc.text);
        let terms = occurrence_terms(&occurrences);
        let mask = terms_to_mask_for_document(&terms, self.index, &self.config, &doc.doc_id)?;
        Ok(DocumentAnnotation {
            doc_id: doc.doc_id.clone(),
            spans: project_mask(&occurrences, &mask),
            mask,
        })
    }

    /// Annotations in input order, whatever the execution mode.
    pub fn annotate_all(&self, docs: &[Document], exec: Execution) -> Result<Vec<DocumentAnnotation>> {
        exec::map(docs, exec, |d| self.annotate_document(d))
            .into_iter()
            .collect()
    }

    /// Copy of `corpus` with `pred` replaced by the annotator's spans.
    pub fn annotate_corpus(
        &self,
        corpus: &Corpus,
        exec: Execution,
    ) -> Result<(Corpus, Vec<DocumentAnnotation>)> {
        let annotations = self.annotate_all(&corpus.documents, exec)?;
        let documents = corpus
            .documents
            .iter()
            .zip(&annotations)
            .map(|(doc, ann)| Document {
                pred: ann.spans.clone(),
                ..doc.clone()
            })
            .collect();
        Ok((Corpus { documents }, annotations))
    }
}

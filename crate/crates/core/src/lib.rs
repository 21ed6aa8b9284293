//! Distant-supervision labeling of text spans to mask, driven by
//! k-anonymity over a background knowledge graph.
//!
//! The pipeline: knowledge-graph records are turned into an
//! [`InvertedIndex`](index::InvertedIndex) from terms to individuals; a
//! [`Matcher`](gazetteer::Matcher) finds index terms in documents;
//! [`terms_to_mask`](masker::terms_to_mask) picks the terms whose presence,
//! alone or in combination, narrows the candidates to fewer than `k`
//! individuals; the decisions are projected back onto character spans.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod exec;
pub mod gazetteer;
pub mod index;
pub mod kg;
pub mod masker;
pub mod normalize;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

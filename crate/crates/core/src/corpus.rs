//! Documents, standoff annotations, and the corpus-JSONL / BIO-TSV formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use unicode_normalization::is_nfc;

use crate::error::{Error, Result};
use crate::normalize::char_len;

/// Half-open character range.
pub trait Span {
    fn start(&self) -> usize;
    fn end(&self) -> usize;

    fn overlaps<S: Span + ?Sized>(&self, other: &S) -> bool {
        self.start() < other.end() && other.start() < self.end()
    }
}

impl Span for (usize, usize) {
    fn start(&self) -> usize {
        self.0
    }
    fn end(&self) -> usize {
        self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    Person,
    Loc,
    Org,
    Dem,
    Datetime,
    Quantity,
    Misc,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::Person,
        EntityType::Loc,
        EntityType::Org,
        EntityType::Dem,
        EntityType::Datetime,
        EntityType::Quantity,
        EntityType::Misc,
    ];
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityType::Person => "PERSON",
            EntityType::Loc => "LOC",
            EntityType::Org => "ORG",
            EntityType::Dem => "DEM",
            EntityType::Datetime => "DATETIME",
            EntityType::Quantity => "QUANTITY",
            EntityType::Misc => "MISC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IdentifierType {
    Direct,
    Quasi,
    NoMask,
}

impl IdentifierType {
    pub const ALL: [IdentifierType; 3] = [
        IdentifierType::Direct,
        IdentifierType::Quasi,
        IdentifierType::NoMask,
    ];

    pub fn is_maskable(self) -> bool {
        matches!(self, IdentifierType::Direct | IdentifierType::Quasi)
    }
}

impl fmt::Display for IdentifierType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdentifierType::Direct => "DIRECT",
            IdentifierType::Quasi => "QUASI",
            IdentifierType::NoMask => "NO_MASK",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoldSpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: EntityType,
    pub identifier_type: IdentifierType,
    pub annotator: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpanSource {
    GazetteerKanon,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredictedSpan {
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    pub source: SpanSource,
}

impl Span for GoldSpan {
    fn start(&self) -> usize {
        self.start
    }
    fn end(&self) -> usize {
        self.end
    }
}

impl Span for PredictedSpan {
    fn start(&self) -> usize {
        self.start
    }
    fn end(&self) -> usize {
        self.end
    }
}

impl Span for crate::gazetteer::TermOccurrence {
    fn start(&self) -> usize {
        self.start
    }
    fn end(&self) -> usize {
        self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold: Vec<GoldSpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pred: Vec<PredictedSpan>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
            person_id: None,
            gold: Vec::new(),
            pred: Vec::new(),
        }
    }

    /// Gold spans grouped by annotator.
    pub fn gold_by_annotator(&self) -> BTreeMap<&str, Vec<&GoldSpan>> {
        let mut out: BTreeMap<&str, Vec<&GoldSpan>> = BTreeMap::new();
        for g in &self.gold {
            out.entry(g.annotator.as_str()).or_default().push(g);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.doc_id;
        if !is_nfc(&self.text) {
            return Err(Error::Validation(format!(
                "document '{id}': text is not NFC-normalized"
            )));
        }
        let len = char_len(&self.text);
        let check_bounds = |start: usize, end: usize, what: &str| {
            if start >= end || end > len {
                Err(Error::Validation(format!(
                    "document '{id}': {what} span {start}..{end} out of bounds (text length {len})"
                )))
            } else {
                Ok(())
            }
        };
        for g in &self.gold {
            check_bounds(g.start, g.end, "gold")?;
        }
        for p in &self.pred {
            check_bounds(p.start, p.end, "predicted")?;
        }
        for (annotator, spans) in self.gold_by_annotator() {
            if let Some((a, b)) = first_overlap(&spans) {
                return Err(Error::Validation(format!(
                    "document '{id}': overlapping gold spans {a:?} and {b:?} from annotator '{annotator}'"
                )));
            }
        }
        let preds: Vec<&PredictedSpan> = self.pred.iter().collect();
        if let Some((a, b)) = first_overlap(&preds) {
            return Err(Error::Validation(format!(
                "document '{id}': overlapping predicted spans {a:?} and {b:?}"
            )));
        }
        Ok(())
    }
}

fn first_overlap<S: Span>(spans: &[&S]) -> Option<((usize, usize), (usize, usize))> {
    let mut ranges: Vec<(usize, usize)> = spans.iter().map(|s| (s.start(), s.end())).collect();
    ranges.sort_unstable();
    ranges
        .windows(2)
        .find(|w| w[0].1 > w[1].0)
        .map(|w| (w[0], w[1]))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let corpus = Corpus { documents };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate doc_id '{}'",
                    doc.doc_id
                )));
            }
            doc.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }
}

/// Reads corpus-JSONL, one document per non-blank line, and validates it.
pub fn read_corpus<R: BufRead>(source: R) -> Result<Corpus> {
    let mut documents = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        documents.push(doc);
    }
    Corpus::new(documents)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut sink: W) -> Result<()> {
    for doc in &corpus.documents {
        let line = serde_json::to_string(doc).map_err(std::io::Error::other)?;
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub start: usize,
    pub end: usize,
    pub text: &'a str,
}

/// Maximal runs of alphanumerics; every other non-whitespace character is a
/// token of its own.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    // (char start, byte start) of the current alphanumeric run
    let mut run: Option<(usize, usize)> = None;
    let mut chars = 0;
    for (ci, (bi, c)) in text.char_indices().enumerate() {
        chars = ci + 1;
        if c.is_alphanumeric() {
            run.get_or_insert((ci, bi));
            continue;
        }
        if let Some((cs, bs)) = run.take() {
            tokens.push(Token {
                start: cs,
                end: ci,
                text: &text[bs..bi],
            });
        }
        if !c.is_whitespace() {
            tokens.push(Token {
                start: ci,
                end: ci + 1,
                text: &text[bi..bi + c.len_utf8()],
            });
        }
    }
    if let Some((cs, bs)) = run {
        tokens.push(Token {
            start: cs,
            end: chars,
            text: &text[bs..],
        });
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BioTag {
    Outside,
    Begin,
    Inside,
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BioTag::Outside => "O",
            BioTag::Begin => "B-MASK",
            BioTag::Inside => "I-MASK",
        })
    }
}

/// Tags each token; a token overlapping any part of a span is masked whole.
pub fn bio_tags<'a, S: Span>(text: &'a str, spans: &[S]) -> Vec<(Token<'a>, BioTag)> {
    let mut ranges: Vec<(usize, usize)> = spans.iter().map(|s| (s.start(), s.end())).collect();
    ranges.sort_unstable();
    let mut previous_span: Option<usize> = None;
    tokenize(text)
        .into_iter()
        .map(|tok| {
            let hit = ranges.iter().position(|r| r.overlaps(&(tok.start, tok.end)));
            let tag = match hit {
                None => BioTag::Outside,
                Some(i) if previous_span == Some(i) => BioTag::Inside,
                Some(_) => BioTag::Begin,
            };
            previous_span = hit;
            (tok, tag)
        })
        .collect()
}

/// Writes `token<TAB>tag` lines, a blank line after each document.
pub fn export_bio<W: Write>(documents: &[Document], mut sink: W) -> Result<()> {
    for doc in documents {
        for (tok, tag) in bio_tags(&doc.text, &doc.pred) {
            writeln!(sink, "{}\t{}", tok.text, tag)?;
        }
        writeln!(sink)?;
    }
    sink.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub gold_spans: usize,
    pub entity_mentions: BTreeMap<EntityType, usize>,
    pub identifier_counts: BTreeMap<IdentifierType, usize>,
}

impl CorpusStats {
    /// Share of gold spans with the given identifier type, in percent.
    pub fn identifier_percentage(&self, kind: IdentifierType) -> f64 {
        if self.gold_spans == 0 {
            return 0.0;
        }
        100.0 * *self.identifier_counts.get(&kind).unwrap_or(&0) as f64 / self.gold_spans as f64
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        documents: corpus.len(),
        ..Default::default()
    };
    for g in corpus.documents.iter().flat_map(|d| &d.gold) {
        stats.gold_spans += 1;
        *stats.entity_mentions.entry(g.entity_type).or_default() += 1;
        *stats.identifier_counts.entry(g.identifier_type).or_default() += 1;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold(start: usize, end: usize, id: IdentifierType, annotator: &str) -> GoldSpan {
        GoldSpan {
            start,
            end,
            entity_type: EntityType::Person,
            identifier_type: id,
            annotator: annotator.into(),
        }
    }

    fn pred(start: usize, end: usize) -> PredictedSpan {
        PredictedSpan {
            start,
            end,
            term: None,
            source: SpanSource::External,
        }
    }

    #[test]
    fn jsonl_round_trip_and_field_order() {
        let mut doc = Document::new("d1", "Jenn Mierau is from Winnipeg.");
        doc.person_id = Some(42);
        doc.gold.push(gold(0, 11, IdentifierType::Direct, "a1"));
        doc.pred.push(PredictedSpan {
            start: 20,
            end: 28,
            term: Some("Winnipeg".into()),
            source: SpanSource::GazetteerKanon,
        });
        let corpus = Corpus::new(vec![doc, Document::new("d2", "plain")]).unwrap();
        let mut buf = Vec::new();
        write_corpus(&corpus, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            r#"{"doc_id":"d1","text":"Jenn Mierau is from Winnipeg.","person_id":42,"gold":[{"start":0,"end":11,"entity_type":"PERSON","identifier_type":"DIRECT","annotator":"a1"}],"pred":[{"start":20,"end":28,"term":"Winnipeg","source":"GAZETTEER_KANON"}]}"#
        ));
        assert!(text.ends_with("{\"doc_id\":\"d2\",\"text\":\"plain\"}\n"));
        assert_eq!(read_corpus(&buf[..]).unwrap(), corpus);
    }

    #[test]
    fn out_of_bounds_span_names_document() {
        let line = r#"{"doc_id":"bio-17","text":"short","gold":[{"start":0,"end":9,"entity_type":"LOC","identifier_type":"QUASI","annotator":"a"}]}"#;
        let err = read_corpus(line.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("bio-17"), "{err}");
    }

    #[test]
    fn overlapping_gold_per_annotator() {
        let mut doc = Document::new("d", "abcdefghij");
        doc.gold.push(gold(0, 5, IdentifierType::Direct, "a"));
        doc.gold.push(gold(3, 8, IdentifierType::Quasi, "b"));
        assert!(doc.validate().is_ok(), "different annotators may overlap");
        doc.gold.push(gold(4, 6, IdentifierType::Quasi, "a"));
        assert!(matches!(doc.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn overlapping_predictions_rejected() {
        let mut doc = Document::new("d", "abcdefghij");
        doc.pred = vec![pred(0, 5), pred(4, 6)];
        assert!(doc.validate().is_err());
    }

    #[test]
    fn duplicate_doc_ids_rejected() {
        let c = Corpus::new(vec![Document::new("x", "a"), Document::new("x", "b")]);
        assert!(c.is_err());
    }

    #[test]
    fn missing_person_id_accepted() {
        let c = read_corpus(r#"{"doc_id":"a","text":"t"}"#.as_bytes()).unwrap();
        assert_eq!(c.documents[0].person_id, None);
    }

    #[test]
    fn tokenizer() {
        let toks: Vec<&str> = tokenize("Jenn's  band (2019)!").iter().map(|t| t.text).collect();
        assert_eq!(toks, vec!["Jenn", "'", "s", "band", "(", "2019", ")", "!"]);
        let t = tokenize("née à");
        assert_eq!((t[1].start, t[1].end), (4, 5));
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn bio_example() {
        let doc = Document {
            pred: vec![pred(0, 11)],
            ..Document::new("d", "Jenn Mierau is")
        };
        let mut buf = Vec::new();
        export_bio(&[doc], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "Jenn\tB-MASK\nMierau\tI-MASK\nis\tO\n\n"
        );
    }

    #[test]
    fn bio_partial_token_masks_whole_token() {
        // span covers "Mie" only
        let tags: Vec<String> = bio_tags("Jenn Mierau is", &[(5usize, 8usize)])
            .into_iter()
            .map(|(t, tag)| format!("{}:{tag}", t.text))
            .collect();
        assert_eq!(tags, vec!["Jenn:O", "Mierau:B-MASK", "is:O"]);
    }

    #[test]
    fn bio_adjacent_spans_restart() {
        let tags: Vec<BioTag> = bio_tags("a b c", &[(0usize, 1usize), (2, 5)])
            .into_iter()
            .map(|(_, t)| t)
            .collect();
        assert_eq!(tags, vec![BioTag::Begin, BioTag::Begin, BioTag::Inside]);
        let none: Vec<BioTag> = bio_tags::<(usize, usize)>("a b", &[])
            .into_iter()
            .map(|(_, t)| t)
            .collect();
        assert_eq!(none, vec![BioTag::Outside, BioTag::Outside]);
    }

    #[test]
    fn stats_percentages() {
        let mut doc = Document::new("d", "x".repeat(20));
        let kinds = [
            (IdentifierType::Direct, 2),
            (IdentifierType::Quasi, 3),
            (IdentifierType::NoMask, 5),
        ];
        let mut pos = 0;
        for (kind, n) in kinds {
            for _ in 0..n {
                doc.gold.push(gold(pos, pos + 1, kind, "a"));
                pos += 2;
            }
        }
        let stats = corpus_stats(&Corpus::new(vec![doc]).unwrap());
        assert_eq!(stats.gold_spans, 10);
        assert_eq!(stats.identifier_percentage(IdentifierType::Direct), 20.0);
        assert_eq!(stats.identifier_percentage(IdentifierType::Quasi), 30.0);
        assert_eq!(stats.identifier_percentage(IdentifierType::NoMask), 50.0);
        let empty = corpus_stats(&Corpus::default());
        assert_eq!(empty.gold_spans, 0);
        assert_eq!(empty.identifier_percentage(IdentifierType::Direct), 0.0);
    }
}

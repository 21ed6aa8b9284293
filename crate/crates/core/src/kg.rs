//! Knowledge-graph ingestion: record parsing, term kinds, surface variants
//! and the frequent-word whitelist.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::normalize::normalize_term;

pub type PersonId = u32;

/// One individual and the terms publicly associated with them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KgRecord {
    pub person_id: PersonId,
    pub terms: BTreeSet<String>,
}

impl KgRecord {
    pub fn new<I, S>(person_id: PersonId, terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms = terms
            .into_iter()
            .map(|t| normalize_term(t.as_ref()))
            .filter(|t| !t.is_empty())
            .collect();
        KgRecord { person_id, terms }
    }
}

/// Result of parsing a KG-JSONL stream.
#[derive(Debug, Clone, Default)]
pub struct ParsedRecords {
    /// Merged records, ascending by person id.
    pub records: Vec<KgRecord>,
    /// Terms that were empty after normalization and dropped.
    pub dropped_terms: usize,
}

#[derive(Deserialize)]
struct RawRecord {
    id: i64,
    terms: Vec<String>,
}

/// Parses KG-JSONL (`{"id": int, "terms": [..]}` per line). Records sharing an
/// id are merged by term-set union.
pub fn parse_kg_records<R: BufRead>(reader: R) -> Result<ParsedRecords> {
    let mut merged: BTreeMap<PersonId, BTreeSet<String>> = BTreeMap::new();
    let mut dropped_terms = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.id < 0 {
            return Err(Error::Validation(format!(
                "line {line_no}: negative person id {}",
                raw.id
            )));
        }
        let id = PersonId::try_from(raw.id).map_err(|_| {
            Error::Validation(format!("line {line_no}: person id {} out of range", raw.id))
        })?;
        let entry = merged.entry(id).or_default();
        for term in raw.terms {
            let term = normalize_term(&term);
            if term.is_empty() {
                dropped_terms += 1;
            } else {
                entry.insert(term);
            }
        }
    }
    if dropped_terms > 0 {
        log::warn!("dropped {dropped_terms} empty term(s) from knowledge graph input");
    }
    let records = merged
        .into_iter()
        .map(|(person_id, terms)| KgRecord { person_id, terms })
        .collect();
    Ok(ParsedRecords {
        records,
        dropped_terms,
    })
}

/// Frequent words that never need masking. Membership is tested on the
/// normalized, lowercased form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Whitelist {
    words: BTreeSet<String>,
}

impl Whitelist {
    pub const DEFAULT_WORDS: [&'static str; 4] = ["born", "age", "man", "woman"];

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| Self::key(w.as_ref()))
            .filter(|w| !w.is_empty())
            .collect();
        Whitelist { words }
    }

    /// One word per line; `#` starts a comment.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("");
            if !content.trim().is_empty() {
                words.push(content.to_string());
            }
        }
        Ok(Self::from_words(words))
    }

    fn key(word: &str) -> String {
        normalize_term(word).to_lowercase()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.words.contains(&Self::key(term))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Drops every term whose normalized form is whitelisted.
pub fn apply_whitelist(terms: &BTreeSet<String>, whitelist: &Whitelist) -> BTreeSet<String> {
    terms
        .iter()
        .filter(|t| !whitelist.contains(t))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermKind {
    Date,
    PersonName,
    Location,
    Nationality,
    Generic,
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TermKind::Date => "DATE",
            TermKind::PersonName => "PERSON_NAME",
            TermKind::Location => "LOCATION",
            TermKind::Nationality => "NATIONALITY",
            TermKind::Generic => "GENERIC",
        };
        f.write_str(s)
    }
}

const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct IsoDate {
    year: u32,
    month: u32,
    day: u32,
}

fn is_leap(year: u32) -> bool {
    (year.is_multiple_of(4) && !year.is_multiple_of(100)) || year.is_multiple_of(400)
}

fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

/// Matches the `YYYY-MM-DD` shape without checking the calendar.
fn looks_like_iso_date(term: &str) -> bool {
    let b = term.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

fn parse_iso_date(term: &str) -> Option<IsoDate> {
    if !looks_like_iso_date(term) {
        return None;
    }
    let year = term[0..4].parse().ok()?;
    let month = term[5..7].parse().ok()?;
    let day = term[8..10].parse().ok()?;
    if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
        return None;
    }
    Some(IsoDate { year, month, day })
}

fn date_variants(d: IsoDate) -> [String; 7] {
    let IsoDate { year, month, day } = d;
    let name = MONTHS[(month - 1) as usize];
    [
        format!("{year:04}-{month:02}-{day:02}"),
        format!("{day} {name} {year:04}"),
        format!("{name} {day}, {year:04}"),
        format!("{day:02}.{month:02}.{year:04}"),
        format!("{day:02}/{month:02}/{year:04}"),
        format!("{day} {name}"),
        format!("{year:04}"),
    ]
}

fn is_capitalized(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

/// Lookup tables that drive kind detection and variant expansion.
#[derive(Debug, Clone, Default)]
pub struct VariantRules {
    /// country and demonym both map to the other side of each pair.
    nationality: BTreeMap<String, BTreeSet<String>>,
    /// every member of an alias group maps to the whole group.
    locations: BTreeMap<String, BTreeSet<String>>,
}

fn read_tsv_pairs<R: BufRead>(reader: R, what: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), None) => {
                let (a, b) = (normalize_term(a), normalize_term(b));
                if a.is_empty() || b.is_empty() {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("{what}: empty column"),
                    });
                }
                pairs.push((a, b));
            }
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("{what}: expected two tab-separated columns"),
                })
            }
        }
    }
    Ok(pairs)
}

impl VariantRules {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_nationality(&mut self, country: &str, demonym: &str) {
        let (c, d) = (normalize_term(country), normalize_term(demonym));
        self.nationality
            .entry(c.clone())
            .or_default()
            .insert(d.clone());
        self.nationality.entry(d).or_default().insert(c);
    }

    pub fn add_location_alias(&mut self, canonical: &str, alias: &str) {
        let (c, a) = (normalize_term(canonical), normalize_term(alias));
        let mut group: BTreeSet<String> = [c.clone(), a.clone()].into();
        for key in [&c, &a] {
            if let Some(existing) = self.locations.get(key) {
                group.extend(existing.iter().cloned());
            }
        }
        for member in &group {
            self.locations.insert(member.clone(), group.clone());
        }
    }

    /// Loads `country<TAB>demonym` lines.
    pub fn load_nationalities<R: BufRead>(&mut self, reader: R) -> Result<()> {
        for (c, d) in read_tsv_pairs(reader, "nationality table")? {
            self.add_nationality(&c, &d);
        }
        Ok(())
    }

    /// Loads `canonical<TAB>alias` lines.
    pub fn load_location_aliases<R: BufRead>(&mut self, reader: R) -> Result<()> {
        for (c, a) in read_tsv_pairs(reader, "location alias table")? {
            self.add_location_alias(&c, &a);
        }
        Ok(())
    }

    pub fn detect_term_kind(&self, term: &str) -> TermKind {
        if looks_like_iso_date(term) {
            return TermKind::Date;
        }
        if self.nationality.contains_key(term) {
            return TermKind::Nationality;
        }
        if self.locations.contains_key(term) {
            return TermKind::Location;
        }
        let mut tokens = 0;
        for token in term.split_whitespace() {
            if !is_capitalized(token) {
                return TermKind::Generic;
            }
            tokens += 1;
        }
        if tokens >= 2 {
            TermKind::PersonName
        } else {
            TermKind::Generic
        }
    }

    /// All surface forms of `term`, including `term` itself.
    pub fn expand_variants(&self, term: &str, kind: TermKind) -> BTreeSet<String> {
        let term = normalize_term(term);
        let mut out = BTreeSet::new();
        match kind {
            TermKind::Date => match parse_iso_date(&term) {
                Some(d) => out.extend(date_variants(d)),
                None => log::warn!("'{term}' is not a valid calendar date; no variants"),
            },
            TermKind::PersonName => {
                let tokens: Vec<&str> = term.split_whitespace().collect();
                if let [first, rest @ .., last] = tokens.as_slice() {
                    if let Some(initial) = first.chars().next() {
                        out.insert(format!("{initial}. {last}"));
                    }
                    let mut given = vec![*first];
                    given.extend_from_slice(rest);
                    out.insert(format!("{last}, {}", given.join(" ")));
                    if rest.is_empty() {
                        out.insert((*last).to_string());
                    }
                }
            }
            TermKind::Nationality => {
                if let Some(others) = self.nationality.get(&term) {
                    out.extend(others.iter().cloned());
                }
            }
            TermKind::Location => {
                if let Some(group) = self.locations.get(&term) {
                    out.extend(group.iter().cloned());
                }
            }
            TermKind::Generic => {}
        }
        out.insert(term);
        out
    }

    /// Kind detection followed by expansion.
    pub fn variants_of(&self, term: &str) -> BTreeSet<String> {
        self.expand_variants(term, self.detect_term_kind(term))
    }
}

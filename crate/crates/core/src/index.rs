//! Inverted index from terms to the sorted ids of the individuals they
//! describe, with Boolean-retrieval intersection and k-anonymity queries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::kg::{apply_whitelist, KgRecord, PersonId, VariantRules, Whitelist};
use crate::normalize::normalize_term;

/// Strictly increasing list of person ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PostingList(Vec<PersonId>);

impl PostingList {
    /// Sorts and deduplicates.
    pub fn from_unsorted(mut ids: Vec<PersonId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        PostingList(ids)
    }

    /// Wraps ids that are already strictly increasing.
    pub fn from_sorted(ids: Vec<PersonId>) -> Result<Self> {
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "posting list is not strictly increasing".into(),
            ));
        }
        Ok(PostingList(ids))
    }

    pub fn empty() -> Self {
        PostingList(Vec::new())
    }

    pub fn ids(&self) -> &[PersonId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<PersonId> {
        self.0
    }
}

impl AsRef<[PersonId]> for PostingList {
    fn as_ref(&self) -> &[PersonId] {
        &self.0
    }
}

/// First index `>= from` whose value is `>= target`, found by exponential
/// probing followed by binary search.
fn gallop(list: &[PersonId], from: usize, target: PersonId) -> usize {
    if from >= list.len() || list[from] >= target {
        return from;
    }
    let mut lo = from;
    let mut step = 1;
    let mut hi = from + step;
    while hi < list.len() && list[hi] < target {
        lo = hi;
        step <<= 1;
        hi = from + step;
    }
    let hi = hi.min(list.len());
    // list[lo] < target and (hi == len or list[hi] >= target)
    lo + 1 + list[lo + 1..hi].partition_point(|&x| x < target)
}

fn intersect_into(candidates: &mut Vec<PersonId>, other: &[PersonId]) {
    let mut cursor = 0;
    candidates.retain(|&id| {
        cursor = gallop(other, cursor, id);
        cursor < other.len() && other[cursor] == id
    });
}

/// Intersection of sorted id lists. Lists are processed smallest first and
/// the larger ones are probed by galloping search, so the cost is driven by
/// the shortest list.
pub fn intersect<L: AsRef<[PersonId]>>(lists: &[L]) -> PostingList {
    let mut order: Vec<&[PersonId]> = lists.iter().map(AsRef::as_ref).collect();
    order.sort_by_key(|l| l.len());
    let Some((first, rest)) = order.split_first() else {
        return PostingList::empty();
    };
    let mut acc = first.to_vec();
    for other in rest {
        if acc.is_empty() {
            break;
        }
        intersect_into(&mut acc, other);
    }
    PostingList(acc)
}

/// Size of the intersection without materializing more than the shortest list.
pub fn intersect_count(lists: &[&[PersonId]]) -> usize {
    match lists {
        [] => 0,
        [only] => only.len(),
        _ => intersect(lists).len(),
    }
}

/// True iff `count` does not single out a group of 1..k-1 individuals.
/// A count of zero is safe: no individual in the background knowledge
/// matches, so there is nobody to re-identify.
pub fn count_is_k_anonymous(count: usize, k: usize) -> Result<bool> {
    if k < 2 {
        return Err(Error::Config(format!(
            "k must be at least 2 (k=1 gives no anonymity), got {k}"
        )));
    }
    Ok(!(1..k).contains(&count))
}

pub const INDEX_MAGIC: &str = "KAIX1";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, PostingList>,
    num_persons: usize,
}

impl InvertedIndex {
    /// Builds the index. Each record's terms are optionally expanded into
    /// surface variants, then whitelisted terms are removed. The result does
    /// not depend on record order.
    pub fn build(
        records: &[KgRecord],
        whitelist: &Whitelist,
        variants: Option<&VariantRules>,
    ) -> Self {
        let mut lists: HashMap<String, Vec<PersonId>> = HashMap::new();
        let mut persons = BTreeSet::new();
        for record in records {
            persons.insert(record.person_id);
            let terms: BTreeSet<String> = match variants {
                Some(rules) => record
                    .terms
                    .iter()
                    .flat_map(|t| rules.variants_of(t))
                    .collect(),
                None => record.terms.iter().map(|t| normalize_term(t)).collect(),
            };
            for term in apply_whitelist(&terms, whitelist) {
                if term.is_empty() {
                    continue;
                }
                lists.entry(term).or_default().push(record.person_id);
            }
        }
        let postings = lists
            .into_iter()
            .map(|(t, ids)| (t, PostingList::from_unsorted(ids)))
            .collect();
        InvertedIndex {
            postings,
            num_persons: persons.len(),
        }
    }

    pub fn num_persons(&self) -> usize {
        self.num_persons
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.postings.is_empty()
    }

    /// Exact lookup; unknown terms yield an empty slice.
    pub fn postings_of(&self, term: &str) -> &[PersonId] {
        self.postings.get(term).map_or(&[], PostingList::ids)
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.postings.contains_key(term)
    }

    /// Terms in lexicographic (code point) order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PostingList)> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p))
    }

    /// Individuals associated with every term in `terms`.
    pub fn matching<S: AsRef<str>>(&self, terms: &[S]) -> PostingList {
        let lists: Vec<&[PersonId]> = terms.iter().map(|t| self.postings_of(t.as_ref())).collect();
        intersect(&lists)
    }

    /// Number of individuals associated with every term; 0 as soon as one
    /// term is unknown.
    pub fn count_matching<S: AsRef<str>>(&self, terms: &[S]) -> usize {
        let mut lists = Vec::with_capacity(terms.len());
        for t in terms {
            let list = self.postings_of(t.as_ref());
            if list.is_empty() {
                return 0;
            }
            lists.push(list);
        }
        intersect_count(&lists)
    }

    /// See [`count_is_k_anonymous`] for the treatment of empty matches.
    pub fn is_k_anonymous<S: AsRef<str>>(&self, terms: &[S], k: usize) -> Result<bool> {
        count_is_k_anonymous(self.count_matching(terms), k)
    }

    /// Inserts a posting list directly. Empty lists are not stored.
    pub fn insert(&mut self, term: &str, list: PostingList) {
        let term = normalize_term(term);
        if term.is_empty() || list.is_empty() {
            return;
        }
        self.postings.insert(term, list);
        self.recount_persons();
    }

    fn recount_persons(&mut self) {
        let distinct: BTreeSet<PersonId> = self
            .postings
            .values()
            .flat_map(|p| p.ids().iter().copied())
            .collect();
        self.num_persons = self.num_persons.max(distinct.len());
    }

    /// Builds an index from `(term, ids)` pairs, mostly for tests and fixtures.
    pub fn from_postings<I, S>(postings: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<PersonId>)>,
        S: AsRef<str>,
    {
        let mut index = InvertedIndex::default();
        for (term, ids) in postings {
            let term = normalize_term(term.as_ref());
            if term.is_empty() || ids.is_empty() {
                continue;
            }
            index.postings.insert(term, PostingList::from_unsorted(ids));
        }
        index.recount_persons();
        index
    }

    /// Writes the KAIX1 text format. Output is byte-deterministic.
    pub fn serialize<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{INDEX_MAGIC}\t{}", self.num_persons)?;
        let mut line = String::new();
        for (term, list) in &self.postings {
            line.clear();
            line.push_str(term);
            line.push('\t');
            for (i, id) in list.ids().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&id.to_string());
            }
            line.push('\n');
            sink.write_all(line.as_bytes())?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.serialize(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn deserialize<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Format("empty index file".into()))?;
        let (magic, count) = header
            .split_once('\t')
            .ok_or_else(|| Error::Format("malformed header".into()))?;
        if magic != INDEX_MAGIC {
            return Err(Error::Format(format!(
                "bad magic '{magic}', expected '{INDEX_MAGIC}'"
            )));
        }
        let num_persons: usize = count
            .parse()
            .map_err(|_| Error::Format(format!("bad person count '{count}'")))?;

        let mut postings = BTreeMap::new();
        let mut distinct = BTreeSet::new();
        let mut previous: Option<String> = None;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            let (term, ids) = line
                .split_once('\t')
                .ok_or_else(|| Error::Corruption(format!("line {line_no}: missing tab")))?;
            if term.is_empty() {
                return Err(Error::Corruption(format!("line {line_no}: empty term")));
            }
            if previous.as_deref().is_some_and(|p| p >= term) {
                return Err(Error::Corruption(format!(
                    "line {line_no}: terms not in strictly increasing order"
                )));
            }
            let ids: Vec<PersonId> = ids
                .split(',')
                .map(|s| {
                    s.parse().map_err(|_| {
                        Error::Corruption(format!("line {line_no}: bad person id '{s}'"))
                    })
                })
                .collect::<Result<_>>()?;
            let list = PostingList::from_sorted(ids).map_err(|_| {
                Error::Corruption(format!("line {line_no}: posting list for '{term}' not sorted"))
            })?;
            distinct.extend(list.ids().iter().copied());
            previous = Some(term.to_string());
            postings.insert(term.to_string(), list);
        }
        if distinct.len() > num_persons {
            return Err(Error::Corruption(format!(
                "{} distinct ids but header declares {num_persons} persons",
                distinct.len()
            )));
        }
        Ok(InvertedIndex {
            postings,
            num_persons,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(lists: &[Vec<PersonId>]) -> Vec<PersonId> {
        let mut sets = lists.iter().map(|l| l.iter().copied().collect::<BTreeSet<_>>());
        let first = sets.next().unwrap_or_default();
        sets.fold(first, |acc, s| &acc & &s).into_iter().collect()
    }

    #[test]
    fn intersect_examples() {
        assert_eq!(intersect(&[vec![1, 2, 3], vec![2, 3, 4]]).ids(), &[2, 3]);
        assert!(intersect(&[vec![1, 2, 3], vec![]]).is_empty());
        let lists = vec![vec![1, 2, 3, 4, 5], vec![4, 6], vec![4]];
        assert_eq!(intersect(&lists).ids(), naive(&lists).as_slice());
        assert_eq!(intersect(&lists).ids(), &[4]);
    }

    #[test]
    fn gallop_positions() {
        let l = [1, 3, 5, 7, 9, 11, 13];
        assert_eq!(gallop(&l, 0, 0), 0);
        assert_eq!(gallop(&l, 0, 9), 4);
        assert_eq!(gallop(&l, 2, 10), 5);
        assert_eq!(gallop(&l, 0, 14), 7);
        assert_eq!(gallop(&l, 7, 1), 7);
    }

    fn lisbon_index() -> InvertedIndex {
        InvertedIndex::build(
            &[
                KgRecord::new(1, ["Lisbon"]),
                KgRecord::new(2, ["Lisbon"]),
                KgRecord::new(4, ["Leandro Micael Gomes Albano", "Lisbon", "Freamunde"]),
            ],
            &Whitelist::empty(),
            None,
        )
    }

    #[test]
    fn build_and_lookup() {
        let idx = lisbon_index();
        assert_eq!(idx.postings_of("Lisbon"), &[1, 2, 4]);
        for t in ["Leandro Micael Gomes Albano", "Lisbon", "Freamunde"] {
            assert!(idx.postings_of(t).contains(&4));
        }
        assert!(idx.postings_of("lisbon").is_empty(), "lookup is exact");
        assert!(idx.postings_of("Porto").is_empty());
        assert_eq!(idx.num_persons(), 3);
    }

    #[test]
    fn build_is_order_independent() {
        let a = [KgRecord::new(1, ["Lisbon"]), KgRecord::new(2, ["Lisbon"])];
        let b = [a[1].clone(), a[0].clone()];
        let ia = InvertedIndex::build(&a, &Whitelist::empty(), None);
        let ib = InvertedIndex::build(&b, &Whitelist::empty(), None);
        assert_eq!(ia, ib);
        assert_eq!(ia.postings_of("Lisbon"), &[1, 2]);
    }

    #[test]
    fn whitelist_and_variants_at_build() {
        let mut rules = VariantRules::new();
        rules.add_location_alias("Lisbon", "Lisboa");
        let idx = InvertedIndex::build(
            &[KgRecord::new(7, ["born", "Lisbon", "1992-08-05"])],
            &Whitelist::from_words(["born"]),
            Some(&rules),
        );
        assert!(!idx.contains_term("born"));
        assert_eq!(idx.postings_of("Lisboa"), &[7]);
        assert_eq!(idx.postings_of("5 August 1992"), &[7]);
    }

    #[test]
    fn counting_and_anonymity() {
        let idx = lisbon_index();
        assert_eq!(idx.count_matching(&["Lisbon", "Freamunde"]), 1);
        assert_eq!(idx.count_matching(&["Lisbon"]), 3);
        assert_eq!(idx.count_matching(&["Lisbon", "Nowhere"]), 0);
        assert!(!idx.is_k_anonymous(&["Lisbon", "Freamunde"], 5).unwrap());
        assert!(idx.is_k_anonymous(&["Nowhere"], 5).unwrap());
        assert!(idx.is_k_anonymous(&["Lisbon"], 1).is_err());
    }

    #[test]
    fn anonymity_boundaries() {
        assert!(count_is_k_anonymous(5, 5).unwrap());
        assert!(!count_is_k_anonymous(4, 5).unwrap());
        assert!(!count_is_k_anonymous(1, 5).unwrap());
        assert!(count_is_k_anonymous(0, 5).unwrap());
        assert!(matches!(count_is_k_anonymous(3, 1), Err(Error::Config(_))));
    }

    #[test]
    fn kaix1_bytes() {
        let idx = lisbon_index();
        let text = String::from_utf8(idx.to_bytes()).unwrap();
        assert_eq!(
            text,
            "KAIX1\t3\nFreamunde\t4\nLeandro Micael Gomes Albano\t4\nLisbon\t1,2,4\n"
        );
        assert_eq!(InvertedIndex::deserialize(text.as_bytes()).unwrap(), idx);
        assert_eq!(idx.to_bytes(), lisbon_index().to_bytes());
    }

    #[test]
    fn deserialize_errors() {
        let bad_magic = "KAIX2\t1\na\t1\n";
        assert!(matches!(
            InvertedIndex::deserialize(bad_magic.as_bytes()),
            Err(Error::Format(_))
        ));
        let unsorted = "KAIX1\t2\na\t2,1\n";
        assert!(matches!(
            InvertedIndex::deserialize(unsorted.as_bytes()),
            Err(Error::Corruption(_))
        ));
        let dup = "KAIX1\t2\na\t1,1\n";
        assert!(matches!(
            InvertedIndex::deserialize(dup.as_bytes()),
            Err(Error::Corruption(_))
        ));
        let order = "KAIX1\t2\nb\t1\na\t2\n";
        assert!(matches!(
            InvertedIndex::deserialize(order.as_bytes()),
            Err(Error::Corruption(_))
        ));
        assert!(matches!(
            InvertedIndex::deserialize("".as_bytes()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn empty_index_round_trip() {
        let idx = InvertedIndex::build(&[], &Whitelist::empty(), None);
        assert_eq!(idx.to_bytes(), b"KAIX1\t0\n");
        assert_eq!(InvertedIndex::deserialize(&b"KAIX1\t0\n"[..]).unwrap(), idx);
    }
}

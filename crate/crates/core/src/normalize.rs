//! String normalization shared by ingestion, indexing and matching.

use unicode_normalization::UnicodeNormalization;

/// NFC, trim, and collapse internal whitespace runs to a single space.
/// Case is preserved.
pub fn normalize_term(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    for word in nfc.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Simple per-character case folding that never changes the character count.
///
/// Characters whose lowercase form expands to several scalars are left as is,
/// so offsets computed on the folded string are valid on the original.
pub fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub fn fold_case(s: &str) -> String {
    s.chars().map(fold_char).collect()
}

/// Converts a char-offset span to a byte range. `None` if out of bounds.
pub fn char_range_to_bytes(text: &str, start: usize, end: usize) -> Option<(usize, usize)> {
    if start > end {
        return None;
    }
    let mut byte_start = None;
    let mut byte_end = None;
    let mut count = 0;
    for (b, _) in text.char_indices() {
        if count == start {
            byte_start = Some(b);
        }
        if count == end {
            byte_end = Some(b);
            break;
        }
        count += 1;
    }
    let total = text.len();
    if byte_start.is_none() && count == start {
        byte_start = Some(total);
    }
    if byte_end.is_none() && count == end {
        byte_end = Some(total);
    }
    Some((byte_start?, byte_end?))
}

/// Slices `text` by char offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    char_range_to_bytes(text, start, end).map(|(s, e)| &text[s..e])
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_and_trims() {
        assert_eq!(normalize_term("  New \t York  "), "New York");
        assert_eq!(normalize_term("   "), "");
    }

    #[test]
    fn nfc_composes() {
        assert_eq!(normalize_term("Lisboa\u{301}"), "Lisboá");
    }

    #[test]
    fn fold_keeps_length() {
        let s = "İstanbul ÆBC";
        assert_eq!(fold_case(s).chars().count(), s.chars().count());
        assert_eq!(fold_case("LISBON"), "lisbon");
    }

    #[test]
    fn char_slicing() {
        let t = "née à Lisboa";
        assert_eq!(char_slice(t, 6, 12), Some("Lisboa"));
        assert_eq!(char_slice(t, 0, 3), Some("née"));
        assert_eq!(char_slice(t, 12, 12), Some(""));
        assert_eq!(char_slice(t, 0, 13), None);
    }
}

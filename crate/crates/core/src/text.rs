//! Word and term splitting shared by the chunker, the lexical index and the
//! stub providers.

use alloc::string::String;
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;

/// NFC-normalizes `text` and splits it into whitespace-delimited words.
pub fn words(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    normalized.split_whitespace().map(String::from).collect()
}

/// Lowercased alphanumeric runs. Everything else (whitespace, punctuation,
/// underscores) separates terms. No stemming, no stopwords.
pub fn terms(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.nfc() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            out.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Lowercase with hyphens and underscores folded to spaces and whitespace
/// collapsed; used for keyword rules so "first-in-human" matches
/// "first in human".
pub fn fold_for_matching(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push(' ');
    let mut last_space = true;
    for ch in text.nfc() {
        let ch = if ch == '-' || ch == '_' || ch.is_whitespace() { ' ' } else { ch };
        if ch == ' ' {
            if !last_space {
                out.push(' ');
            }
            last_space = true;
        } else {
            out.extend(ch.to_lowercase());
            last_space = false;
        }
    }
    if !last_space {
        out.push(' ');
    }
    out
}

/// Case-insensitive search for `needle` in `haystack` where the match must
/// not be glued to a neighbouring alphanumeric character.
pub fn contains_bounded(haystack: &str, needle: &str) -> bool {
    let hay = haystack.to_lowercase();
    let needle = needle.trim().to_lowercase();
    if needle.is_empty() {
        return false;
    }
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = hay[..start].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let after_ok = hay[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

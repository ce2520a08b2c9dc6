//! Final-answer extraction and normalization.
//!
//! Answers are compared by strict string equality after normalization, so
//! the normalizer canonicalizes the obvious surface variation: case,
//! surrounding punctuation, leading zeros and trailing fractional zeros of
//! decimal numbers, and yes/no synonyms. Symbolic equivalence (e.g. `1/2`
//! vs `0.5`) is out of scope.

use alloc::string::{String, ToString};

use thiserror::Error;

/// The literal phrase that introduces a final answer. Matching is
/// case-insensitive and the last occurrence wins.
pub const ANSWER_MARKER: &str = "The answer is";

/// Raised when text carries no final-answer marker.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no final-answer marker in text")]
pub struct NoAnswerMarker;

/// Whether `text` contains the final-answer marker (case-insensitive).
pub fn contains_marker(text: &str) -> bool {
    last_marker_end(text).is_some()
}

/// Byte offset just past the last case-insensitive marker occurrence.
fn last_marker_end(text: &str) -> Option<usize> {
    let haystack = text.to_lowercase();
    let needle = ANSWER_MARKER.to_lowercase();
    // Byte offsets agree between `text` and its lowercased form only for
    // ASCII, so rescan the original around the match to stay safe with
    // multi-byte text: lowercase can change byte lengths (e.g. İ), so walk
    // char-by-char instead.
    if haystack.is_ascii() {
        return haystack.rfind(&needle).map(|i| i + needle.len());
    }
    let mut last = None;
    let chars: alloc::vec::Vec<(usize, char)> = text.char_indices().collect();
    let needle_chars: alloc::vec::Vec<char> = needle.chars().collect();
    'outer: for start in 0..chars.len() {
        let mut end_byte = text.len();
        for (k, nc) in needle_chars.iter().enumerate() {
            match chars.get(start + k) {
                Some(&(pos, c)) if c.to_lowercase().eq(nc.to_lowercase()) => {
                    end_byte = pos + c.len_utf8();
                }
                _ => continue 'outer,
            }
        }
        last = Some(end_byte);
    }
    last
}

/// Extract and normalize the answer following the last marker occurrence.
pub fn normalize_answer(raw: &str) -> Result<String, NoAnswerMarker> {
    let end = last_marker_end(raw).ok_or(NoAnswerMarker)?;
    Ok(canonicalize_answer(&raw[end..]))
}

/// Normalize an answer string that is already free of the marker (e.g. a
/// gold answer from a dataset): trim punctuation and whitespace, lowercase,
/// canonicalize decimal numbers, and map boolean synonyms.
pub fn canonicalize_answer(raw: &str) -> String {
    let trimmed = raw
        .trim()
        .trim_start_matches([':', ',', ' ', '\t'])
        .trim_end_matches(['.', '!', '?', ';', ':', ','])
        .trim();
    let lowered = trimmed.to_lowercase();
    if let Some(num) = canonicalize_decimal(&lowered) {
        return num;
    }
    match lowered.as_str() {
        "true" | "yes" => "yes".to_string(),
        "false" | "no" => "no".to_string(),
        _ => lowered,
    }
}

/// Canonical form of a signed decimal literal, or `None` if `s` is not one.
/// `007` becomes `7`, `3.50` becomes `3.5`, and negative zero collapses to
/// `0`.
fn canonicalize_decimal(s: &str) -> Option<String> {
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if !int_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    if let Some(f) = frac_part {
        if !f.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
    }
    if int_part.is_empty() && frac_part.is_none_or(str::is_empty) {
        return None;
    }
    let int_norm = {
        let t = int_part.trim_start_matches('0');
        if t.is_empty() {
            "0"
        } else {
            t
        }
    };
    let frac_norm = frac_part.map(|f| f.trim_end_matches('0')).unwrap_or("");
    let mut out = String::new();
    let is_zero = int_norm == "0" && frac_norm.is_empty();
    if negative && !is_zero {
        out.push('-');
    }
    out.push_str(int_norm);
    if !frac_norm.is_empty() {
        out.push('.');
        out.push_str(frac_norm);
    }
    Some(out)
}

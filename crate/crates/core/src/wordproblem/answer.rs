//! Final answers after the `####` marker.

use thiserror::Error;

use super::expr::{format_decimal, parse_decimal};

pub const ANSWER_MARKER: &str = "####";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerError {
    #[error("no `####` answer marker")]
    NoAnswerMarker,
    #[error("answer {0:?} is not a number")]
    UnparseableNumber(String),
}

/// Canonical string for a number: no thousands separators or leading `+`,
/// no trailing fractional zeros. Two answers are equal iff their canonical
/// strings are.
pub fn normalize_number(s: &str) -> Option<String> {
    let cleaned: String = s.chars().filter(|&c| c != ',').collect();
    let cleaned = cleaned.strip_prefix('+').unwrap_or(&cleaned);
    parse_decimal(cleaned).map(|v| format_decimal(&v))
}

/// The normalized value on the line after the last `####` marker.
pub fn extract_answer(text: &str) -> Result<String, AnswerError> {
    let at = text.rfind(ANSWER_MARKER).ok_or(AnswerError::NoAnswerMarker)?;
    let raw = text[at + ANSWER_MARKER.len()..].lines().next().unwrap_or("").trim();
    normalize_number(raw).ok_or_else(|| AnswerError::UnparseableNumber(raw.to_owned()))
}

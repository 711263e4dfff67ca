//! Calculator annotations: `<<expr=>>` spans get their value filled in,
//! `<<expr=claim>>` spans get checked.

use super::answer::normalize_number;
use super::expr::{eval_expr, format_decimal, ExprError};

pub const OPEN: &str = "<<";
pub const CLOSE: &str = ">>";

/// A claimed value that disagrees with the calculator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    /// Byte offset of the span's `<<` in the input.
    pub offset: usize,
    pub expr: String,
    pub claimed: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanError {
    pub offset: usize,
    pub expr: String,
    pub error: ExprError,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CalcOutcome {
    pub text: String,
    pub filled: usize,
    pub mismatches: Vec<Mismatch>,
    pub errors: Vec<SpanError>,
}

/// Fills every empty annotation and verifies every claimed one.
///
/// Text outside annotations, claimed values and spans that fail to
/// evaluate are copied unchanged, so running this twice changes nothing
/// the second time.
pub fn fill_calc_annotations(text: &str) -> CalcOutcome {
    let mut out = CalcOutcome { text: String::with_capacity(text.len()), ..Default::default() };
    let mut rest = text;
    let mut base = 0;
    while let Some(open) = rest.find(OPEN) {
        let body_start = open + OPEN.len();
        let Some(close) = rest[body_start..].find(CLOSE).map(|c| body_start + c) else { break };
        let body = &rest[body_start..close];
        out.text.push_str(&rest[..body_start]);
        let offset = base + open;
        match body.rsplit_once('=') {
            None => {
                out.errors.push(SpanError { offset, expr: body.to_owned(), error: ExprError::SyntaxError(body.len()) });
                out.text.push_str(body);
            }
            Some((expr, claim)) => match eval_expr(expr) {
                Err(error) => {
                    out.errors.push(SpanError { offset, expr: expr.to_owned(), error });
                    out.text.push_str(body);
                }
                Ok(value) => {
                    let expected = format_decimal(&value);
                    out.text.push_str(expr);
                    out.text.push('=');
                    if claim.trim().is_empty() {
                        out.text.push_str(&expected);
                        out.filled += 1;
                    } else {
                        if normalize_number(claim.trim()).as_deref() != Some(expected.as_str()) {
                            out.mismatches.push(Mismatch {
                                offset,
                                expr: expr.to_owned(),
                                claimed: claim.to_owned(),
                                expected,
                            });
                        }
                        out.text.push_str(claim);
                    }
                }
            },
        }
        out.text.push_str(CLOSE);
        base += close + CLOSE.len();
        rest = &rest[close + CLOSE.len()..];
    }
    out.text.push_str(rest);
    out
}

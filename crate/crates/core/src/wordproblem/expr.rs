//! Exact arithmetic over decimal literals with `+ - * /`, parentheses and
//! unary signs. Values are rationals; they are shown as decimals rounded to
//! [`DISPLAY_DIGITS`] fractional digits.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

pub const DISPLAY_DIGITS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {0}")]
    SyntaxError(usize),
    #[error("division by zero")]
    DivisionByZero,
}

/// Parses a plain decimal literal: optional `-`, digits, optional fraction.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits_ok = |d: &str| d.bytes().all(|b| b.is_ascii_digit());
    if int.len() + frac.len() == 0 || !digits_ok(int) || !digits_ok(frac) {
        return None;
    }
    let mantissa: BigInt = format!("{int}{frac}").parse().ok()?;
    let value = BigRational::new(mantissa, BigInt::from(10u32).pow(frac.len() as u32));
    Some(if neg { -value } else { value })
}

/// Decimal form rounded half away from zero to [`DISPLAY_DIGITS`] places,
/// with trailing zeros (and a bare point) removed.
pub fn format_decimal(value: &BigRational) -> String {
    let scale = BigInt::from(10u32).pow(DISPLAY_DIGITS);
    let scaled = (value * BigRational::from_integer(scale.clone())).round().to_integer();
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let width = DISPLAY_DIGITS as usize + 1;
    let padded = format!("{digits:0>width$}");
    let (int, frac) = padded.split_at(padded.len() - DISPLAY_DIGITS as usize);
    let frac = frac.trim_end_matches('0');
    let sign = if neg { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// Evaluates an expression exactly.
///
/// ```
/// use relplan_core::wordproblem::{eval_expr, format_decimal};
/// assert_eq!(format_decimal(&eval_expr("16-3-4").unwrap()), "9");
/// assert_eq!(format_decimal(&eval_expr("2+3*4").unwrap()), "14");
/// ```
pub fn eval_expr(s: &str) -> Result<BigRational, ExprError> {
    let mut p = Parser { src: s.as_bytes(), pos: 0 };
    let value = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(ExprError::SyntaxError(p.pos));
    }
    Ok(value)
}

/// Recursive descent, one level per precedence tier.
struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<BigRational, ExprError> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            if op == b'+' {
                acc += rhs;
            } else {
                acc -= rhs;
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<BigRational, ExprError> {
        let mut acc = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            if op == b'*' {
                acc *= rhs;
            } else if rhs.is_zero() {
                return Err(ExprError::DivisionByZero);
            } else {
                acc /= rhs;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<BigRational, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.factor()
            }
            Some(b'(') => {
                self.pos += 1;
                let value = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(ExprError::SyntaxError(self.pos));
                }
                self.pos += 1;
                Ok(value)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit() || *b == b'.') {
                    self.pos += 1;
                }
                let lit = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                parse_decimal(lit).ok_or(ExprError::SyntaxError(start))
            }
            _ => Err(ExprError::SyntaxError(self.pos)),
        }
    }
}

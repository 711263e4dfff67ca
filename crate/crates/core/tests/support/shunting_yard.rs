//! Reference evaluator for arithmetic expressions, written independently of
//! the library's recursive-descent parser: tokens are reordered into postfix
//! with Dijkstra's shunting-yard algorithm and then evaluated on a stack.
//! Also generates random well-formed expressions to compare the two on.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Op(char),
    Neg,
    Open,
    Close,
}

fn literal(s: &str) -> BigRational {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let int = if int.is_empty() { "0" } else { int };
    let mantissa: BigInt = format!("{int}{frac}").parse().unwrap();
    BigRational::new(mantissa, BigInt::from(10).pow(frac.len() as u32))
}

fn tokenize(s: &str) -> Vec<Tok> {
    let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            out.push(Tok::Num(literal(&chars[start..i].iter().collect::<String>())));
            continue;
        }
        let prev_is_operand = matches!(out.last(), Some(Tok::Num(_)) | Some(Tok::Close));
        out.push(match c {
            '(' => Tok::Open,
            ')' => Tok::Close,
            '-' if !prev_is_operand => Tok::Neg,
            '+' | '-' | '*' | '/' => Tok::Op(c),
            _ => panic!("unexpected {c:?}"),
        });
        i += 1;
    }
    out
}

fn prec(t: &Tok) -> u8 {
    match t {
        Tok::Op('+') | Tok::Op('-') => 1,
        Tok::Op(_) => 2,
        Tok::Neg => 3,
        _ => 0,
    }
}

/// `None` on division by zero.
pub fn evaluate(s: &str) -> Option<BigRational> {
    let mut postfix = Vec::new();
    let mut ops: Vec<Tok> = Vec::new();
    for t in tokenize(s) {
        match t {
            Tok::Num(_) => postfix.push(t),
            Tok::Open | Tok::Neg => ops.push(t),
            Tok::Close => {
                while let Some(top) = ops.pop() {
                    if top == Tok::Open {
                        break;
                    }
                    postfix.push(top);
                }
            }
            Tok::Op(_) => {
                // left-associative binary operators pop equal precedence
                while ops.last().is_some_and(|top| *top != Tok::Open && prec(top) >= prec(&t)) {
                    postfix.push(ops.pop().unwrap());
                }
                ops.push(t);
            }
        }
    }
    while let Some(top) = ops.pop() {
        postfix.push(top);
    }

    let mut stack: Vec<BigRational> = Vec::new();
    for t in postfix {
        match t {
            Tok::Num(v) => stack.push(v),
            Tok::Neg => {
                let v = stack.pop().unwrap();
                stack.push(-v);
            }
            Tok::Op(op) => {
                let b = stack.pop().unwrap();
                let a = stack.pop().unwrap();
                stack.push(match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    _ if b.is_zero() => return None,
                    _ => a / b,
                });
            }
            _ => unreachable!(),
        }
    }
    assert_eq!(stack.len(), 1);
    stack.pop()
}

/// A random expression of nesting depth at most `depth` over literals no
/// larger than 10^6, with occasional unary minus and stray spaces.
pub fn random_expr(rng: &mut impl Rng, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.3) {
        let int = rng.random_range(0..=1_000_000u32);
        let lit = match rng.random_range(0..4) {
            0 => format!("{int}.{}", rng.random_range(0..100u32)),
            1 => format!("{}", int % 100),
            _ => format!("{int}"),
        };
        return if rng.random_bool(0.1) { format!("-{lit}") } else { lit };
    }
    let n = rng.random_range(2..=4);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            let op = ['+', '-', '*', '/'][rng.random_range(0..4)];
            let sp = if rng.random_bool(0.3) { " " } else { "" };
            s.push_str(&format!("{sp}{op}{sp}"));
        }
        let sub = random_expr(rng, depth - 1);
        if sub.starts_with('-') || rng.random_bool(0.4) {
            s.push_str(&format!("({sub})"));
        } else {
            s.push_str(&sub);
        }
    }
    if rng.random_bool(0.1) {
        format!("-({s})")
    } else {
        s
    }
}

//! Parses model-emitted token sequences back into [`ParsedSolution`]s and
//! checks them against the problem graph.
//!
//! Parsing is total: any input yields either a solution or a single
//! [`ParseError`] pointing at the offending token.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modmath::Residue;
use crate::solution::{implied_plan, FinalAnswer, Op, ParsedSolution, Step};
use crate::ucformat::{
    FormatSpec, MultitaskMode, StepStyle, ANSWER_CLOSE, ANSWER_OPEN, ARROW, COLON, END, EQUALS, PLAN,
};
use crate::ucgraph::{ConversionGraph, RESERVED_TOKENS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    MissingAnswerMarkers,
    MalformedStep,
    UnknownUnit,
    OutOfRangeNumber,
    MalformedPlan,
    TrailingGarbage,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::MissingAnswerMarkers => "missing answer markers",
            ParseErrorKind::MalformedStep => "malformed step",
            ParseErrorKind::UnknownUnit => "unknown unit",
            ParseErrorKind::OutOfRangeNumber => "number out of range",
            ParseErrorKind::MalformedPlan => "malformed plan",
            ParseErrorKind::TrailingGarbage => "trailing tokens",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error, Serialize, Deserialize)]
#[error("{kind} at token {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

impl ParseError {
    fn at(kind: ParseErrorKind, position: usize) -> Self {
        ParseError { kind, position }
    }
}

/// Whether the model wrote its own plan or was handed the ground-truth one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Own,
    GtPlanPrompted,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Own => "own",
            Variant::GtPlanPrompted => "gt_plan_prompted",
        })
    }
}

/// One sampled model output, as read from prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub problem_id: String,
    pub condition: String,
    pub variant: Variant,
    pub sample_index: usize,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Which context a token is read in; decides the error kind for tokens of
/// the wrong shape.
#[derive(Clone, Copy)]
enum Ctx {
    Step,
    Plan,
}

impl Ctx {
    fn malformed(self) -> ParseErrorKind {
        match self {
            Ctx::Step => ParseErrorKind::MalformedStep,
            Ctx::Plan => ParseErrorKind::MalformedPlan,
        }
    }
}

struct Parser<'a, S> {
    tokens: &'a [S],
    pos: usize,
    graph: &'a ConversionGraph,
}

impl<'a, S: AsRef<str>> Parser<'a, S> {
    fn peek(&self) -> Option<&'a str> {
        self.tokens.get(self.pos).map(AsRef::as_ref)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn bump(&mut self) -> Option<&'a str> {
        let tok = self.peek();
        self.pos += 1;
        tok
    }

    fn expect(&mut self, want: &str, ctx: Ctx) -> Result<(), ParseError> {
        let at = self.pos;
        match self.bump() {
            Some(tok) if tok == want => Ok(()),
            _ => Err(ParseError::at(ctx.malformed(), at)),
        }
    }

    fn number(&mut self, ctx: Ctx) -> Result<u64, ParseError> {
        let at = self.pos;
        let tok = self.bump().ok_or(ParseError::at(ctx.malformed(), at))?;
        if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseError::at(ctx.malformed(), at));
        }
        let p = self.graph.modulus().get();
        match tok.parse::<u64>() {
            Ok(v) if (1..p).contains(&v) => Ok(v),
            _ => Err(ParseError::at(ParseErrorKind::OutOfRangeNumber, at)),
        }
    }

    fn unit(&mut self, ctx: Ctx) -> Result<String, ParseError> {
        let at = self.pos;
        let tok = self.bump().ok_or(ParseError::at(ctx.malformed(), at))?;
        if self.graph.unit_index(tok).is_some() {
            return Ok(tok.to_owned());
        }
        if RESERVED_TOKENS.contains(&tok) || tok.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseError::at(ctx.malformed(), at));
        }
        Err(ParseError::at(ParseErrorKind::UnknownUnit, at))
    }

    fn plan(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect(PLAN, Ctx::Plan)?;
        let mut units = Vec::new();
        loop {
            match self.peek() {
                Some(END) => {
                    self.pos += 1;
                    break;
                }
                None => return Err(ParseError::at(ParseErrorKind::MalformedPlan, self.pos)),
                Some(_) => units.push(self.unit(Ctx::Plan)?),
            }
        }
        if units.is_empty() {
            return Err(ParseError::at(ParseErrorKind::MalformedPlan, self.pos - 1));
        }
        Ok(units)
    }

    fn arith(&mut self) -> Result<(u64, Op, u64, u64), ParseError> {
        let lhs = self.number(Ctx::Step)?;
        let op = self.op()?;
        let (rhs, result) = self.rhs_result()?;
        Ok((lhs, op, rhs, result))
    }

    fn op(&mut self) -> Result<Op, ParseError> {
        let at = self.pos;
        self.bump().and_then(Op::from_token).ok_or(ParseError::at(ParseErrorKind::MalformedStep, at))
    }

    fn rhs_result(&mut self) -> Result<(u64, u64), ParseError> {
        let rhs = self.number(Ctx::Step)?;
        self.expect(EQUALS, Ctx::Step)?;
        let result = self.number(Ctx::Step)?;
        Ok((rhs, result))
    }

    fn edge(&mut self) -> Result<(String, String), ParseError> {
        let src = self.unit(Ctx::Step)?;
        self.expect(ARROW, Ctx::Step)?;
        let dst = self.unit(Ctx::Step)?;
        Ok((src, dst))
    }

    fn step(&mut self, style: StepStyle) -> Result<Step, ParseError> {
        let step = match style {
            StepStyle::NumericOnly => {
                let (lhs, op, rhs, result) = self.arith()?;
                Step { src_unit: None, dst_unit: None, lhs, op, rhs, result }
            }
            StepStyle::UnitsThenNumbers => {
                let (src, dst) = self.edge()?;
                self.expect(COLON, Ctx::Step)?;
                let (lhs, op, rhs, result) = self.arith()?;
                Step { src_unit: Some(src), dst_unit: Some(dst), lhs, op, rhs, result }
            }
            StepStyle::NumbersThenUnits => {
                let (lhs, op, rhs, result) = self.arith()?;
                self.expect(COLON, Ctx::Step)?;
                let (src, dst) = self.edge()?;
                Step { src_unit: Some(src), dst_unit: Some(dst), lhs, op, rhs, result }
            }
            StepStyle::Integrated => {
                let lhs = self.number(Ctx::Step)?;
                let src = self.unit(Ctx::Step)?;
                let op = self.op()?;
                let (rhs, result) = self.rhs_result()?;
                let dst = self.unit(Ctx::Step)?;
                Step { src_unit: Some(src), dst_unit: Some(dst), lhs, op, rhs, result }
            }
        };
        self.expect(END, Ctx::Step)?;
        Ok(step)
    }

    /// `<S> qty unit </S>` starting at the current position.
    fn answer(&mut self) -> Result<FinalAnswer, ParseError> {
        let open = self.pos;
        self.expect(ANSWER_OPEN, Ctx::Step)?;
        let close = self.tokens[open..]
            .iter()
            .position(|t| t.as_ref() == ANSWER_CLOSE)
            .map(|i| open + i)
            .ok_or(ParseError::at(ParseErrorKind::MissingAnswerMarkers, self.tokens.len()))?;
        if close < open + 3 {
            return Err(ParseError::at(ParseErrorKind::MalformedStep, close));
        }
        let qty = self.number(Ctx::Step)?;
        let at = self.pos;
        let unit = self.bump().unwrap_or_default();
        if self.graph.unit_index(unit).is_none() {
            return Err(ParseError::at(ParseErrorKind::UnknownUnit, at));
        }
        if close > open + 3 {
            return Err(ParseError::at(ParseErrorKind::TrailingGarbage, open + 3));
        }
        self.pos = close + 1;
        Ok(FinalAnswer { qty, unit: unit.to_owned() })
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(ParseError::at(ParseErrorKind::TrailingGarbage, self.pos))
        }
    }
}

/// The final answer between the first `<S>` and the next `</S>`, regardless
/// of what surrounds it.
pub fn extract_final_answer<S: AsRef<str>>(tokens: &[S], graph: &ConversionGraph) -> Result<FinalAnswer, ParseError> {
    let missing = ParseError::at(ParseErrorKind::MissingAnswerMarkers, tokens.len());
    let open = tokens.iter().position(|t| t.as_ref() == ANSWER_OPEN).ok_or(missing)?;
    let mut p = Parser { tokens, pos: open, graph };
    p.answer()
}

/// Parses a full target-side sequence in the layout `spec` prescribes.
pub fn parse_solution<S: AsRef<str>>(
    tokens: &[S],
    spec: &FormatSpec,
    graph: &ConversionGraph,
) -> Result<ParsedSolution, ParseError> {
    let mut p = Parser { tokens, pos: 0, graph };
    if spec.multitask_mode == MultitaskMode::PlanOnly {
        let plan = p.plan()?;
        p.finish()?;
        return Ok(ParsedSolution { plan_units: Some(plan), steps: Vec::new(), final_answer: None });
    }
    let prefix = if spec.target_has_plan_prefix() { Some(p.plan()?) } else { None };
    let mut steps = Vec::new();
    loop {
        match p.peek() {
            None => return Err(ParseError::at(ParseErrorKind::MissingAnswerMarkers, p.pos)),
            Some(ANSWER_OPEN) => break,
            Some(_) => steps.push(p.step(spec.step_style)?),
        }
    }
    let answer = p.answer()?;
    p.finish()?;
    let plan_units = prefix.or_else(|| implied_plan(&steps));
    Ok(ParsedSolution { plan_units, steps, final_answer: Some(answer) })
}

/// A plan is valid when every unit exists, it starts at `source`, ends at
/// `target`, and consecutive units share a rule. Revisits and detours are
/// allowed.
pub fn validate_plan<S: AsRef<str>>(plan_units: &[S], graph: &ConversionGraph, source: usize, target: usize) -> bool {
    let Some(ids) = plan_units.iter().map(|u| graph.unit_index(u.as_ref())).collect::<Option<Vec<usize>>>() else {
        return false;
    };
    ids.first() == Some(&source) && ids.last() == Some(&target) && ids.windows(2).all(|w| graph.has_edge(w[0], w[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    /// Every `lhs op rhs = result` holds mod p.
    pub arith_ok: bool,
    /// Every unit-tagged step follows a rule with its true factor.
    pub traversal_ok: bool,
    /// Each step starts from the previous result and the answer is the last.
    pub chain_ok: bool,
}

pub fn verify_steps(parsed: &ParsedSolution, graph: &ConversionGraph, source_qty: Residue) -> StepReport {
    let m = graph.modulus();
    let arith_ok = parsed.steps.iter().all(|s| s.op.apply(s.lhs, s.rhs, m) == Some(s.result));

    let traversal_ok = parsed.steps.iter().all(|s| {
        let (Some(src), Some(dst)) = (&s.src_unit, &s.dst_unit) else { return true };
        let (Some(u), Some(v)) = (graph.unit_index(src), graph.unit_index(dst)) else { return false };
        let used = m.residue(s.rhs).ok().and_then(|rhs| s.op.effective_factor(rhs, m));
        used.is_some() && used == graph.multiplier(u, v)
    });

    let mut expected = source_qty.get();
    let mut chain_ok = true;
    for s in &parsed.steps {
        chain_ok &= s.lhs == expected;
        expected = s.result;
    }
    if let Some(ans) = &parsed.final_answer {
        chain_ok &= ans.qty == expected;
    }
    StepReport { arith_ok, traversal_ok, chain_ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ucformat::{ground_truth_solution, render_target, Condition, TokenSequence};
    use crate::ucgraph::fixtures::{chain_abc, chain_problem};
    use crate::ucgraph::{generate_problem, GenParams};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn kind(r: Result<impl std::fmt::Debug, ParseError>) -> ParseErrorKind {
        r.unwrap_err().kind
    }

    #[test]
    fn prediction_record_schema() {
        let line = r#"{"problem_id":"uc-1-0","condition":"RNRN-utn","variant":"gt_plan_prompted","sample_index":3,"output":"<S> 4 C </S>"}"#;
        let rec: PredictionRecord = serde_json::from_str(line).unwrap();
        assert_eq!(rec.variant, Variant::GtPlanPrompted);
        assert_eq!(rec.score, None);
        assert_eq!(serde_json::to_string(&rec).unwrap(), line);
        let scored: PredictionRecord = serde_json::from_str(&line.replace("}", r#","score":0.5}"#)).unwrap();
        assert_eq!(scored.score, Some(0.5));
    }

    #[test]
    fn extract_examples() {
        let g = chain_abc();
        let ans = extract_final_answer(&toks("1 * 4 = 4 ; <S> 4 C </S>"), &g).unwrap();
        assert_eq!(ans, FinalAnswer { qty: 4, unit: "C".into() });
        assert_eq!(kind(extract_final_answer(&toks("x <S> 4 C"), &g)), ParseErrorKind::MissingAnswerMarkers);
        assert_eq!(kind(extract_final_answer(&toks("4 C"), &g)), ParseErrorKind::MissingAnswerMarkers);
        assert_eq!(kind(extract_final_answer(&toks("<S> 0 C </S>"), &g)), ParseErrorKind::OutOfRangeNumber);
        assert_eq!(kind(extract_final_answer(&toks("<S> 7 C </S>"), &g)), ParseErrorKind::OutOfRangeNumber);
        assert_eq!(kind(extract_final_answer(&toks("<S> 4 Z </S>"), &g)), ParseErrorKind::UnknownUnit);
        assert_eq!(kind(extract_final_answer(&toks("<S> 4 </S>"), &g)), ParseErrorKind::MalformedStep);
        assert_eq!(kind(extract_final_answer(&toks("<S> 4 C C </S>"), &g)), ParseErrorKind::TrailingGarbage);
        // garbage before the markers does not matter
        assert!(extract_final_answer(&toks("; ; 9 Z <S> 4 C </S> junk"), &g).is_ok());
    }

    #[test]
    fn parse_error_positions() {
        let g = chain_abc();
        let utn = FormatSpec::new(StepStyle::UnitsThenNumbers);
        let e = parse_solution(&toks("A > Z : 2 * 3 = 1 ; <S> 1 Z </S>"), &utn, &g).unwrap_err();
        assert_eq!(e, ParseError { kind: ParseErrorKind::UnknownUnit, position: 2 });

        let nn = FormatSpec::new(StepStyle::NumericOnly);
        let e = parse_solution(&toks("2 * 3 = ; <S> 1 B </S>"), &nn, &g).unwrap_err();
        assert_eq!(e, ParseError { kind: ParseErrorKind::MalformedStep, position: 4 });

        let e = parse_solution(&toks("2 * 3 = 1 ; 1 * 4 = 4 ;"), &nn, &g).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MissingAnswerMarkers);

        let e = parse_solution(&toks("2 * 3 = 1 ; <S> 1 B </S> ;"), &nn, &g).unwrap_err();
        assert_eq!(e, ParseError { kind: ParseErrorKind::TrailingGarbage, position: 10 });

        let e = parse_solution(&toks("2 + 3 = 1 ; <S> 1 B </S>"), &nn, &g).unwrap_err();
        assert_eq!(e, ParseError { kind: ParseErrorKind::MalformedStep, position: 1 });

        let e = parse_solution(&toks("2 * 9 = 1 ; <S> 1 B </S>"), &nn, &g).unwrap_err();
        assert_eq!(e, ParseError { kind: ParseErrorKind::OutOfRangeNumber, position: 2 });

        let rr = FormatSpec { plan_prefix: true, ..nn };
        assert_eq!(kind(parse_solution(&toks("P ; <S> 4 C </S>"), &rr, &g)), ParseErrorKind::MalformedPlan);
        assert_eq!(kind(parse_solution(&toks("P A B C"), &rr, &g)), ParseErrorKind::MalformedPlan);
        assert_eq!(kind(parse_solution(&toks("2 * 3 = 1 ;"), &rr, &g)), ParseErrorKind::MalformedPlan);
        assert_eq!(kind(parse_solution(&toks("P A 3 ;"), &rr, &g)), ParseErrorKind::MalformedPlan);
        assert_eq!(kind(parse_solution(&toks("P A X ;"), &rr, &g)), ParseErrorKind::UnknownUnit);
        assert_eq!(kind(parse_solution::<String>(&[], &nn, &g)), ParseErrorKind::MissingAnswerMarkers);
    }

    #[test]
    fn answer_only_output_parses() {
        let g = chain_abc();
        let nn = FormatSpec::new(StepStyle::NumericOnly);
        let parsed = parse_solution(&toks("<S> 3 C </S>"), &nn, &g).unwrap();
        assert!(parsed.steps.is_empty());
        assert_eq!(parsed.plan_units, None);
        assert_eq!(parsed.final_answer.unwrap().qty, 3);
    }

    #[test]
    fn ground_truth_round_trips_for_chain() {
        let p = chain_problem();
        for cond in Condition::all() {
            let mut specs = cond.specs();
            specs.extend(cond.gt_plan_spec());
            for (_, spec) in specs {
                let target = render_target(&p, &spec);
                let parsed = parse_solution(target.tokens(), &spec, &p.graph).unwrap();
                assert_eq!(parsed, ground_truth_solution(&p, &spec), "{spec:?}");
            }
        }
    }

    #[test]
    fn plan_validity() {
        let p = chain_problem();
        let g = &p.graph;
        assert!(validate_plan(&["A", "B", "C"], g, 0, 2));
        // detours and revisits are fine
        assert!(validate_plan(&["A", "B", "A", "B", "C", "B", "C"], g, 0, 2));
        assert!(!validate_plan(&["B", "C"], g, 0, 2));
        assert!(!validate_plan(&["A", "C"], g, 0, 2));
        assert!(!validate_plan(&["A", "B"], g, 0, 2));
        assert!(!validate_plan(&["A", "X", "C"], g, 0, 2));
        assert!(!validate_plan::<&str>(&[], g, 0, 2));
    }

    #[test]
    fn longer_valid_walk_on_generated_problem() {
        let p = generate_problem(&GenParams::standard(5, 0)).unwrap();
        let labels: Vec<String> = p.canonical_plan.iter().map(|&u| p.graph.label(u).to_owned()).collect();
        let mut walk = labels.clone();
        // bounce over the first edge: 5 + 2 = 7 edges
        walk.insert(1, labels[1].clone());
        walk.insert(2, labels[0].clone());
        assert_eq!(walk.len() - 1, 7);
        assert!(validate_plan(&walk, &p.graph, p.source_unit, p.target_unit));
    }

    #[test]
    fn step_verification() {
        let p = chain_problem();
        let g = &p.graph;
        let utn = FormatSpec::new(StepStyle::UnitsThenNumbers);
        let gt = parse_solution(render_target(&p, &utn).tokens(), &utn, g).unwrap();
        assert_eq!(
            verify_steps(&gt, g, p.source_qty),
            StepReport { arith_ok: true, traversal_ok: true, chain_ok: true }
        );

        let nn = FormatSpec::new(StepStyle::NumericOnly);
        let bad = parse_solution(&toks("2 * 3 = 4 ; 4 * 4 = 1 ; <S> 1 C </S>"), &nn, g).unwrap();
        let r = verify_steps(&bad, g, p.source_qty);
        assert!(!r.arith_ok);
        assert!(r.chain_ok);

        // correct arithmetic on a rule that does not exist (A -> C)
        let skewed: TokenSequence = "A > C : 2 * 3 = 1 ; B > C : 1 * 4 = 4 ; <S> 4 C </S>".parse().unwrap();
        let parsed = parse_solution(skewed.tokens(), &utn, g).unwrap();
        let r = verify_steps(&parsed, g, p.source_qty);
        assert!(r.arith_ok && !r.traversal_ok);

        // right edge, wrong factor
        let wrong = parse_solution(&toks("A > B : 2 * 2 = 4 ; <S> 4 B </S>"), &utn, g).unwrap();
        let r = verify_steps(&wrong, g, p.source_qty);
        assert!(r.arith_ok && !r.traversal_ok);

        // reverse travel written as division by the stated factor
        let back = parse_solution(&toks("C > B : 4 / 4 = 1 ; B > A : 1 / 3 = 2 ; <S> 2 A </S>"), &utn, g).unwrap();
        let r = verify_steps(&back, g, p.gt_answer);
        assert_eq!(r, StepReport { arith_ok: true, traversal_ok: true, chain_ok: true });

        let broken_chain = parse_solution(&toks("2 * 3 = 1 ; 2 * 4 = 3 ; <S> 3 C </S>"), &nn, g).unwrap();
        assert!(!verify_steps(&broken_chain, g, p.source_qty).chain_ok);
    }
}

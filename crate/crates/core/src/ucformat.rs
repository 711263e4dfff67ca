//! Renders problems and ground-truth solutions as flat token sequences.
//!
//! Grammar (tokens separated by single spaces):
//!
//! ```text
//! prompt := rule* query plan? mode?
//! rule   := "R" unit unit num ";"
//! query  := "Q" num unit ">" unit ":"
//! plan   := "P" unit+ ";"
//! mode   := "#plan" | "#calc"
//! target := plan | plan? step* answer
//! answer := "<S>" num unit "</S>"
//! ```
//!
//! Steps depend on the [`StepStyle`]:
//!
//! | style              | step                    |
//! |--------------------|-------------------------|
//! | numeric only       | `a * f = c ;`           |
//! | units then numbers | `u > v : a * f = c ;`   |
//! | numbers then units | `a * f = c : u > v ;`   |
//! | integrated         | `a u * f = c v ;`       |
//!
//! Going along a rule as the prompt states it multiplies by the stated
//! factor. Going against it divides by the same factor.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solution::{implied_plan, FinalAnswer, Op, ParsedSolution, Step};
use crate::ucgraph::{ConversionGraph, ProblemInstance, RESERVED_TOKENS};

pub const RULE: &str = "R";
pub const QUERY: &str = "Q";
pub const PLAN: &str = "P";
pub const ARROW: &str = ">";
pub const COLON: &str = ":";
pub const END: &str = ";";
pub const EQUALS: &str = "=";
pub const PLAN_MODE: &str = "#plan";
pub const CALC_MODE: &str = "#calc";
pub const ANSWER_OPEN: &str = "<S>";
pub const ANSWER_CLOSE: &str = "</S>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStyle {
    NumericOnly,
    UnitsThenNumbers,
    NumbersThenUnits,
    Integrated,
}

impl StepStyle {
    pub const ALL: [StepStyle; 4] =
        [StepStyle::NumericOnly, StepStyle::UnitsThenNumbers, StepStyle::NumbersThenUnits, StepStyle::Integrated];

    pub fn has_units(self) -> bool {
        self != StepStyle::NumericOnly
    }

    fn suffix(self) -> Option<&'static str> {
        match self {
            StepStyle::NumericOnly => None,
            StepStyle::UnitsThenNumbers => Some("utn"),
            StepStyle::NumbersThenUnits => Some("ntu"),
            StepStyle::Integrated => Some("int"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultitaskMode {
    None,
    PlanOnly,
    CalcOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormatSpec {
    pub step_style: StepStyle,
    /// Target starts with the relational plan `P u0 .. uL ;`.
    pub plan_prefix: bool,
    pub multitask_mode: MultitaskMode,
    /// Prompt ends with the ground-truth plan; the target then omits it.
    pub gt_plan_in_prompt: bool,
}

impl FormatSpec {
    pub fn new(step_style: StepStyle) -> Self {
        FormatSpec { step_style, plan_prefix: false, multitask_mode: MultitaskMode::None, gt_plan_in_prompt: false }
    }

    /// Whether the target begins with a plan the model writes itself.
    pub fn target_has_plan_prefix(&self) -> bool {
        self.plan_prefix && self.multitask_mode == MultitaskMode::None && !self.gt_plan_in_prompt
    }

    /// Whether outputs in this format say anything about the plan.
    pub fn carries_plan(&self) -> bool {
        self.multitask_mode == MultitaskMode::PlanOnly || self.target_has_plan_prefix() || self.step_style.has_units()
    }
}

/// A whitespace-tokenized sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new() -> Self {
        TokenSequence(Vec::new())
    }

    pub fn push(&mut self, tok: impl Into<String>) {
        self.0.push(tok.into());
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extend(&mut self, other: &TokenSequence) {
        self.0.extend(other.0.iter().cloned());
    }
}

impl FromStr for TokenSequence {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(TokenSequence(s.split_whitespace().map(str::to_owned).collect()))
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl From<Vec<String>> for TokenSequence {
    fn from(v: Vec<String>) -> Self {
        TokenSequence(v)
    }
}

/// Every token a well-formed sequence over `graph` may contain.
pub fn vocabulary(graph: &ConversionGraph) -> BTreeSet<String> {
    let mut vocab: BTreeSet<String> = RESERVED_TOKENS.iter().map(|s| s.to_string()).collect();
    vocab.extend(graph.modulus().residues().map(|r| r.to_string()));
    vocab.extend(graph.units().iter().map(|u| u.label.clone()));
    vocab
}

pub fn render_prompt(problem: &ProblemInstance, spec: &FormatSpec) -> TokenSequence {
    let g = &problem.graph;
    let m = g.modulus();
    let mut out = TokenSequence::new();
    for &idx in &problem.rule_order {
        let stated = g.rules()[idx].stated(m);
        out.push(RULE);
        out.push(g.label(stated.from));
        out.push(g.label(stated.to));
        out.push(stated.factor.to_string());
        out.push(END);
    }
    out.push(QUERY);
    out.push(problem.source_qty.to_string());
    out.push(problem.source_label());
    out.push(ARROW);
    out.push(problem.target_label());
    out.push(COLON);
    if spec.gt_plan_in_prompt {
        push_plan(&mut out, problem);
    }
    match spec.multitask_mode {
        MultitaskMode::None => {}
        MultitaskMode::PlanOnly => out.push(PLAN_MODE),
        MultitaskMode::CalcOnly => out.push(CALC_MODE),
    }
    out
}

fn push_plan(out: &mut TokenSequence, problem: &ProblemInstance) {
    out.push(PLAN);
    for &u in &problem.canonical_plan {
        out.push(problem.graph.label(u));
    }
    out.push(END);
}

/// Ground-truth steps along the canonical plan, with factors as the prompt
/// states them.
pub fn ground_truth_steps(problem: &ProblemInstance) -> Vec<Step> {
    let g = &problem.graph;
    let m = g.modulus();
    let mut qty = problem.source_qty;
    let mut steps = Vec::with_capacity(problem.path_len());
    for pair in problem.canonical_plan.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let stated = g.rule_between(u, v).expect("plan follows rules").stated(m);
        let op = if stated.from == u { Op::Mul } else { Op::Div };
        let factor = op.effective_factor(stated.factor, m).expect("nonzero factor");
        let next = m.mul(qty, factor);
        steps.push(Step {
            src_unit: Some(g.label(u).to_owned()),
            dst_unit: Some(g.label(v).to_owned()),
            lhs: qty.get(),
            op,
            rhs: stated.factor.get(),
            result: next.get(),
        });
        qty = next;
    }
    steps
}

/// The structure that parsing the rendered target must reproduce.
pub fn ground_truth_solution(problem: &ProblemInstance, spec: &FormatSpec) -> ParsedSolution {
    let plan: Vec<String> = problem.canonical_plan.iter().map(|&u| problem.graph.label(u).to_owned()).collect();
    if spec.multitask_mode == MultitaskMode::PlanOnly {
        return ParsedSolution { plan_units: Some(plan), steps: Vec::new(), final_answer: None };
    }
    let mut steps = ground_truth_steps(problem);
    if !spec.step_style.has_units() {
        for s in &mut steps {
            s.src_unit = None;
            s.dst_unit = None;
        }
    }
    let plan_units = if spec.target_has_plan_prefix() { Some(plan) } else { implied_plan(&steps) };
    ParsedSolution {
        plan_units,
        steps,
        final_answer: Some(FinalAnswer { qty: problem.gt_answer.get(), unit: problem.target_label().to_owned() }),
    }
}

pub fn render_step(out: &mut TokenSequence, step: &Step, style: StepStyle) {
    let src = step.src_unit.as_deref().unwrap_or_default();
    let dst = step.dst_unit.as_deref().unwrap_or_default();
    let arith = |out: &mut TokenSequence| {
        out.push(step.lhs.to_string());
        out.push(step.op.token());
        out.push(step.rhs.to_string());
        out.push(EQUALS);
        out.push(step.result.to_string());
    };
    match style {
        StepStyle::NumericOnly => arith(out),
        StepStyle::UnitsThenNumbers => {
            out.push(src);
            out.push(ARROW);
            out.push(dst);
            out.push(COLON);
            arith(out);
        }
        StepStyle::NumbersThenUnits => {
            arith(out);
            out.push(COLON);
            out.push(src);
            out.push(ARROW);
            out.push(dst);
        }
        StepStyle::Integrated => {
            out.push(step.lhs.to_string());
            out.push(src);
            out.push(step.op.token());
            out.push(step.rhs.to_string());
            out.push(EQUALS);
            out.push(step.result.to_string());
            out.push(dst);
        }
    }
    out.push(END);
}

pub fn render_target(problem: &ProblemInstance, spec: &FormatSpec) -> TokenSequence {
    let mut out = TokenSequence::new();
    if spec.multitask_mode == MultitaskMode::PlanOnly {
        push_plan(&mut out, problem);
        return out;
    }
    if spec.target_has_plan_prefix() {
        push_plan(&mut out, problem);
    }
    for step in ground_truth_steps(problem) {
        render_step(&mut out, &step, spec.step_style);
    }
    out.push(ANSWER_OPEN);
    out.push(problem.gt_answer.to_string());
    out.push(problem.target_label());
    out.push(ANSWER_CLOSE);
    out
}

/// How plans enter a training condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlanMode {
    /// Steps only.
    None,
    /// Plan first, then steps.
    Prefix,
    /// Prompted for either the plan or the steps.
    Multitask,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown condition code {0:?}")]
pub struct UnknownCondition(pub String);

/// A training regime: step style plus how the plan is produced.
///
/// Codes: `NN` and `RNRN-{utn,ntu,int}` (no plan), `RRNN` and
/// `RRNN-{utn,ntu,int}` (plan first), `RRxNN` and `RRxNN-{utn,ntu,int}`
/// (multitask). Dataset records add `-plan` / `-calc` for the two multitask
/// halves and `+gtplan` for prompts that include the ground-truth plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition {
    pub style: StepStyle,
    pub plan: PlanMode,
}

impl Condition {
    pub fn all() -> Vec<Condition> {
        let mut out = Vec::new();
        for plan in [PlanMode::None, PlanMode::Prefix, PlanMode::Multitask] {
            for style in StepStyle::ALL {
                out.push(Condition { style, plan });
            }
        }
        out
    }

    pub fn code(&self) -> String {
        let base = match (self.plan, self.style) {
            (PlanMode::None, StepStyle::NumericOnly) => "NN",
            (PlanMode::None, _) => "RNRN",
            (PlanMode::Prefix, _) => "RRNN",
            (PlanMode::Multitask, _) => "RRxNN",
        };
        match self.style.suffix() {
            Some(s) => format!("{base}-{s}"),
            None => base.to_owned(),
        }
    }

    /// Whether the model is trained to write a plan, so that prompting it
    /// with the ground-truth plan makes sense.
    pub fn uses_plan(&self) -> bool {
        self.plan != PlanMode::None
    }

    /// Format specs for the records of one problem, paired with each
    /// record's condition code.
    pub fn specs(&self) -> Vec<(String, FormatSpec)> {
        let code = self.code();
        let base = FormatSpec::new(self.style);
        match self.plan {
            PlanMode::None => vec![(code, base)],
            PlanMode::Prefix => vec![(code, FormatSpec { plan_prefix: true, ..base })],
            PlanMode::Multitask => vec![
                (format!("{code}-plan"), FormatSpec { multitask_mode: MultitaskMode::PlanOnly, ..base }),
                (format!("{code}-calc"), FormatSpec { multitask_mode: MultitaskMode::CalcOnly, ..base }),
            ],
        }
    }

    /// Spec for prompts that carry the ground-truth plan. `None` for
    /// conditions that never learn to use a plan.
    pub fn gt_plan_spec(&self) -> Option<(String, FormatSpec)> {
        let base = FormatSpec { gt_plan_in_prompt: true, ..FormatSpec::new(self.style) };
        match self.plan {
            PlanMode::None => None,
            PlanMode::Prefix => Some((format!("{}+gtplan", self.code()), FormatSpec { plan_prefix: true, ..base })),
            PlanMode::Multitask => Some((
                format!("{}-calc+gtplan", self.code()),
                FormatSpec { multitask_mode: MultitaskMode::CalcOnly, ..base },
            )),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for Condition {
    type Err = UnknownCondition;

    fn from_str(code: &str) -> Result<Self, Self::Err> {
        Condition::all().into_iter().find(|c| c.code() == code).ok_or_else(|| UnknownCondition(code.to_owned()))
    }
}

/// Resolves a record-level condition code (as found in datasets and
/// prediction files) to the condition and the spec its outputs follow.
///
/// A bare multitask code means its `-calc` half. `gt_plan` forces the
/// ground-truth-plan variant even without the `+gtplan` suffix.
pub fn resolve_record_code(code: &str, gt_plan: bool) -> Result<(Condition, FormatSpec), UnknownCondition> {
    let unknown = || UnknownCondition(code.to_owned());
    let (rest, gt_suffix) = match code.strip_suffix("+gtplan") {
        Some(rest) => (rest, true),
        None => (code, false),
    };
    let (base, mode) = if let Some(b) = rest.strip_suffix("-plan") {
        (b, Some(MultitaskMode::PlanOnly))
    } else if let Some(b) = rest.strip_suffix("-calc") {
        (b, Some(MultitaskMode::CalcOnly))
    } else {
        (rest, None)
    };
    let cond: Condition = base.parse().map_err(|_| unknown())?;
    if mode.is_some() && cond.plan != PlanMode::Multitask {
        return Err(unknown());
    }
    if gt_suffix || gt_plan {
        if mode == Some(MultitaskMode::PlanOnly) {
            return Err(unknown());
        }
        return cond.gt_plan_spec().map(|(_, s)| (cond, s)).ok_or_else(unknown);
    }
    let spec = match mode {
        Some(m) => FormatSpec { multitask_mode: m, ..FormatSpec::new(cond.style) },
        None => cond
            .specs()
            .into_iter()
            .map(|(_, s)| s)
            .find(|s| s.multitask_mode != MultitaskMode::PlanOnly)
            .expect("every condition has a step-producing spec"),
    };
    Ok((cond, spec))
}

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub problem_id: String,
    pub condition: String,
    pub prompt: String,
    pub target: String,
}

fn record(problem: &ProblemInstance, code: String, spec: &FormatSpec) -> DatasetRecord {
    DatasetRecord {
        problem_id: problem.problem_id.clone(),
        condition: code,
        prompt: render_prompt(problem, spec).to_string(),
        target: render_target(problem, spec).to_string(),
    }
}

/// All records `condition` produces for one problem: one, or two for
/// multitask conditions.
pub fn render_pair(problem: &ProblemInstance, condition: &Condition) -> Vec<DatasetRecord> {
    condition.specs().into_iter().map(|(code, spec)| record(problem, code, &spec)).collect()
}

/// The ground-truth-plan prompted record, for conditions that use plans.
pub fn render_gt_plan_pair(problem: &ProblemInstance, condition: &Condition) -> Option<DatasetRecord> {
    condition.gt_plan_spec().map(|(code, spec)| record(problem, code, &spec))
}

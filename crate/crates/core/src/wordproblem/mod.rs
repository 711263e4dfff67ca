//! Word-problem solutions: recomposing step-annotated records into the
//! training formats, and the calculator and answer conventions they use.
//!
//! Every equation line is a calculator annotation `<<expr=result>>`, and a
//! solution ends with `#### value`.

mod answer;
mod calc;
mod expr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use answer::{extract_answer, normalize_number, AnswerError, ANSWER_MARKER};
pub use calc::{fill_calc_annotations, CalcOutcome, Mismatch, SpanError};
pub use expr::{eval_expr, format_decimal, parse_decimal, ExprError, DISPLAY_DIGITS};

use crate::ucformat::{CALC_MODE, PLAN_MODE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepAnnotation {
    /// Sub-question asking for this step's intermediate answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub socratic: Option<String>,
    /// Abstract relation between the quantities this step combines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    /// The step as written in the original solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prose: Option<String>,
    /// `expr=result`.
    pub equation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedProblem {
    pub id: String,
    pub question: String,
    pub steps: Vec<StepAnnotation>,
    pub final_answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WpFormat {
    AnswerOnly,
    Original,
    EquationOnly,
    SocraticEqnAuxFirst,
    SocraticEqnInterleaved,
    RelationEqnAuxFirst,
    RelationEqnInterleaved,
    RelationMultitaskPlan,
    RelationMultitaskCalc,
}

impl WpFormat {
    pub const ALL: [WpFormat; 9] = [
        WpFormat::AnswerOnly,
        WpFormat::Original,
        WpFormat::EquationOnly,
        WpFormat::SocraticEqnAuxFirst,
        WpFormat::SocraticEqnInterleaved,
        WpFormat::RelationEqnAuxFirst,
        WpFormat::RelationEqnInterleaved,
        WpFormat::RelationMultitaskPlan,
        WpFormat::RelationMultitaskCalc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WpFormat::AnswerOnly => "answer_only",
            WpFormat::Original => "original",
            WpFormat::EquationOnly => "equation_only",
            WpFormat::SocraticEqnAuxFirst => "socratic_eqn_aux_first",
            WpFormat::SocraticEqnInterleaved => "socratic_eqn_interleaved",
            WpFormat::RelationEqnAuxFirst => "relation_eqn_aux_first",
            WpFormat::RelationEqnInterleaved => "relation_eqn_interleaved",
            WpFormat::RelationMultitaskPlan => "relation_multitask_plan",
            WpFormat::RelationMultitaskCalc => "relation_multitask_calc",
        }
    }

    /// Which auxiliary line, if any, accompanies the equations.
    fn aux(self) -> Option<AnnotationKind> {
        match self {
            WpFormat::SocraticEqnAuxFirst | WpFormat::SocraticEqnInterleaved => Some(AnnotationKind::Socratic),
            WpFormat::RelationEqnAuxFirst | WpFormat::RelationEqnInterleaved | WpFormat::RelationMultitaskPlan => {
                Some(AnnotationKind::Relation)
            }
            WpFormat::Original => Some(AnnotationKind::Prose),
            _ => None,
        }
    }
}

impl fmt::Display for WpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown word-problem format {0:?}")]
pub struct UnknownFormat(pub String);

impl FromStr for WpFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WpFormat::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| UnknownFormat(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Socratic,
    Relation,
    Prose,
}

impl fmt::Display for AnnotationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnnotationKind::Socratic => "socratic",
            AnnotationKind::Relation => "relation",
            AnnotationKind::Prose => "prose",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step_index} has no {kind} annotation")]
pub struct MissingAnnotation {
    pub kind: AnnotationKind,
    pub step_index: usize,
}

/// One composed example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedRecord {
    pub record_id: String,
    pub format: WpFormat,
    pub prompt: String,
    pub target: String,
}

impl StepAnnotation {
    fn annotation(&self, kind: AnnotationKind) -> Option<&str> {
        match kind {
            AnnotationKind::Socratic => self.socratic.as_deref(),
            AnnotationKind::Relation => self.relation.as_deref(),
            AnnotationKind::Prose => self.prose.as_deref(),
        }
    }

    fn equation_line(&self) -> String {
        format!("{}{}{}", calc::OPEN, self.equation, calc::CLOSE)
    }
}

/// Lays out one record in `fmt`. Lines are joined with `\n`.
///
/// Auxiliary-first formats put every auxiliary line before every equation;
/// interleaved formats alternate them step by step. The multitask halves
/// share the question and differ in the trailing mode tag: `#plan` asks
/// for the relations alone, `#calc` for the equations and answer.
pub fn compose(record: &AnnotatedProblem, fmt: WpFormat) -> Result<ComposedRecord, MissingAnnotation> {
    let aux = match fmt.aux() {
        Some(kind) => record
            .steps
            .iter()
            .enumerate()
            .map(|(step_index, s)| s.annotation(kind).ok_or(MissingAnnotation { kind, step_index }))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let equations: Vec<String> = record.steps.iter().map(StepAnnotation::equation_line).collect();
    let answer = format!("{ANSWER_MARKER} {}", record.final_answer);

    let mut lines: Vec<&str> = Vec::new();
    match fmt {
        WpFormat::AnswerOnly => {}
        WpFormat::Original | WpFormat::RelationMultitaskPlan => lines.extend(&aux),
        WpFormat::EquationOnly | WpFormat::RelationMultitaskCalc => lines.extend(equations.iter().map(String::as_str)),
        WpFormat::SocraticEqnAuxFirst | WpFormat::RelationEqnAuxFirst => {
            lines.extend(&aux);
            lines.extend(equations.iter().map(String::as_str));
        }
        WpFormat::SocraticEqnInterleaved | WpFormat::RelationEqnInterleaved => {
            for (a, e) in aux.iter().zip(&equations) {
                lines.push(a);
                lines.push(e);
            }
        }
    }
    if fmt != WpFormat::RelationMultitaskPlan {
        lines.push(&answer);
    }

    let prompt = match fmt {
        WpFormat::RelationMultitaskPlan => format!("{}\n{PLAN_MODE}", record.question),
        WpFormat::RelationMultitaskCalc => format!("{}\n{CALC_MODE}", record.question),
        _ => record.question.clone(),
    };
    Ok(ComposedRecord { record_id: record.id.clone(), format: fmt, prompt, target: lines.join("\n") })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("record has no steps")]
    NoSteps,
    #[error("step {0}: equation has no `=`")]
    MissingEquals(usize),
    #[error("step {step_index}: {error}")]
    Expr { step_index: usize, error: ExprError },
    #[error("step {step_index}: {expr} is {expected}, not {claimed}")]
    WrongResult { step_index: usize, expr: String, claimed: String, expected: String },
    #[error("final answer {claimed} differs from the last step's {expected}")]
    WrongFinalAnswer { claimed: String, expected: String },
}

/// Checks that every equation evaluates to its stated result and the last
/// result is the final answer.
pub fn check_record(record: &AnnotatedProblem) -> Result<(), RecordError> {
    let mut last = None;
    for (step_index, step) in record.steps.iter().enumerate() {
        let (expr, claimed) = step.equation.rsplit_once('=').ok_or(RecordError::MissingEquals(step_index))?;
        let expected = format_decimal(&eval_expr(expr).map_err(|error| RecordError::Expr { step_index, error })?);
        if normalize_number(claimed.trim()).as_deref() != Some(expected.as_str()) {
            return Err(RecordError::WrongResult {
                step_index,
                expr: expr.to_owned(),
                claimed: claimed.to_owned(),
                expected,
            });
        }
        last = Some(expected);
    }
    let expected = last.ok_or(RecordError::NoSteps)?;
    if normalize_number(&record.final_answer).as_deref() != Some(expected.as_str()) {
        return Err(RecordError::WrongFinalAnswer { claimed: record.final_answer.clone(), expected });
    }
    Ok(())
}

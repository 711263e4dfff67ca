//! Per-output grading and the six-way accuracy breakdown:
//!
//! 1. overall accuracy (own plan)
//! 2. accuracy when prompted with the ground-truth plan
//! 3. plan accuracy (own plan connects source to target)
//! 4. accuracy when the own plan is valid
//! 5. accuracy when the own plan is invalid
//! 6. ground-truth-plan accuracy on problems whose own plan is invalid
//!
//! Conditional metrics over an empty event are reported as not applicable
//! rather than zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ucformat::{resolve_record_code, FormatSpec, MultitaskMode, TokenSequence, UnknownCondition};
use crate::ucgraph::ProblemInstance;
use crate::ucparse::{extract_final_answer, parse_solution, validate_plan, PredictionRecord, Variant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("prediction for {prediction} graded against problem {problem}")]
    IdMismatch { problem: String, prediction: String },
    #[error("no {0} records")]
    MissingVariant(Variant),
    #[error("more than one {variant} record for problem {problem_id}")]
    DuplicateRecord { problem_id: String, variant: Variant },
    #[error("records mix conditions {0:?} and {1:?}")]
    MixedConditions(String, String),
    #[error(transparent)]
    UnknownCondition(#[from] UnknownCondition),
}

/// Which half of a multitask condition an output answers. Other conditions
/// produce `Full` outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputPart {
    #[default]
    Full,
    Plan,
    Calc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub problem_id: String,
    pub condition: String,
    pub variant: Variant,
    #[serde(default)]
    pub part: OutputPart,
    /// Which model run (seed) produced the output.
    #[serde(default)]
    pub run: usize,
    pub answer_correct: bool,
    /// Absent for formats that say nothing about the plan.
    pub plan_valid: Option<bool>,
    pub parse_ok: bool,
}

/// Grading key, output half and output layout for a prediction's
/// condition code.
///
/// Every record of one model shares the bare condition code as key, so
/// own and ground-truth-plan outputs, and the two multitask halves, pair up
/// in [`compute_metrics`].
pub fn grading_condition(code: &str, variant: Variant) -> Result<(String, OutputPart, FormatSpec), UnknownCondition> {
    let (cond, spec) = resolve_record_code(code, variant == Variant::GtPlanPrompted)?;
    let part = match spec.multitask_mode {
        MultitaskMode::None => OutputPart::Full,
        MultitaskMode::PlanOnly => OutputPart::Plan,
        MultitaskMode::CalcOnly => OutputPart::Calc,
    };
    Ok((cond.code(), part, spec))
}

/// Grades raw output tokens.
///
/// Correctness depends only on the `<S> .. </S>` span; broken intermediate
/// steps never turn a correct answer into a wrong one. Outputs that fail to
/// parse count as having an invalid plan.
pub fn grade_tokens<S: AsRef<str>>(
    problem: &ProblemInstance,
    tokens: &[S],
    spec: &FormatSpec,
    condition: &str,
    variant: Variant,
    part: OutputPart,
) -> GradeRecord {
    let graph = &problem.graph;
    let answer_correct = extract_final_answer(tokens, graph)
        .map(|a| a.qty == problem.gt_answer.get() && a.unit == problem.target_label())
        .unwrap_or(false);
    let parsed = parse_solution(tokens, spec, graph);
    let plan_valid = spec.carries_plan().then(|| match &parsed {
        Ok(sol) => sol
            .plan_units
            .as_ref()
            .is_some_and(|plan| validate_plan(plan, graph, problem.source_unit, problem.target_unit)),
        Err(_) => false,
    });
    GradeRecord {
        problem_id: problem.problem_id.clone(),
        condition: condition.to_owned(),
        variant,
        part,
        run: 0,
        answer_correct,
        plan_valid,
        parse_ok: parsed.is_ok(),
    }
}

/// Grades one prediction record. Outputs longer than `max_tokens` are cut
/// at the cap before grading.
pub fn grade(
    problem: &ProblemInstance,
    prediction: &PredictionRecord,
    max_tokens: Option<usize>,
) -> Result<GradeRecord, MetricsError> {
    if problem.problem_id != prediction.problem_id {
        return Err(MetricsError::IdMismatch {
            problem: problem.problem_id.clone(),
            prediction: prediction.problem_id.clone(),
        });
    }
    let (key, part, spec) = grading_condition(&prediction.condition, prediction.variant)?;
    let seq: TokenSequence = prediction.output.parse().expect("infallible");
    let toks = seq.tokens();
    let toks = &toks[..max_tokens.unwrap_or(usize::MAX).min(toks.len())];
    Ok(grade_tokens(problem, toks, &spec, &key, prediction.variant, part))
}

/// A count-based fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    fn tally(&mut self, hit: bool) {
        self.den += 1;
        self.num += u64::from(hit);
    }

    /// `None` when the conditioning event never happened.
    pub fn fraction(&self) -> Option<f64> {
        (self.den > 0).then(|| self.num as f64 / self.den as f64)
    }

    fn add(self, other: Ratio) -> Ratio {
        Ratio { num: self.num + other.num, den: self.den + other.den }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub condition: String,
    pub overall_acc: Ratio,
    /// `None` without ground-truth-plan records.
    pub acc_given_gt_plan: Option<Ratio>,
    /// `None` for formats that carry no plan.
    pub plan_acc: Option<Ratio>,
    pub acc_when_plan_correct: Option<Ratio>,
    pub acc_when_plan_incorrect: Option<Ratio>,
    pub acc_gt_plan_when_own_plan_incorrect: Option<Ratio>,
}

impl MetricReport {
    pub const NAMES: [&'static str; 6] =
        ["overall", "gt_plan", "plan", "plan_correct", "plan_incorrect", "gt_plan_own_incorrect"];

    pub fn metrics(&self) -> [Option<Ratio>; 6] {
        [
            Some(self.overall_acc),
            self.acc_given_gt_plan,
            self.plan_acc,
            self.acc_when_plan_correct,
            self.acc_when_plan_incorrect,
            self.acc_gt_plan_when_own_plan_incorrect,
        ]
    }
}

/// Computes the six metrics for one condition and one run.
///
/// Needs at most one record per `(problem, variant, part)`; sample sets must
/// be reduced (for example by voting) first. For multitask conditions the
/// plan half decides plan validity and the calculation half the answer.
pub fn compute_metrics(grades: &[GradeRecord]) -> Result<MetricReport, MetricsError> {
    let condition = grades.first().map(|g| g.condition.as_str()).unwrap_or_default();
    let mut answers: [BTreeMap<&str, &GradeRecord>; 2] = Default::default();
    let mut plans: BTreeMap<&str, &GradeRecord> = BTreeMap::new();
    for g in grades {
        if g.condition != condition {
            return Err(MetricsError::MixedConditions(condition.to_owned(), g.condition.clone()));
        }
        let map = match (g.variant, g.part) {
            (Variant::Own, OutputPart::Plan) => &mut plans,
            // ground-truth-plan prompts never ask for a plan
            (Variant::GtPlanPrompted, OutputPart::Plan) => continue,
            (Variant::Own, _) => &mut answers[0],
            (Variant::GtPlanPrompted, _) => &mut answers[1],
        };
        if map.insert(g.problem_id.as_str(), g).is_some() {
            return Err(MetricsError::DuplicateRecord { problem_id: g.problem_id.clone(), variant: g.variant });
        }
    }
    let [own, gt] = answers;
    if own.is_empty() {
        return Err(MetricsError::MissingVariant(Variant::Own));
    }
    let own_plan = |id: &str| match plans.get(id) {
        Some(p) => p.plan_valid,
        None => own.get(id).and_then(|g| g.plan_valid),
    };

    let mut overall = Ratio::default();
    let mut plan = Ratio::default();
    let mut when_valid = Ratio::default();
    let mut when_invalid = Ratio::default();
    let mut has_plan = false;
    for (id, g) in &own {
        overall.tally(g.answer_correct);
        if let Some(valid) = own_plan(id) {
            has_plan = true;
            plan.tally(valid);
            if valid {
                when_valid.tally(g.answer_correct);
            } else {
                when_invalid.tally(g.answer_correct);
            }
        }
    }

    let (mut gt_acc, mut gt_rescue) = (Ratio::default(), Ratio::default());
    for (id, g) in &gt {
        gt_acc.tally(g.answer_correct);
        if own.contains_key(id) && own_plan(id) == Some(false) {
            gt_rescue.tally(g.answer_correct);
        }
    }
    let has_gt = !gt.is_empty();
    Ok(MetricReport {
        condition: condition.to_owned(),
        overall_acc: overall,
        acc_given_gt_plan: has_gt.then_some(gt_acc),
        plan_acc: has_plan.then_some(plan),
        acc_when_plan_correct: has_plan.then_some(when_valid),
        acc_when_plan_incorrect: has_plan.then_some(when_invalid),
        acc_gt_plan_when_own_plan_incorrect: (has_gt && has_plan).then_some(gt_rescue),
    })
}

/// One condition across model runs: pooled counts plus the spread of each
/// metric over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub pooled: MetricReport,
    pub n_seeds: usize,
    /// Mean of each metric's per-run fraction, over runs where it applies.
    pub mean: [Option<f64>; 6],
    /// Sample standard deviation across runs; `None` for fewer than two.
    pub std: [Option<f64>; 6],
}

pub fn summarize_runs(reports: &[MetricReport]) -> Option<ConditionSummary> {
    let first = reports.first()?;
    let mut pooled = first.clone();
    for r in &reports[1..] {
        let sum = |a: Option<Ratio>, b: Option<Ratio>| match (a, b) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or_default().add(b.unwrap_or_default())),
        };
        pooled.overall_acc = pooled.overall_acc.add(r.overall_acc);
        pooled.acc_given_gt_plan = sum(pooled.acc_given_gt_plan, r.acc_given_gt_plan);
        pooled.plan_acc = sum(pooled.plan_acc, r.plan_acc);
        pooled.acc_when_plan_correct = sum(pooled.acc_when_plan_correct, r.acc_when_plan_correct);
        pooled.acc_when_plan_incorrect = sum(pooled.acc_when_plan_incorrect, r.acc_when_plan_incorrect);
        pooled.acc_gt_plan_when_own_plan_incorrect =
            sum(pooled.acc_gt_plan_when_own_plan_incorrect, r.acc_gt_plan_when_own_plan_incorrect);
    }
    let mut mean = [None; 6];
    let mut std = [None; 6];
    for k in 0..6 {
        let xs: Vec<f64> = reports.iter().filter_map(|r| r.metrics()[k].and_then(|m| m.fraction())).collect();
        (mean[k], std[k]) = mean_std(&xs);
    }
    Some(ConditionSummary { condition: first.condition.clone(), pooled, n_seeds: reports.len(), mean, std })
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

/// Per-condition reports (one per run), plus conditions skipped for lack
/// of own-plan records.
pub type ConditionReports = (BTreeMap<String, Vec<MetricReport>>, Vec<String>);

/// Groups grades by `(condition, run)` and computes a report for each.
/// Groups with no own-plan records are skipped and listed in the second
/// return value.
pub fn reports_by_condition(grades: &[GradeRecord]) -> Result<ConditionReports, MetricsError> {
    let mut groups: BTreeMap<(String, usize), Vec<GradeRecord>> = BTreeMap::new();
    for g in grades {
        groups.entry((g.condition.clone(), g.run)).or_default().push(g.clone());
    }
    let mut out: BTreeMap<String, Vec<MetricReport>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for ((cond, run), group) in groups {
        match compute_metrics(&group) {
            Ok(report) => out.entry(cond).or_default().push(report),
            Err(MetricsError::MissingVariant(_)) => skipped.push(format!("{cond} (run {run})")),
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// CSV header matching [`summary_csv_row`].
pub fn summary_csv_header() -> Vec<String> {
    let mut cols = vec!["condition".to_owned()];
    for k in 1..=6 {
        cols.push(format!("metric_{k}_num"));
        cols.push(format!("metric_{k}_den"));
        cols.push(format!("metric_{k}_frac"));
    }
    cols.extend(["n_seeds", "mean", "std"].map(String::from));
    cols
}

/// One CSV row: pooled counts for every metric, then the number of runs and
/// the mean and standard deviation of overall accuracy across runs. Metrics
/// that do not apply leave their cells empty.
pub fn summary_csv_row(s: &ConditionSummary) -> Vec<String> {
    let mut row = vec![s.condition.clone()];
    for m in s.pooled.metrics() {
        match m {
            Some(r) => {
                row.push(r.num.to_string());
                row.push(r.den.to_string());
                row.push(fmt_opt(r.fraction()));
            }
            None => row.extend([String::new(), String::new(), String::new()]),
        }
    }
    row.push(s.n_seeds.to_string());
    row.push(fmt_opt(s.mean[0]));
    row.push(fmt_opt(s.std[0]));
    row
}

/// Plain-text table: one line per condition, percentages with the spread
/// across runs where there is one.
pub fn render_table(summaries: &[ConditionSummary]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "condition");
    for name in MetricReport::NAMES {
        let _ = write!(out, " {name:>22}");
    }
    out.push_str("  seeds\n");
    for s in summaries {
        let _ = write!(out, "{:<16}", s.condition);
        for k in 0..6 {
            let cell = match (s.mean[k], s.std[k]) {
                (Some(m), Some(sd)) => format!("{:.1}% ± {:.1}", m * 100.0, sd * 100.0),
                (Some(m), None) => format!("{:.1}%", m * 100.0),
                _ => "n/a".to_owned(),
            };
            let _ = write!(out, " {cell:>22}");
        }
        let _ = writeln!(out, "  {}", s.n_seeds);
    }
    out
}

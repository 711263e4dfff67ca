//! The pipeline stages. Each takes a validated [`RunConfig`] and writes its
//! outputs under `paths.out`; the returned summaries are for the terminal.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rayon::ThreadPool;
use relplan_core::metrics::{
    grade, render_table, reports_by_condition, summarize_runs, summary_csv_header, summary_csv_row, GradeRecord,
    MetricReport,
};
use relplan_core::ucformat::{render_gt_plan_pair, render_pair, Condition, TokenSequence};
use relplan_core::ucgraph::generate_problem;
use relplan_core::ucparse::extract_final_answer;
use relplan_core::voting::{Candidate, VoteBatch, VoteMethod, VoteRecord};
use relplan_core::wordproblem::{compose, fill_calc_annotations, AnnotatedProblem, ComposedRecord};
use relplan_core::{PredictionRecord, ProblemInstance, ProblemRecord, Variant};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{read_jsonl, to_line, write_csv, write_jsonl, write_lines};

pub const PROBLEMS_FILE: &str = "problems.jsonl";
pub const GRADES_FILE: &str = "grades.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_BY_SEED_FILE: &str = "metrics_by_seed.csv";
pub const VOTES_FILE: &str = "votes.jsonl";

fn pool(config: &RunConfig) -> Result<ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Data(format!("cannot start worker pool: {e}")))
}

fn out_dir(config: &RunConfig) -> PathBuf {
    config.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn required<'a>(path: &'a Option<PathBuf>, field: &str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| CliError::validation(field, "required"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSummary {
    pub train: usize,
    pub test: usize,
    pub files: Vec<PathBuf>,
}

/// Generates the train and test splits and renders every configured
/// condition for both. Test problems continue the train indices, so ids are
/// unique across splits; the test split also gets ground-truth-plan
/// prompts. Output is identical for any worker count.
pub fn gen(config: &RunConfig) -> Result<GenSummary, CliError> {
    config.validate()?;
    let pool = pool(config)?;
    let conditions = config.conditions()?;
    let out = out_dir(config);
    let mut files = Vec::new();
    let splits = [("train", 0, config.counts.train, false), ("test", config.counts.train, config.counts.test, true)];
    let mut sizes = [0; 2];
    for (k, (name, start, count, gt_plan)) in splits.into_iter().enumerate() {
        let problems = pool.install(|| {
            (start..start + count)
                .into_par_iter()
                .map(|i| {
                    generate_problem(&config.gen_params(i)).map_err(|e| CliError::Data(format!("problem {i}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
        })?;
        let dir = out.join(name);
        let path = dir.join(PROBLEMS_FILE);
        let lines: Vec<String> =
            pool.install(|| problems.par_iter().map(|p| to_line(&ProblemRecord::from(p))).collect());
        write_lines(&path, &lines)?;
        files.push(path);
        files.extend(render_conditions(&pool, &problems, &conditions, &dir, gt_plan)?);
        sizes[k] = problems.len();
    }
    Ok(GenSummary { train: sizes[0], test: sizes[1], files })
}

/// Writes `<code>.jsonl` per condition (both halves for multitask
/// conditions) and, with `gt_plan`, `<code>+gtplan.jsonl` for conditions
/// that use plans.
pub fn render_conditions(
    pool: &ThreadPool,
    problems: &[ProblemInstance],
    conditions: &[Condition],
    dir: &Path,
    gt_plan: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for cond in conditions {
        let lines: Vec<String> = pool.install(|| {
            problems.par_iter().flat_map_iter(|p| render_pair(p, cond).into_iter().map(|r| to_line(&r))).collect()
        });
        let path = dir.join(format!("{}.jsonl", cond.code()));
        write_lines(&path, &lines)?;
        files.push(path);
        if gt_plan && cond.uses_plan() {
            let lines: Vec<String> = pool.install(|| {
                problems.par_iter().filter_map(|p| render_gt_plan_pair(p, cond).map(|r| to_line(&r))).collect()
            });
            let path = dir.join(format!("{}+gtplan.jsonl", cond.code()));
            write_lines(&path, &lines)?;
            files.push(path);
        }
    }
    Ok(files)
}

pub fn load_problems(path: &Path) -> Result<Vec<ProblemInstance>, CliError> {
    let records: Vec<ProblemRecord> = read_jsonl(path)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            ProblemInstance::try_from(r).map_err(|e| CliError::BadRecord {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Renders an existing problem file.
pub fn render(config: &RunConfig, gt_plan: bool) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    let problems = load_problems(required(&config.paths.problems, "paths.problems")?)?;
    render_conditions(&pool(config)?, &problems, &config.conditions()?, &out_dir(config), gt_plan)
}

/// Samples of one `(problem, condition, variant)` from one run.
type GroupKey = (String, String, Variant);

fn group_samples(predictions: Vec<PredictionRecord>) -> BTreeMap<GroupKey, Vec<PredictionRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<PredictionRecord>> = BTreeMap::new();
    for p in predictions {
        groups.entry((p.problem_id.clone(), p.condition.clone(), p.variant)).or_default().push(p);
    }
    for samples in groups.values_mut() {
        samples.sort_by_key(|s| s.sample_index);
    }
    groups
}

fn capped_tokens(output: &str, cap: Option<usize>) -> Vec<String> {
    let seq: TokenSequence = output.parse().expect("infallible");
    let mut toks = seq.tokens().to_vec();
    toks.truncate(cap.unwrap_or(usize::MAX));
    toks
}

/// Votes over the samples whose answer span parses. `None` when none does.
fn vote_group(
    problem: &ProblemInstance,
    samples: &[PredictionRecord],
    method: VoteMethod,
    k: Option<usize>,
    cap: Option<usize>,
) -> Result<Option<(relplan_core::FinalAnswer, usize)>, CliError> {
    let candidates: Vec<(usize, Candidate)> = samples
        .iter()
        .enumerate()
        .filter_map(|(pos, s)| {
            extract_final_answer(&capped_tokens(&s.output, cap), &problem.graph)
                .ok()
                .map(|answer| (pos, Candidate { answer, score: s.score, sample_index: s.sample_index }))
        })
        .collect();
    if candidates.is_empty() {
        return Ok(None);
    }
    let batch = VoteBatch {
        problem_id: problem.problem_id.clone(),
        candidates: candidates.iter().map(|(_, c)| c.clone()).collect(),
    };
    let chosen = method.apply(&batch, k).map_err(|e| CliError::Data(format!("{}: {e}", problem.problem_id)))?;
    let first = candidates.iter().find(|(_, c)| c.answer == chosen).map(|(pos, _)| *pos).expect("winner has a voter");
    Ok(Some((chosen, first)))
}

fn lookup<'a>(problems: &'a HashMap<String, ProblemInstance>, id: &str) -> Result<&'a ProblemInstance, CliError> {
    problems.get(id).ok_or_else(|| CliError::UnknownProblemId(id.to_owned()))
}

fn index_problems(config: &RunConfig) -> Result<HashMap<String, ProblemInstance>, CliError> {
    let problems = load_problems(required(&config.paths.problems, "paths.problems")?)?;
    Ok(problems.into_iter().map(|p| (p.problem_id.clone(), p)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradeSummary {
    pub graded: usize,
    pub table: String,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Grades prediction files, one per model run, and writes grades plus
/// metric tables.
///
/// Each `(problem, condition, variant)` contributes one graded output per
/// run: with a voting method, the lowest-index sample carrying the voted
/// answer; otherwise the lowest-index sample.
pub fn grade_predictions(config: &RunConfig) -> Result<GradeSummary, CliError> {
    config.validate()?;
    if config.paths.predictions.is_empty() {
        return Err(CliError::validation("paths.predictions", "at least one prediction file is required"));
    }
    let problems = index_problems(config)?;
    let pool = pool(config)?;
    let cap = config.max_output_tokens;
    let mut grades = Vec::new();
    for (run, path) in config.paths.predictions.iter().enumerate() {
        let groups: Vec<_> = group_samples(read_jsonl(path)?).into_iter().collect();
        let graded: Vec<GradeRecord> = pool.install(|| {
            groups
                .par_iter()
                .map(|((id, _, _), samples)| {
                    let problem = lookup(&problems, id)?;
                    let pick = match config.voting.method {
                        Some(method) => {
                            vote_group(problem, samples, method, config.voting.k, cap)?.map_or(0, |(_, pos)| pos)
                        }
                        None => 0,
                    };
                    let mut g =
                        grade(problem, &samples[pick], cap).map_err(|e| CliError::Data(format!("{path:?}: {e}")))?;
                    g.run = run;
                    Ok(g)
                })
                .collect::<Result<Vec<_>, CliError>>()
        })?;
        grades.extend(graded);
    }
    let out = out_dir(config);
    let grades_path = out.join(GRADES_FILE);
    write_jsonl(&grades_path, &grades)?;
    let (table, warnings, mut files) = write_metrics(&grades, &out)?;
    files.insert(0, grades_path);
    Ok(GradeSummary { graded: grades.len(), table, warnings, files })
}

/// Recomputes metric tables from a grade file.
pub fn metrics(config: &RunConfig) -> Result<GradeSummary, CliError> {
    let grades: Vec<GradeRecord> = read_jsonl(required(&config.paths.grades, "paths.grades")?)?;
    let (table, warnings, files) = write_metrics(&grades, &out_dir(config))?;
    Ok(GradeSummary { graded: grades.len(), table, warnings, files })
}

fn per_seed_rows(reports: &BTreeMap<String, Vec<MetricReport>>) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["condition".to_owned(), "run".to_owned()];
    for k in 1..=6 {
        header.extend([format!("metric_{k}_num"), format!("metric_{k}_den"), format!("metric_{k}_frac")]);
    }
    let mut rows = Vec::new();
    for (cond, runs) in reports {
        for (run, r) in runs.iter().enumerate() {
            let mut row = vec![cond.clone(), run.to_string()];
            for m in r.metrics() {
                match m {
                    Some(m) => row.extend([
                        m.num.to_string(),
                        m.den.to_string(),
                        m.fraction().map(|f| format!("{f:.6}")).unwrap_or_default(),
                    ]),
                    None => row.extend([String::new(), String::new(), String::new()]),
                }
            }
            rows.push(row);
        }
    }
    (header, rows)
}

fn write_metrics(grades: &[GradeRecord], out: &Path) -> Result<(String, Vec<String>, Vec<PathBuf>), CliError> {
    let (reports, skipped) = reports_by_condition(grades).map_err(|e| CliError::Data(e.to_string()))?;
    let warnings = skipped.into_iter().map(|s| format!("{s}: no own-plan outputs; skipped")).collect();
    let summaries: Vec<_> = reports.values().filter_map(|runs| summarize_runs(runs)).collect();
    let rows: Vec<_> = summaries.iter().map(summary_csv_row).collect();
    let summary_path = out.join(METRICS_FILE);
    write_csv(&summary_path, &summary_csv_header(), &rows)?;
    let (header, rows) = per_seed_rows(&reports);
    let seed_path = out.join(METRICS_BY_SEED_FILE);
    write_csv(&seed_path, &header, &rows)?;
    Ok((render_table(&summaries), warnings, vec![summary_path, seed_path]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteSummary {
    pub decided: usize,
    /// Groups where no sample had a readable answer.
    pub undecided: usize,
    pub path: PathBuf,
}

/// One decision per `(problem, condition, variant)` across all prediction
/// files.
pub fn vote(config: &RunConfig) -> Result<VoteSummary, CliError> {
    config.validate()?;
    let method = config.voting.method.ok_or_else(|| CliError::validation("voting.method", "required"))?;
    let problems = index_problems(config)?;
    let mut predictions = Vec::new();
    for path in &config.paths.predictions {
        predictions.extend(read_jsonl::<PredictionRecord>(path)?);
    }
    let groups: Vec<_> = group_samples(predictions).into_iter().collect();
    let decisions: Vec<Option<VoteRecord>> = pool(config)?.install(|| {
        groups
            .par_iter()
            .map(|((id, cond, variant), samples)| {
                let problem = lookup(&problems, id)?;
                let decision = vote_group(problem, samples, method, config.voting.k, config.max_output_tokens)?;
                Ok(decision.map(|(answer, _)| VoteRecord {
                    condition: Some(cond.clone()),
                    variant: Some(*variant),
                    ..VoteRecord::new(id, method, config.voting.k, answer)
                }))
            })
            .collect::<Result<_, CliError>>()
    })?;
    let records: Vec<VoteRecord> = decisions.iter().flatten().cloned().collect();
    let path = out_dir(config).join(VOTES_FILE);
    write_jsonl(&path, &records)?;
    Ok(VoteSummary { decided: records.len(), undecided: decisions.len() - records.len(), path })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposeSummary {
    pub written: usize,
    /// `(record id, format, reason)` for records a format could not use.
    pub skipped: Vec<(String, String, String)>,
    pub files: Vec<PathBuf>,
}

/// Composes every record in every configured layout into `<format>.jsonl`.
/// Records lacking an annotation a layout needs are skipped for that layout.
pub fn wp_compose(config: &RunConfig) -> Result<ComposeSummary, CliError> {
    config.validate()?;
    let records: Vec<AnnotatedProblem> = read_jsonl(required(&config.paths.records, "paths.records")?)?;
    let out = out_dir(config);
    let mut summary = ComposeSummary { written: 0, skipped: Vec::new(), files: Vec::new() };
    for fmt in config.wp_format_list()? {
        let mut composed: Vec<ComposedRecord> = Vec::new();
        for rec in &records {
            match compose(rec, fmt) {
                Ok(c) => composed.push(c),
                Err(e) => summary.skipped.push((rec.id.clone(), fmt.to_string(), e.to_string())),
            }
        }
        let path = out.join(format!("{fmt}.jsonl"));
        write_jsonl(&path, &composed)?;
        summary.written += composed.len();
        summary.files.push(path);
    }
    Ok(summary)
}

/// Fills calculator annotations in `input` (stdin when `None`). Returns the
/// filled text and one JSON line per mismatch or evaluation error.
pub fn wp_calc(input: Option<&Path>) -> Result<(String, Vec<String>), CliError> {
    let text = match input {
        Some(path) => std::fs::read_to_string(path).map_err(CliError::io(path))?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(CliError::io("<stdin>"))?;
            s
        }
    };
    let outcome = fill_calc_annotations(&text);
    let mut report: Vec<String> = outcome
        .mismatches
        .iter()
        .map(|m| {
            json!({"kind": "mismatch", "offset": m.offset, "expr": m.expr, "claimed": m.claimed, "expected": m.expected})
                .to_string()
        })
        .collect();
    report.extend(outcome.errors.iter().map(|e| {
        json!({"kind": "error", "offset": e.offset, "expr": e.expr, "message": e.error.to_string()}).to_string()
    }));
    Ok((outcome.text, report))
}

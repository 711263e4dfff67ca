use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use relplan_core::voting::VoteMethod;

use crate::commands;
use crate::config::{PathLen, Preset, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "relplan", version, about = "Unit-conversion reasoning benchmark pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides that apply to every subcommand.
#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every random draw is keyed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cut model outputs to this many tokens before grading.
    #[arg(long, global = true)]
    max_output_tokens: Option<usize>,
    /// Condition codes, comma separated (e.g. `NN,RRNN-utn`).
    #[arg(long, global = true, value_delimiter = ',')]
    formats: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate train/test problems and render every condition.
    Gen(GenArgs),
    /// Render an existing problem file.
    Render {
        #[arg(long)]
        problems: Option<PathBuf>,
        /// Also write ground-truth-plan prompts.
        #[arg(long)]
        gt_plan: bool,
    },
    /// Grade prediction files (one per model run) and compute metrics.
    Grade {
        #[arg(long)]
        problems: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        predictions: Vec<PathBuf>,
        #[command(flatten)]
        voting: VoteArgs,
    },
    /// Recompute metric tables from a grade file.
    Metrics {
        #[arg(long)]
        grades: Option<PathBuf>,
    },
    /// Aggregate sampled answers into one decision per problem.
    Vote {
        #[arg(long)]
        problems: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        predictions: Vec<PathBuf>,
        #[command(flatten)]
        voting: VoteArgs,
    },
    /// Compose annotated word-problem records into training layouts.
    WpCompose {
        #[arg(long)]
        records: Option<PathBuf>,
        /// Layout names, comma separated.
        #[arg(long, value_delimiter = ',')]
        wp_formats: Option<Vec<String>>,
    },
    /// Fill and check `<<expr=>>` calculator annotations.
    WpCalc {
        /// Input text; stdin when absent.
        input: Option<PathBuf>,
        /// Write filled text here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct GenArgs {
    /// default, easy5, easy6, easy7, mod23 or mod53.
    #[arg(long)]
    preset: Option<String>,
    /// Number of training problems.
    #[arg(long)]
    train: Option<u64>,
    /// Number of test problems.
    #[arg(long)]
    test: Option<u64>,
    /// Units per graph.
    #[arg(long)]
    n_nodes: Option<usize>,
    /// Conversion rules per graph.
    #[arg(long)]
    n_edges: Option<usize>,
    /// One length, or `lo..hi` inclusive.
    #[arg(long)]
    path_len: Option<String>,
    /// Prime modulus for all arithmetic.
    #[arg(long)]
    modulus: Option<u64>,
}

#[derive(Debug, Args)]
struct VoteArgs {
    /// plurality, verifier_rerank, weighted_plurality or top_k.
    #[arg(long)]
    method: Option<String>,
    /// Number of top-scored samples that vote (top_k only).
    #[arg(long = "k", short = 'k')]
    k: Option<usize>,
}

impl VoteArgs {
    fn apply(self, config: &mut RunConfig) -> Result<(), CliError> {
        if let Some(m) = self.method {
            config.voting.method = Some(m.parse::<VoteMethod>().map_err(|e| CliError::validation("voting.method", e))?);
        }
        if self.k.is_some() {
            config.voting.k = self.k;
        }
        Ok(())
    }
}

fn parse_preset(s: &str) -> Result<Preset, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| CliError::validation("gen.preset", format!("unknown preset {s:?}")))
}

fn parse_path_len(s: &str) -> Result<PathLen, CliError> {
    let bad = || CliError::validation("gen.path_len", format!("expected N or LO..HI, got {s:?}"));
    match s.split_once("..") {
        Some((lo, hi)) => Ok(PathLen::Range([lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?])),
        None => Ok(PathLen::Fixed(s.parse().map_err(|_| bad())?)),
    }
}

/// Parses arguments, runs one subcommand, and writes its summary to `out`.
pub fn run<I, T>(args: I, out: &mut impl Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            write!(out, "{e}").map_err(CliError::io("<stdout>"))?;
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            return Err(CliError::validation("args", msg.lines().next().unwrap_or("invalid arguments")));
        }
    };
    let c = cli.common;
    let mut config = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    if let Some(w) = c.workers {
        config.workers = w;
    }
    if c.out.is_some() {
        config.paths.out = c.out;
    }
    if c.max_output_tokens.is_some() {
        config.max_output_tokens = c.max_output_tokens;
    }
    if let Some(f) = c.formats {
        config.formats = f;
    }

    let say = |out: &mut dyn Write, msg: String| writeln!(out, "{msg}").map_err(CliError::io("<stdout>"));
    match cli.command {
        Command::Gen(g) => {
            if let Some(p) = g.preset {
                config.apply_preset(parse_preset(&p)?);
            }
            if let Some(n) = g.train {
                config.counts.train = n;
            }
            if let Some(n) = g.test {
                config.counts.test = n;
            }
            if let Some(n) = g.n_nodes {
                config.gen.n_nodes = n;
            }
            if let Some(n) = g.n_edges {
                config.gen.n_edges = n;
            }
            if let Some(l) = g.path_len {
                config.gen.path_len = parse_path_len(&l)?;
            }
            if let Some(m) = g.modulus {
                config.gen.modulus = m;
            }
            let s = commands::gen(&config)?;
            say(out, format!("generated {} train and {} test problems, {} files", s.train, s.test, s.files.len()))
        }
        Command::Render { problems, gt_plan } => {
            if problems.is_some() {
                config.paths.problems = problems;
            }
            let files = commands::render(&config, gt_plan)?;
            say(out, format!("wrote {} files", files.len()))
        }
        Command::Grade { problems, predictions, voting } => {
            if problems.is_some() {
                config.paths.problems = problems;
            }
            if !predictions.is_empty() {
                config.paths.predictions = predictions;
            }
            voting.apply(&mut config)?;
            let s = commands::grade_predictions(&config)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            say(out, format!("graded {} outputs\n{}", s.graded, s.table))
        }
        Command::Metrics { grades } => {
            if grades.is_some() {
                config.paths.grades = grades;
            }
            let s = commands::metrics(&config)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            say(out, s.table)
        }
        Command::Vote { problems, predictions, voting } => {
            if problems.is_some() {
                config.paths.problems = problems;
            }
            if !predictions.is_empty() {
                config.paths.predictions = predictions;
            }
            voting.apply(&mut config)?;
            let s = commands::vote(&config)?;
            say(out, format!("{} decisions, {} groups without a readable answer", s.decided, s.undecided))
        }
        Command::WpCompose { records, wp_formats } => {
            if records.is_some() {
                config.paths.records = records;
            }
            if let Some(f) = wp_formats {
                config.wp_formats = f;
            }
            let s = commands::wp_compose(&config)?;
            for (id, fmt, why) in &s.skipped {
                eprintln!("warning: {id} skipped for {fmt}: {why}");
            }
            say(out, format!("composed {} records into {} files", s.written, s.files.len()))
        }
        Command::WpCalc { input, output } => {
            let (text, report) = commands::wp_calc(input.as_deref())?;
            for line in &report {
                eprintln!("{line}");
            }
            match output {
                Some(path) => std::fs::write(&path, text).map_err(CliError::io(path)),
                None => out.write_all(text.as_bytes()).map_err(CliError::io("<stdout>")),
            }
        }
    }
}

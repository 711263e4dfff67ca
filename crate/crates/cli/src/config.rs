//! Run configuration: a TOML file, then command-line overrides, then
//! validation. Every random choice derives from `seed`.

use std::path::{Path, PathBuf};

use rand::Rng;
use relplan_core::rng::{stream, Purpose};
use relplan_core::ucformat::Condition;
use relplan_core::ucgraph::GraphError;
use relplan_core::voting::VoteMethod;
use relplan_core::wordproblem::WpFormat;
use relplan_core::{GenParams, Modulus};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Uc,
    Wp,
}

/// Either one path length or an inclusive range drawn from per problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathLen {
    Fixed(usize),
    Range([usize; 2]),
}

impl PathLen {
    fn bounds(self) -> (usize, usize) {
        match self {
            PathLen::Fixed(l) => (l, l),
            PathLen::Range([lo, hi]) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Default,
    Easy5,
    Easy6,
    Easy7,
    Mod23,
    Mod53,
}

impl Preset {
    pub fn gen(self) -> GenConfig {
        let standard =
            GenConfig { preset: Some(self), n_nodes: 10, n_edges: 12, path_len: PathLen::Fixed(5), modulus: 5 };
        let easy = |n| GenConfig { n_nodes: n, n_edges: n, path_len: PathLen::Range([2, 3]), ..standard };
        match self {
            Preset::Default => standard,
            Preset::Easy5 => easy(5),
            Preset::Easy6 => easy(6),
            Preset::Easy7 => easy(7),
            Preset::Mod23 => GenConfig { modulus: 23, ..standard },
            Preset::Mod53 => GenConfig { modulus: 53, ..standard },
        }
    }
}

/// Graph and problem shape. A preset supplies the defaults; fields set
/// alongside it win.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub path_len: PathLen,
    pub modulus: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Preset::Default.gen()
    }
}

/// What the TOML `[gen]` table may contain.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenTable {
    preset: Option<Preset>,
    n_nodes: Option<usize>,
    n_edges: Option<usize>,
    path_len: Option<PathLen>,
    modulus: Option<u64>,
}

impl GenTable {
    fn resolve(self) -> GenConfig {
        let base = self.preset.unwrap_or(Preset::Default).gen();
        GenConfig {
            preset: self.preset,
            n_nodes: self.n_nodes.unwrap_or(base.n_nodes),
            n_edges: self.n_edges.unwrap_or(base.n_edges),
            path_len: self.path_len.unwrap_or(base.path_len),
            modulus: self.modulus.unwrap_or(base.modulus),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub train: u64,
    pub test: u64,
}

impl Default for Counts {
    fn default() -> Self {
        Counts { train: 10_000, test: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Problem file to read (render, grade, vote).
    pub problems: Option<PathBuf>,
    /// Prediction files, one per model run.
    pub predictions: Vec<PathBuf>,
    /// Grade file to read (metrics).
    pub grades: Option<PathBuf>,
    /// Word-problem records (wp-compose).
    pub records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Voting {
    pub method: Option<VoteMethod>,
    #[serde(rename = "K", alias = "k")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub seed: u64,
    pub gen: GenConfig,
    /// Condition codes to render and grade.
    pub formats: Vec<String>,
    /// Word-problem layouts to compose.
    pub wp_formats: Vec<String>,
    pub counts: Counts,
    pub paths: Paths,
    /// Model outputs are cut to this many tokens before grading.
    pub max_output_tokens: Option<usize>,
    pub voting: Voting,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Uc,
            seed: 0,
            gen: GenConfig::default(),
            formats: Condition::all().iter().map(Condition::code).collect(),
            wp_formats: WpFormat::ALL.iter().map(|f| f.name().to_owned()).collect(),
            counts: Counts::default(),
            paths: Paths::default(),
            max_output_tokens: None,
            voting: Voting::default(),
            workers: 1,
        }
    }
}

/// What the TOML file may contain; everything is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    task: Option<Task>,
    seed: Option<u64>,
    gen: Option<GenTable>,
    formats: Option<Vec<String>>,
    wp_formats: Option<Vec<String>>,
    counts: Option<Counts>,
    paths: Option<Paths>,
    max_output_tokens: Option<usize>,
    voting: Option<Voting>,
    workers: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("config[{}..{}]", s.start, s.end)).unwrap_or("config".into());
            CliError::validation(field, e.message())
        })?;
        let d = RunConfig::default();
        Ok(RunConfig {
            task: file.task.unwrap_or(d.task),
            seed: file.seed.unwrap_or(d.seed),
            gen: file.gen.unwrap_or_default().resolve(),
            formats: file.formats.unwrap_or(d.formats),
            wp_formats: file.wp_formats.unwrap_or(d.wp_formats),
            counts: file.counts.unwrap_or(d.counts),
            paths: file.paths.unwrap_or(d.paths),
            max_output_tokens: file.max_output_tokens,
            voting: file.voting.unwrap_or(d.voting),
            workers: file.workers.unwrap_or(d.workers),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text)
    }

    /// Replaces the generation block with a preset's values.
    pub fn apply_preset(&mut self, preset: Preset) {
        self.gen = preset.gen();
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(CliError::validation("workers", "must be >= 1"));
        }
        if self.counts.train == 0 {
            return Err(CliError::validation("counts.train", "must be >= 1"));
        }
        if self.counts.test == 0 {
            return Err(CliError::validation("counts.test", "must be >= 1"));
        }
        self.conditions()?;
        self.wp_format_list()?;
        if self.max_output_tokens == Some(0) {
            return Err(CliError::validation("max_output_tokens", "must be >= 1"));
        }
        if let Some(method) = self.voting.method {
            if method == VoteMethod::TopK && self.voting.k.is_none_or(|k| k == 0) {
                return Err(CliError::validation("voting.K", "top_k needs K >= 1"));
            }
        }
        Modulus::new(self.gen.modulus).map_err(|e| CliError::validation("gen.modulus", e))?;
        let (lo, hi) = self.gen.path_len.bounds();
        if lo == 0 || lo > hi {
            return Err(CliError::validation("gen.path_len", format!("bad range {lo}..={hi}")));
        }
        for path_len in [lo, hi] {
            self.params(0, path_len).validate().map_err(|e| {
                let field = match &e {
                    GraphError::InsufficientEdges { .. } | GraphError::TooManyEdges { .. } => "gen.n_edges",
                    GraphError::InvalidParams(msg) if msg.starts_with("path_len") => "gen.path_len",
                    _ => "gen.n_nodes",
                };
                CliError::validation(field, e)
            })?;
        }
        Ok(())
    }

    pub fn conditions(&self) -> Result<Vec<Condition>, CliError> {
        parse_list("formats", &self.formats)
    }

    pub fn wp_format_list(&self) -> Result<Vec<WpFormat>, CliError> {
        parse_list("wp_formats", &self.wp_formats)
    }

    fn params(&self, index: u64, path_len: usize) -> GenParams {
        GenParams {
            n_nodes: self.gen.n_nodes,
            n_edges: self.gen.n_edges,
            path_len,
            modulus: Modulus::new(self.gen.modulus).expect("validated"),
            seed: self.seed,
            problem_index: index,
        }
    }

    /// Generation parameters for problem `index`, with its path length drawn
    /// from its own stream when a range is configured.
    pub fn gen_params(&self, index: u64) -> GenParams {
        let (lo, hi) = self.gen.path_len.bounds();
        let path_len =
            if lo == hi { lo } else { stream(self.seed, index, Purpose::PathLength, 0).random_range(lo..=hi) };
        self.params(index, path_len)
    }
}

fn parse_list<T: std::str::FromStr>(field: &str, items: &[String]) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    if items.is_empty() {
        return Err(CliError::validation(field, "must not be empty"));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, s)| s.parse().map_err(|e| CliError::validation(format!("{field}[{i}]"), e)))
        .collect()
}

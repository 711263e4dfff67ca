//! Aggregating several sampled answers to one problem into a single answer.
//!
//! All methods break ties deterministically: between answers, the smaller
//! `(qty, unit)` wins; between candidates, the lower sample index.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solution::FinalAnswer;
use crate::ucparse::Variant;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VoteError {
    #[error("no candidates to vote over")]
    EmptyBatch,
    #[error("candidate {0} has no score")]
    MissingScores(usize),
    #[error("candidate {0} has a negative score")]
    NegativeScore(usize),
    #[error("candidate {0} has a non-finite score")]
    NonFiniteScore(usize),
    #[error("K = {k} outside 1..={n}")]
    BadK { k: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub answer: FinalAnswer,
    pub score: Option<f64>,
    pub sample_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteBatch {
    pub problem_id: String,
    pub candidates: Vec<Candidate>,
}

impl VoteBatch {
    fn nonempty(&self) -> Result<&[Candidate], VoteError> {
        if self.candidates.is_empty() {
            return Err(VoteError::EmptyBatch);
        }
        Ok(&self.candidates)
    }

    fn scores(&self) -> Result<Vec<f64>, VoteError> {
        let cands = self.nonempty()?;
        cands
            .iter()
            .enumerate()
            .map(|(i, c)| match c.score {
                None => Err(VoteError::MissingScores(i)),
                Some(s) if !s.is_finite() => Err(VoteError::NonFiniteScore(i)),
                Some(s) => Ok(s),
            })
            .collect()
    }
}

/// Highest-weight answer; ties go to the smallest answer.
fn argmax_answer<'a>(weights: impl IntoIterator<Item = (&'a FinalAnswer, f64)>) -> FinalAnswer {
    let mut totals: BTreeMap<&FinalAnswer, f64> = BTreeMap::new();
    for (answer, w) in weights {
        *totals.entry(answer).or_default() += w;
    }
    // BTreeMap iterates in ascending answer order, so strict `>` keeps the
    // smallest answer among equal totals.
    let mut best: Option<(&FinalAnswer, f64)> = None;
    for (answer, total) in totals {
        if best.is_none_or(|(_, b)| total > b) {
            best = Some((answer, total));
        }
    }
    best.expect("nonempty").0.clone()
}

/// The most frequent answer. Scores are ignored.
pub fn plurality(batch: &VoteBatch) -> Result<FinalAnswer, VoteError> {
    Ok(argmax_answer(batch.nonempty()?.iter().map(|c| (&c.answer, 1.0))))
}

/// The answer of the highest-scoring candidate.
pub fn verifier_rerank(batch: &VoteBatch) -> Result<FinalAnswer, VoteError> {
    let scores = batch.scores()?;
    let best = (0..scores.len())
        .max_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then(batch.candidates[b].sample_index.cmp(&batch.candidates[a].sample_index))
        })
        .expect("nonempty");
    Ok(batch.candidates[best].answer.clone())
}

/// The answer whose supporting candidates have the largest total score.
pub fn weighted_plurality(batch: &VoteBatch) -> Result<FinalAnswer, VoteError> {
    let scores = batch.scores()?;
    if let Some(i) = scores.iter().position(|&s| s < 0.0) {
        return Err(VoteError::NegativeScore(i));
    }
    Ok(argmax_answer(batch.candidates.iter().zip(scores).map(|(c, s)| (&c.answer, s))))
}

/// Plurality over the `k` highest-scoring candidates.
pub fn top_k_vote(batch: &VoteBatch, k: usize) -> Result<FinalAnswer, VoteError> {
    let scores = batch.scores()?;
    let n = scores.len();
    if k == 0 || k > n {
        return Err(VoteError::BadK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b].total_cmp(&scores[a]).then(batch.candidates[a].sample_index.cmp(&batch.candidates[b].sample_index))
    });
    Ok(argmax_answer(order[..k].iter().map(|&i| (&batch.candidates[i].answer, 1.0))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMethod {
    Plurality,
    VerifierRerank,
    WeightedPlurality,
    TopK,
}

impl VoteMethod {
    pub const ALL: [VoteMethod; 4] =
        [VoteMethod::Plurality, VoteMethod::VerifierRerank, VoteMethod::WeightedPlurality, VoteMethod::TopK];

    pub fn name(self) -> &'static str {
        match self {
            VoteMethod::Plurality => "plurality",
            VoteMethod::VerifierRerank => "verifier_rerank",
            VoteMethod::WeightedPlurality => "weighted_plurality",
            VoteMethod::TopK => "top_k",
        }
    }

    pub fn needs_scores(self) -> bool {
        self != VoteMethod::Plurality
    }

    /// Runs the method; `k` is required for [`VoteMethod::TopK`] and
    /// ignored otherwise.
    pub fn apply(self, batch: &VoteBatch, k: Option<usize>) -> Result<FinalAnswer, VoteError> {
        match self {
            VoteMethod::Plurality => plurality(batch),
            VoteMethod::VerifierRerank => verifier_rerank(batch),
            VoteMethod::WeightedPlurality => weighted_plurality(batch),
            VoteMethod::TopK => top_k_vote(batch, k.unwrap_or(0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown vote method {0:?}")]
pub struct UnknownMethod(pub String);

impl std::str::FromStr for VoteMethod {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VoteMethod::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| UnknownMethod(s.to_owned()))
    }
}

impl fmt::Display for VoteMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of voting output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub problem_id: String,
    /// Set when votes for several conditions share one file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    pub method: VoteMethod,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub chosen_qty: u64,
    pub chosen_unit: String,
}

impl VoteRecord {
    pub fn new(problem_id: &str, method: VoteMethod, k: Option<usize>, answer: FinalAnswer) -> Self {
        VoteRecord {
            problem_id: problem_id.to_owned(),
            condition: None,
            variant: None,
            method,
            k: (method == VoteMethod::TopK).then_some(k).flatten(),
            chosen_qty: answer.qty,
            chosen_unit: answer.unit,
        }
    }
}

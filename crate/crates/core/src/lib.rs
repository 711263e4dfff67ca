//! Generation, rendering, parsing, grading and vote aggregation for a
//! unit-conversion reasoning benchmark, plus word-problem solution
//! formatting and calculator annotations.

pub mod metrics;
pub mod modmath;
pub mod rng;
pub mod solution;
pub mod ucformat;
pub mod ucgraph;
pub mod ucparse;
pub mod voting;
pub mod wordproblem;

pub use metrics::{GradeRecord, MetricReport, Ratio};
pub use modmath::{mod_inv, traverse, Direction, Modulus, Residue};
pub use solution::{FinalAnswer, Op, ParsedSolution, Step};
pub use ucformat::{Condition, FormatSpec, MultitaskMode, StepStyle, TokenSequence};
pub use ucgraph::{ConversionGraph, GenParams, ProblemInstance, ProblemRecord};
pub use ucparse::{ParseError, ParseErrorKind, PredictionRecord, Variant};
pub use voting::{Candidate, VoteBatch, VoteMethod, VoteRecord};

//! The problem file format shared with rendering and the trainer: one JSON
//! object per line, fields in a fixed order, units referenced by label.

use serde::{Deserialize, Serialize};

use super::{ConversionGraph, ConversionRule, GraphError, Presentation, ProblemInstance};
use crate::modmath::Modulus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub src: String,
    pub dst: String,
    pub factor: u64,
    pub presentation: Presentation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub problem_id: String,
    pub modulus: u64,
    pub units: Vec<String>,
    pub rules: Vec<RuleRecord>,
    pub rule_order: Vec<usize>,
    pub source_unit: String,
    pub source_qty: u64,
    pub target_unit: String,
    pub canonical_plan: Vec<String>,
    pub gt_answer: u64,
}

impl From<&ProblemInstance> for ProblemRecord {
    fn from(p: &ProblemInstance) -> Self {
        let g = &p.graph;
        ProblemRecord {
            problem_id: p.problem_id.clone(),
            modulus: g.modulus().get(),
            units: g.units().iter().map(|u| u.label.clone()).collect(),
            rules: g
                .rules()
                .iter()
                .map(|r| RuleRecord {
                    src: g.label(r.src).to_owned(),
                    dst: g.label(r.dst).to_owned(),
                    factor: r.factor.get(),
                    presentation: r.presentation,
                })
                .collect(),
            rule_order: p.rule_order.clone(),
            source_unit: p.source_label().to_owned(),
            source_qty: p.source_qty.get(),
            target_unit: p.target_label().to_owned(),
            canonical_plan: p.canonical_plan.iter().map(|&u| g.label(u).to_owned()).collect(),
            gt_answer: p.gt_answer.get(),
        }
    }
}

impl TryFrom<ProblemRecord> for ProblemInstance {
    type Error = GraphError;

    /// Rebuilds and validates an instance: consistent graph, permutation
    /// `rule_order`, plan that is a shortest path, answer that matches.
    fn try_from(rec: ProblemRecord) -> Result<Self, Self::Error> {
        let m = Modulus::new(rec.modulus)?;
        let index_of = |label: &str| {
            rec.units.iter().position(|u| u == label).ok_or_else(|| GraphError::UnknownUnit(label.to_owned()))
        };
        let mut rules = Vec::with_capacity(rec.rules.len());
        for r in &rec.rules {
            rules.push(ConversionRule {
                src: index_of(&r.src)?,
                dst: index_of(&r.dst)?,
                factor: m.residue(r.factor)?,
                presentation: r.presentation,
            });
        }
        let source_unit = index_of(&rec.source_unit)?;
        let target_unit = index_of(&rec.target_unit)?;
        let canonical_plan = rec.canonical_plan.iter().map(|l| index_of(l)).collect::<Result<Vec<_>, _>>()?;
        let graph = ConversionGraph::from_parts(m, rec.units, rules)?;

        let mut seen = vec![false; graph.rules().len()];
        for &i in &rec.rule_order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(GraphError::InvalidProblem("rule_order is not a permutation".into()));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(GraphError::InvalidProblem("rule_order is not a permutation".into()));
        }

        let dist = graph.distances(source_unit)[target_unit];
        let plan_ok = canonical_plan.first() == Some(&source_unit)
            && canonical_plan.last() == Some(&target_unit)
            && canonical_plan.windows(2).all(|w| graph.has_edge(w[0], w[1]))
            && dist == Some(canonical_plan.len() - 1);
        if !plan_ok {
            return Err(GraphError::InvalidProblem("canonical_plan is not a shortest path".into()));
        }

        let source_qty = m.residue(rec.source_qty)?;
        let gt_answer = m.residue(rec.gt_answer)?;
        if graph.convert(source_qty, source_unit, target_unit) != gt_answer {
            return Err(GraphError::InvalidProblem("gt_answer does not match the graph".into()));
        }
        Ok(ProblemInstance {
            problem_id: rec.problem_id,
            graph,
            source_unit,
            target_unit,
            source_qty,
            rule_order: rec.rule_order,
            canonical_plan,
            gt_answer,
        })
    }
}

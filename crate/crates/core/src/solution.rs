//! Structured form of a unit-conversion solution. Rendering turns it into
//! tokens and parsing recovers it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::modmath::{mod_inv, Modulus, Residue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl Op {
    pub fn token(self) -> &'static str {
        match self {
            Op::Mul => "*",
            Op::Div => "/",
        }
    }

    pub fn from_token(tok: &str) -> Option<Op> {
        match tok {
            "*" => Some(Op::Mul),
            "/" => Some(Op::Div),
            _ => None,
        }
    }

    /// `lhs op rhs` over `Z_p*`; `/` multiplies by the inverse.
    pub fn apply(self, lhs: u64, rhs: u64, m: Modulus) -> Option<u64> {
        let lhs = m.residue(lhs).ok()?;
        let rhs = m.residue(rhs).ok()?;
        let rhs = match self {
            Op::Mul => rhs,
            Op::Div => mod_inv(rhs, m).ok()?,
        };
        Some(m.mul(lhs, rhs).get())
    }

    /// The multiplier this step actually applies.
    pub fn effective_factor(self, rhs: Residue, m: Modulus) -> Option<Residue> {
        match self {
            Op::Mul => Some(rhs),
            Op::Div => mod_inv(rhs, m).ok(),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One arithmetic step, `lhs op rhs = result`, optionally tagged with the
/// units it converts between.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub src_unit: Option<String>,
    pub dst_unit: Option<String>,
    pub lhs: u64,
    pub op: Op,
    pub rhs: u64,
    pub result: u64,
}

/// Ordered by quantity, then unit label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub qty: u64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedSolution {
    pub plan_units: Option<Vec<String>>,
    pub steps: Vec<Step>,
    pub final_answer: Option<FinalAnswer>,
}

/// Units visited by a sequence of unit-tagged steps, collapsing the shared
/// unit between consecutive steps. `None` if any step lacks units.
pub fn implied_plan(steps: &[Step]) -> Option<Vec<String>> {
    if steps.is_empty() {
        return None;
    }
    let mut plan: Vec<String> = Vec::with_capacity(steps.len() + 1);
    for step in steps {
        let (src, dst) = (step.src_unit.as_ref()?, step.dst_unit.as_ref()?);
        if plan.last() != Some(src) {
            plan.push(src.clone());
        }
        plan.push(dst.clone());
    }
    Some(plan)
}

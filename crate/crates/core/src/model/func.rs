//! Non-decreasing cost curves over unit segments, in list or step form.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::cost::{Cost, Rat};
use super::ModelError;

/// One constant piece of a step-form curve: the curve has `value` on all
/// segments up to and including `upto`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepPiece {
    pub upto: u64,
    pub value: Cost,
}

/// A cost curve `f` over segments `1..=m`, with `f(0) = 0` implicit.
///
/// `List` stores `f(1..=m)` explicitly; `Steps` stores maximal constant
/// pieces with strictly increasing values. Segment `j` has marginal cost
/// `g_j = f(j) - f(j-1)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum CostFunction {
    List { values: Vec<Cost> },
    Steps { pieces: Vec<StepPiece> },
}

/// One engine bucket worth of curve: segments `lo..=hi` share a constant
/// value; the whole marginal sits on segment `lo`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PieceView {
    pub lo: u64,
    pub hi: u64,
    pub marginal: Rat,
}

impl PieceView {
    pub fn width(&self) -> u64 {
        self.hi - self.lo + 1
    }
}

impl CostFunction {
    pub fn list(values: Vec<Cost>) -> Self {
        CostFunction::List { values }
    }

    pub fn list_ints(values: &[i64]) -> Self {
        CostFunction::List {
            values: values.iter().map(|&v| Cost::from_int(v)).collect(),
        }
    }

    pub fn steps(pieces: Vec<StepPiece>) -> Self {
        CostFunction::Steps { pieces }
    }

    /// Number of segments.
    pub fn m(&self) -> u64 {
        match self {
            CostFunction::List { values } => values.len() as u64,
            CostFunction::Steps { pieces } => pieces.last().map_or(0, |p| p.upto),
        }
    }

    /// `f(j)` for `j` in `0..=m`. `f(0) = 0`.
    pub fn value_at(&self, j: u64) -> Cost {
        if j == 0 {
            return Cost::zero();
        }
        match self {
            CostFunction::List { values } => values[j as usize - 1].clone(),
            CostFunction::Steps { pieces } => pieces
                .iter()
                .find(|p| j <= p.upto)
                .map(|p| p.value.clone())
                .expect("segment index within domain"),
        }
    }

    /// Marginal `g_j = f(j) - f(j-1)`. Infinite minus finite is infinite; a
    /// segment after an infinite one has marginal zero by convention.
    pub fn marginal(&self, j: u64) -> Cost {
        let prev = self.value_at(j - 1);
        let cur = self.value_at(j);
        match (cur, prev) {
            (Cost::Infinite, Cost::Infinite) => Cost::zero(),
            (Cost::Infinite, Cost::Finite(_)) => Cost::Infinite,
            (Cost::Finite(c), Cost::Finite(p)) => Cost::Finite(c - p),
            (Cost::Finite(_), Cost::Infinite) => {
                // decreasing through infinity; only reachable on invalid input
                Cost::Infinite
            }
        }
    }

    /// Drops every segment at or beyond the first infinite value, then caps
    /// the domain at `level_cap` segments. Collapses equal-valued adjacent
    /// step pieces so the step invariants keep holding.
    pub fn trimmed(&self, level_cap: u64) -> CostFunction {
        match self {
            CostFunction::List { values } => {
                let mut out = Vec::new();
                for v in values {
                    if v.is_infinite() || out.len() as u64 >= level_cap {
                        break;
                    }
                    out.push(v.clone());
                }
                CostFunction::List { values: out }
            }
            CostFunction::Steps { pieces } => {
                let mut out: Vec<StepPiece> = Vec::new();
                for p in pieces {
                    if p.value.is_infinite() {
                        break;
                    }
                    let upto = p.upto.min(level_cap);
                    if upto == 0 || (out.last().is_some_and(|q| upto <= q.upto)) {
                        break;
                    }
                    if let Some(last) = out.last_mut() {
                        if last.value == p.value {
                            last.upto = upto;
                            if p.upto >= level_cap {
                                break;
                            }
                            continue;
                        }
                    }
                    out.push(StepPiece {
                        upto,
                        value: p.value.clone(),
                    });
                    if p.upto >= level_cap {
                        break;
                    }
                }
                CostFunction::Steps { pieces: out }
            }
        }
    }

    /// Materializes a step-form curve as a list. Identity on list form.
    pub fn expand_steps_to_list(&self, cap: u64) -> Result<CostFunction, ModelError> {
        match self {
            CostFunction::List { .. } => Ok(self.clone()),
            CostFunction::Steps { .. } => {
                let m = self.m();
                if m > cap {
                    return Err(ModelError::MaterializationTooLarge { m, cap });
                }
                let values = (1..=m).map(|j| self.value_at(j)).collect();
                Ok(CostFunction::List { values })
            }
        }
    }

    /// Engine bucket layout: one view per list segment, or one per step
    /// piece. Only meaningful on trimmed (all-finite) curves.
    pub fn piece_views(&self) -> Vec<PieceView> {
        match self {
            CostFunction::List { values } => {
                let mut prev = Rat::zero();
                let mut out = Vec::with_capacity(values.len());
                for (idx, v) in values.iter().enumerate() {
                    let cur = v.finite().expect("trimmed curve is finite").clone();
                    let j = idx as u64 + 1;
                    out.push(PieceView {
                        lo: j,
                        hi: j,
                        marginal: cur.clone() - prev,
                    });
                    prev = cur;
                }
                out
            }
            CostFunction::Steps { pieces } => {
                let mut prev = Rat::zero();
                let mut lo = 1u64;
                let mut out = Vec::with_capacity(pieces.len());
                for p in pieces {
                    let cur = p.value.finite().expect("trimmed curve is finite").clone();
                    out.push(PieceView {
                        lo,
                        hi: p.upto,
                        marginal: cur.clone() - prev,
                    });
                    prev = cur;
                    lo = p.upto + 1;
                }
                out
            }
        }
    }
}

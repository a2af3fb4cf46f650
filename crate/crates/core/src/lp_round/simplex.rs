//! Dense two-phase primal simplex over exact rationals, with Bland's rule
//! for anti-cycling. Sized for the small restricted masters this crate
//! solves; every pivot is exact, so optima are exact rationals and runs are
//! deterministic.

use num_traits::{One, Zero};

use crate::model::Rat;

use super::LpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `min objective . x` subject to `rows`, `x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<Rat>,
    pub rows: Vec<(Vec<Rat>, Relation, Rat)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub values: Vec<Rat>,
    pub objective: Rat,
}

struct Tableau {
    /// m rows of length ncols + 1; the last entry is the right-hand side.
    rows: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> &Rat {
        &self.rows[r][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= inv.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (rr, row) in self.rows.iter_mut().enumerate() {
            if rr == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= factor.clone() * p.clone();
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs `c_j - c_B . B^-1 A_j` for the current basis.
    fn reduced_costs(&self, cost: &[Rat]) -> Vec<Rat> {
        let mut red = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            for (rj, a) in red.iter_mut().zip(&self.rows[r]) {
                if !a.is_zero() {
                    *rj -= cost[b].clone() * a.clone();
                }
            }
        }
        red
    }

    /// Runs Bland-rule pivots until optimal (no negative reduced cost) or
    /// provably unbounded.
    fn optimize(&mut self, cost: &[Rat], allow: impl Fn(usize) -> bool) -> Result<(), LpError> {
        loop {
            let red = self.reduced_costs(cost);
            let Some(enter) = (0..self.ncols).find(|&j| allow(j) && red[j] < Rat::zero()) else {
                return Ok(());
            };
            let mut leave: Option<(usize, Rat)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][enter];
                if *a <= Rat::zero() {
                    continue;
                }
                let ratio = self.rhs(r).clone() / a.clone();
                let better = match &leave {
                    None => true,
                    Some((cur, best)) => {
                        ratio < *best || (ratio == *best && self.basis[r] < self.basis[*cur])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, enter);
        }
    }

    fn objective_value(&self, cost: &[Rat]) -> Rat {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| cost[b].clone() * self.rhs(r).clone())
            .sum()
    }
}

/// Solves the program to optimality, returning an optimal basic feasible
/// solution. Deterministic: Bland's rule picks the smallest eligible index,
/// and ratio-test ties leave the smallest basis variable.
pub fn simplex_exact(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let nvars = lp.objective.len();
    let m = lp.rows.len();

    // normalize right-hand sides, then append one slack/surplus per
    // inequality and one artificial per Ge/Eq row
    let rows: Vec<(Vec<Rat>, Relation, Rat)> = lp
        .rows
        .iter()
        .map(|(coeffs, rel, rhs)| {
            assert_eq!(coeffs.len(), nvars, "row width must match the objective");
            if *rhs < Rat::zero() {
                let flipped = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (
                    coeffs.iter().map(|c| -c.clone()).collect(),
                    flipped,
                    -rhs.clone(),
                )
            } else {
                (coeffs.clone(), *rel, rhs.clone())
            }
        })
        .collect();

    let nslack = rows
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Eq)
        .count();
    let nart = rows
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Le)
        .count();
    let ncols = nvars + nslack + nart;

    let mut tableau = Tableau {
        rows: Vec::with_capacity(m),
        basis: vec![0; m],
        ncols,
    };
    let mut slack_at = nvars;
    let mut art_at = nvars + nslack;
    let mut artificials = Vec::new();
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let mut row = vec![Rat::zero(); ncols + 1];
        row[..nvars].clone_from_slice(coeffs);
        row[ncols] = rhs.clone();
        match rel {
            Relation::Le => {
                row[slack_at] = Rat::one();
                tableau.basis[r] = slack_at;
                slack_at += 1;
            }
            Relation::Ge => {
                row[slack_at] = -Rat::one();
                slack_at += 1;
                row[art_at] = Rat::one();
                tableau.basis[r] = art_at;
                artificials.push(art_at);
                art_at += 1;
            }
            Relation::Eq => {
                row[art_at] = Rat::one();
                tableau.basis[r] = art_at;
                artificials.push(art_at);
                art_at += 1;
            }
        }
        tableau.rows.push(row);
    }

    if !artificials.is_empty() {
        let mut phase1 = vec![Rat::zero(); ncols];
        for &a in &artificials {
            phase1[a] = Rat::one();
        }
        tableau.optimize(&phase1, |_| true)?;
        if !tableau.objective_value(&phase1).is_zero() {
            return Err(LpError::InfeasibleMaster);
        }
        // drive remaining artificials out of the basis; rows that cannot
        // pivot are redundant and harmless (their rhs is zero)
        for r in 0..m {
            if artificials.contains(&tableau.basis[r]) {
                if let Some(c) = (0..nvars + nslack).find(|&c| !tableau.rows[r][c].is_zero()) {
                    tableau.pivot(r, c);
                }
            }
        }
    }

    let mut phase2 = vec![Rat::zero(); ncols];
    phase2[..nvars].clone_from_slice(&lp.objective);
    let art_start = nvars + nslack;
    tableau.optimize(&phase2, |j| j < art_start)?;

    let mut values = vec![Rat::zero(); nvars];
    for (r, &b) in tableau.basis.iter().enumerate() {
        if b < nvars {
            values[b] = tableau.rhs(r).clone();
        }
    }
    let objective = tableau.objective_value(&phase2);
    Ok(LpSolution { values, objective })
}

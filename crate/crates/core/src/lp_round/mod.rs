//! Cutting-plane solution of the chain-constrained covering relaxation plus
//! the rounding pipeline: threshold at one half, solve the doubled residual
//! problem by an exact envelope greedy, and assemble an integral solution
//! costing at most twice the LP optimum.

pub mod simplex;

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::model::{validate, Instance, IntegralSolution, KcInstance, KcItem, Rat};
use crate::oracles::{separate_gkc, OracleError};

pub use simplex::{simplex_exact, LinearProgram, LpSolution, Relation};

/// Materialization ceiling when a step-form instance enters the list-only
/// pipeline.
pub const DEFAULT_LIST_CAP: u64 = 1 << 14;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("instance is invalid or infeasible")]
    Infeasible(Vec<crate::model::ValidationIssue>),
    #[error("restricted master is infeasible")]
    InfeasibleMaster,
    #[error("restricted master is unbounded")]
    Unbounded,
    #[error("cutting plane exceeded {cap} rounds")]
    IterationCapExceeded { cap: usize },
    #[error("separation returned a duplicate cut")]
    DuplicateCut,
    #[error("rounded solution fails to cover the demand")]
    AssemblyInfeasible,
    #[error(transparent)]
    Chain(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// Chain-form fractional point: per item, `1 >= z_1 >= ... >= z_m >= 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FractionalSolution {
    pub z: Vec<Vec<Rat>>,
}

impl FractionalSolution {
    pub fn cost(&self, inst: &KcInstance) -> Rat {
        let mut acc = Rat::zero();
        for (i, zi) in self.z.iter().enumerate() {
            for (j0, v) in zi.iter().enumerate() {
                if !v.is_zero() {
                    let g = inst.items[i]
                        .costs
                        .marginal(j0 as u64 + 1)
                        .finite()
                        .expect("list-model marginals are finite")
                        .clone();
                    acc += g * v.clone();
                }
            }
        }
        acc
    }
}

/// Prefix-min then clamp to one: turns any non-negative feasible point into
/// chain form without increasing cost or losing feasibility.
pub fn normalize(z: &[Vec<Rat>]) -> FractionalSolution {
    let one = Rat::one();
    let z = z
        .iter()
        .map(|zi| {
            let mut run_min: Option<Rat> = None;
            zi.iter()
                .map(|v| {
                    let m = match &run_min {
                        None => v.clone(),
                        Some(m) => v.clone().min(m.clone()),
                    };
                    run_min = Some(m.clone());
                    m.min(one.clone())
                })
                .collect()
        })
        .collect();
    FractionalSolution { z }
}

/// One covering cut, indexed by per-item thresholds and a residual demand.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub struct Cut {
    pub a: Vec<u64>,
    pub d: u64,
}

/// Result of the cutting-plane loop: an optimal chain-form point for the
/// full covering relaxation, its cost, and the cuts it took to get there.
#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub fractional: FractionalSolution,
    pub lp_cost: Rat,
    pub cuts: Vec<Cut>,
}

/// Restricted master over prefix-mass variables: `y_{i,p}` is the weight of
/// buying exactly the length-`p` prefix of item `i`, so chain constraints
/// become `sum_p y_{i,p} <= 1` and the objective prices whole prefixes at
/// `f_i(p)`. The chain-form `z` is recovered as suffix sums of `y`.
struct Master {
    inst: KcInstance,
    var_of: Vec<Vec<usize>>,
    objective: Vec<Rat>,
    rows: Vec<(Vec<Rat>, Relation, Rat)>,
}

impl Master {
    fn new(inst: &KcInstance) -> Master {
        let mut var_of = Vec::with_capacity(inst.n());
        let mut objective = Vec::new();
        for item in &inst.items {
            let m = item.costs.m();
            let mut ids = Vec::with_capacity(m as usize);
            for p in 1..=m {
                ids.push(objective.len());
                objective.push(
                    item.costs
                        .value_at(p)
                        .finite()
                        .expect("normalized list-model costs are finite")
                        .clone(),
                );
            }
            var_of.push(ids);
        }
        let mut rows = Vec::new();
        for ids in &var_of {
            let mut row = vec![Rat::zero(); objective.len()];
            for &v in ids {
                row[v] = Rat::one();
            }
            rows.push((row, Relation::Le, Rat::one()));
        }
        Master {
            inst: inst.clone(),
            var_of,
            objective,
            rows,
        }
    }

    fn add_cut(&mut self, cut: &Cut) {
        let mut row = vec![Rat::zero(); self.objective.len()];
        for (i, ids) in self.var_of.iter().enumerate() {
            let m = self.inst.items[i].costs.m();
            let hi = m.min(cut.a[i] + cut.d);
            for (p0, &v) in ids.iter().enumerate() {
                let p = p0 as u64 + 1;
                let weight = p.min(hi).saturating_sub(cut.a[i]);
                if weight > 0 {
                    row[v] = Rat::from_integer(weight.into());
                }
            }
        }
        self.rows
            .push((row, Relation::Ge, Rat::from_integer(cut.d.into())));
    }

    fn solve(&self) -> Result<(FractionalSolution, Rat), LpError> {
        let sol = simplex_exact(&LinearProgram {
            objective: self.objective.clone(),
            rows: self.rows.clone(),
        })?;
        let z = self
            .var_of
            .iter()
            .map(|ids| {
                let mut suffix = Rat::zero();
                let mut zi = vec![Rat::zero(); ids.len()];
                for (p0, &v) in ids.iter().enumerate().rev() {
                    suffix += sol.values[v].clone();
                    zi[p0] = suffix.clone();
                }
                zi
            })
            .collect();
        Ok((FractionalSolution { z }, sol.objective))
    }
}

/// Lazy-constraint loop: solve the restricted master, separate, add the
/// most violated cut, repeat until separation certifies optimality for the
/// full relaxation.
pub fn solve_gkc_lp(instance: &KcInstance) -> Result<LpOutcome, LpError> {
    let report = validate(&Instance::Kc(instance.clone()));
    if !report.ok() {
        return Err(LpError::Infeasible(report.issues));
    }
    let inst = materialized(&instance.normalized(), DEFAULT_LIST_CAP)?;

    let mut master = Master::new(&inst);
    let initial = Cut {
        a: vec![0; inst.n()],
        d: inst.demand,
    };
    master.add_cut(&initial);
    let mut cuts = vec![initial];
    let mut seen: BTreeSet<Cut> = cuts.iter().cloned().collect();

    let total_m: u64 = inst.items.iter().map(|it| it.costs.m()).sum();
    let cap = (total_m * inst.demand).max(4) as usize;

    let mut last_cost: Option<Rat> = None;
    for _ in 0..cap {
        let (fractional, lp_cost) = master.solve()?;
        debug_assert!(
            last_cost.as_ref().is_none_or(|c| *c <= lp_cost),
            "restricted optimum must be non-decreasing as cuts tighten"
        );
        last_cost = Some(lp_cost.clone());
        match separate_gkc(&inst, &fractional.z)?.violated {
            None => {
                return Ok(LpOutcome {
                    fractional,
                    lp_cost,
                    cuts,
                })
            }
            Some(v) => {
                let cut = Cut { a: v.a, d: v.d };
                if !seen.insert(cut.clone()) {
                    return Err(LpError::DuplicateCut);
                }
                master.add_cut(&cut);
                cuts.push(cut);
            }
        }
    }
    Err(LpError::IterationCapExceeded { cap })
}

fn materialized(inst: &KcInstance, cap: u64) -> Result<KcInstance, LpError> {
    let mut items = Vec::with_capacity(inst.n());
    for it in &inst.items {
        items.push(KcItem {
            costs: it.costs.expand_steps_to_list(cap)?,
        });
    }
    Ok(KcInstance {
        demand: inst.demand,
        items,
    })
}

/// Residual state after thresholding at one half.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualContext {
    /// Largest segment with `z >= 1/2`, per item (0 when none).
    pub a_bar: Vec<u64>,
    /// Residual demand after committing the thresholded prefixes.
    pub d_bar: u64,
    /// Truncation caps `min(m_i, a_bar_i + d_bar)`.
    pub m_bar: Vec<u64>,
}

/// Thresholds a chain-form point at one half.
pub fn threshold(inst: &KcInstance, z: &FractionalSolution) -> ResidualContext {
    let half = Rat::new(1.into(), 2.into());
    let a_bar: Vec<u64> =
        z.z.iter()
            .map(|zi| zi.iter().take_while(|v| **v >= half).count() as u64)
            .collect();
    let taken: u64 = a_bar.iter().sum();
    let d_bar = inst.demand.saturating_sub(taken);
    let m_bar = inst
        .items
        .iter()
        .zip(&a_bar)
        .map(|(it, &a)| it.costs.m().min(a + d_bar))
        .collect();
    ResidualContext {
        a_bar,
        d_bar,
        m_bar,
    }
}

/// Per-item slice of the residual solution: ones before `r`, the value `w`
/// on `r..=cap_r` (1-based residual offsets within `a_bar_i+1..=m_bar_i`),
/// zeros beyond.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvelopeItem {
    pub r: u64,
    pub cap_r: u64,
    pub w: Rat,
    /// Explicit residual values, one per segment in `a_bar+1..=m_bar`.
    pub z: Vec<Rat>,
}

/// Optimal extreme solution of the residual problem; at most one item holds
/// a fractional value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvelopeSolution {
    pub items: Vec<EnvelopeItem>,
}

impl EnvelopeSolution {
    pub fn fractional_item(&self) -> Option<usize> {
        self.items
            .iter()
            .position(|it| !it.w.is_zero() && !it.w.is_one())
    }

    pub fn cost(&self, inst: &KcInstance, ctx: &ResidualContext) -> Rat {
        let mut acc = Rat::zero();
        for (i, item) in self.items.iter().enumerate() {
            for (off, v) in item.z.iter().enumerate() {
                if !v.is_zero() {
                    let j = ctx.a_bar[i] + off as u64 + 1;
                    acc += inst.items[i]
                        .costs
                        .marginal(j)
                        .finite()
                        .expect("finite marginals")
                        .clone()
                        * v.clone();
                }
            }
        }
        acc
    }
}

/// Lower convex envelope of the cumulative-marginal curve, as maximal
/// segments `(units, slope)` in positional order. Slopes are non-decreasing.
fn envelope_segments(marginals: &[Rat]) -> Vec<(u64, Rat)> {
    // lower hull of the points (s, F(s)), s = 0..=len
    let mut hull: Vec<(u64, Rat)> = vec![(0, Rat::zero())];
    let mut f = Rat::zero();
    for (s0, g) in marginals.iter().enumerate() {
        f += g.clone();
        let p = (s0 as u64 + 1, f.clone());
        while hull.len() >= 2 {
            let b = &hull[hull.len() - 1];
            let a = &hull[hull.len() - 2];
            // drop b when it lies on or above the chord a -> p
            let lhs = (b.1.clone() - a.1.clone()) * Rat::from_integer((p.0 - a.0).into());
            let rhs = (p.1.clone() - a.1.clone()) * Rat::from_integer((b.0 - a.0).into());
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.windows(2)
        .map(|w| {
            let units = w[1].0 - w[0].0;
            let slope = (w[1].1.clone() - w[0].1.clone()) / Rat::from_integer(units.into());
            (units, slope)
        })
        .collect()
}

/// Solves the residual problem exactly: under chain constraints, the
/// cheapest way to buy `s` units of one item is the lower convex envelope of
/// its cumulative marginals, so buying envelope segments globally by
/// ascending slope is optimal. The doubled residual demand is capped at the
/// total residual capacity; the greedy stops inside at most one segment, so
/// at most one item ends fractional.
pub fn solve_residual(inst: &KcInstance, ctx: &ResidualContext) -> EnvelopeSolution {
    solve_residual_mass(inst, ctx, 2 * ctx.d_bar)
}

/// The envelope greedy with an explicit mass target (still capped at the
/// residual capacity).
pub fn solve_residual_mass(
    inst: &KcInstance,
    ctx: &ResidualContext,
    mass: u64,
) -> EnvelopeSolution {
    let n = inst.n();
    let residual_marginals: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            (ctx.a_bar[i] + 1..=ctx.m_bar[i])
                .map(|j| {
                    inst.items[i]
                        .costs
                        .marginal(j)
                        .finite()
                        .expect("finite marginals")
                        .clone()
                })
                .collect()
        })
        .collect();

    let capacity: u64 = residual_marginals.iter().map(|m| m.len() as u64).sum();
    let target = mass.min(capacity);

    // (slope, item, position) keeps per-item segments in positional order
    let mut segments: Vec<(Rat, usize, usize, u64)> = Vec::new();
    for (i, marg) in residual_marginals.iter().enumerate() {
        for (pos, (units, slope)) in envelope_segments(marg).into_iter().enumerate() {
            segments.push((slope, i, pos, units));
        }
    }
    segments.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut bought: Vec<Rat> = vec![Rat::zero(); n]; // residual mass per item
    let mut frac_range: Vec<Option<(u64, u64, Rat)>> = vec![None; n];
    let mut remaining = Rat::from_integer(target.into());
    for (_, i, _, units) in segments {
        if remaining.is_zero() {
            break;
        }
        let units_rat = Rat::from_integer(units.into());
        let start = bought[i].clone();
        debug_assert!(start.is_integer(), "whole segments precede a partial one");
        if remaining >= units_rat {
            bought[i] += units_rat.clone();
            remaining -= units_rat;
        } else {
            let w = remaining.clone() / units_rat;
            let lo = start
                .to_integer()
                .try_into()
                .expect("non-negative residual mass");
            frac_range[i] = Some((lo, lo + units, w));
            bought[i] += remaining.clone();
            remaining = Rat::zero();
        }
    }

    let items = (0..n)
        .map(|i| {
            let len = residual_marginals[i].len() as u64;
            let mut z = vec![Rat::zero(); len as usize];
            match &frac_range[i] {
                Some((lo, hi, w)) => {
                    for off in 0..*lo {
                        z[off as usize] = Rat::one();
                    }
                    for off in *lo..*hi {
                        z[off as usize] = w.clone();
                    }
                    EnvelopeItem {
                        r: lo + 1,
                        cap_r: *hi,
                        w: w.clone(),
                        z,
                    }
                }
                None => {
                    let s = bought[i]
                        .to_integer()
                        .try_into()
                        .expect("integral residual mass");
                    for off in 0..s {
                        z[off as usize] = Rat::one();
                    }
                    let w = if s > 0 { Rat::one() } else { Rat::zero() };
                    EnvelopeItem {
                        r: 1,
                        cap_r: s,
                        w,
                        z,
                    }
                }
            }
        })
        .collect();
    EnvelopeSolution { items }
}

/// Assembles the rounded integral solution: thresholded prefixes for every
/// item, residual integral parts for all items except the unique fractional
/// one, whose residual is dropped entirely.
pub fn assemble_rounded(
    inst: &KcInstance,
    ctx: &ResidualContext,
    env: &EnvelopeSolution,
) -> Result<IntegralSolution, LpError> {
    let fractional = env.fractional_item();
    let levels: Vec<u64> = (0..inst.n())
        .map(|i| {
            if Some(i) == fractional {
                ctx.a_bar[i]
            } else {
                let ones = env.items[i].z.iter().take_while(|v| v.is_one()).count() as u64;
                ctx.a_bar[i] + ones
            }
        })
        .collect();
    if levels.iter().sum::<u64>() < inst.demand {
        return Err(LpError::AssemblyInfeasible);
    }
    Ok(IntegralSolution { levels })
}

/// Full pipeline output.
#[derive(Clone, Debug)]
pub struct RoundResult {
    pub solution: IntegralSolution,
    pub lp_cost: Rat,
    pub rounded_cost: Rat,
    pub cuts: Vec<Cut>,
}

/// Cutting plane, normalization, threshold, residual envelope greedy, and
/// assembly; the result is integral, feasible, and costs at most twice the
/// LP optimum.
pub fn round_2apx(instance: &KcInstance) -> Result<RoundResult, LpError> {
    let outcome = solve_gkc_lp(instance)?;
    let inst = materialized(&instance.normalized(), DEFAULT_LIST_CAP)?;
    let fractional = normalize(&outcome.fractional.z);
    let ctx = threshold(&inst, &fractional);
    let env = solve_residual(&inst, &ctx);
    let solution = assemble_rounded(&inst, &ctx, &env)?;
    let rounded_cost: Rat = {
        let mut acc = Rat::zero();
        for (i, &x) in solution.levels.iter().enumerate() {
            acc += inst.items[i]
                .costs
                .value_at(x)
                .finite()
                .expect("finite costs")
                .clone();
        }
        acc
    };
    debug_assert!(rounded_cost <= Rat::from_integer(2.into()) * outcome.lp_cost.clone());
    Ok(RoundResult {
        solution,
        lp_cost: outcome.lp_cost,
        rounded_cost,
        cuts: outcome.cuts,
    })
}

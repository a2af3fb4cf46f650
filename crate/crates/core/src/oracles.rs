//! Exact ground-truth solvers and the cut separation oracle.

use num_traits::Zero;

use crate::model::{Cost, IntegralSolution, KcInstance, Rat, UfpInstance};

/// Default ceiling on brute-force enumeration (number of level vectors).
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 4_000_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("no finite-cost solution covers the demand")]
    Infeasible,
    #[error("enumeration would visit {needed} vectors (budget {budget})")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("item {item}: values must satisfy 1 >= z_1 >= ... >= z_m >= 0")]
    ChainViolated { item: usize },
}

/// Exact optimum for a demand-cover instance by dynamic programming over the
/// residual demand. Returns one argmin solution; ties take the smallest
/// level at each backtrack step (items processed first to last).
pub fn exact_kc(instance: &KcInstance) -> Result<(Cost, IntegralSolution), OracleError> {
    let inst = instance.normalized();
    let n = inst.n();
    let d_max = inst.demand as usize;

    // suffix table: best[i][d] = min cost of covering residual d with items i..n
    let mut best = vec![vec![Cost::Infinite; d_max + 1]; n + 1];
    best[n][0] = Cost::zero();
    for i in (0..n).rev() {
        let cf = &inst.items[i].costs;
        let m = cf.m() as usize;
        for d in 0..=d_max {
            let mut acc = Cost::Infinite;
            for x in 0..=m {
                let rest = d.saturating_sub(x);
                let cand = cf.value_at(x as u64) + best[i + 1][rest].clone();
                if cand < acc {
                    acc = cand;
                }
            }
            best[i][d] = acc;
        }
    }

    if best[0][d_max].is_infinite() {
        return Err(OracleError::Infeasible);
    }

    let mut levels = Vec::with_capacity(n);
    let mut d = d_max;
    for i in 0..n {
        let cf = &inst.items[i].costs;
        let m = cf.m() as usize;
        let target = best[i][d].clone();
        for x in 0..=m {
            let rest = d.saturating_sub(x);
            if cf.value_at(x as u64) + best[i + 1][rest].clone() == target {
                levels.push(x as u64);
                d = rest;
                break;
            }
        }
    }
    Ok((best[0][d_max].clone(), IntegralSolution { levels }))
}

fn enumerate_levels<F: FnMut(&[u64])>(
    bounds: &[u64],
    budget: u64,
    mut visit: F,
) -> Result<(), OracleError> {
    let mut needed: u64 = 1;
    for &b in bounds {
        needed = needed.saturating_mul(b + 1);
        if needed > budget {
            return Err(OracleError::BudgetExceeded { needed, budget });
        }
    }
    let mut levels = vec![0u64; bounds.len()];
    loop {
        visit(&levels);
        let mut i = 0;
        loop {
            if i == bounds.len() {
                return Ok(());
            }
            if levels[i] < bounds[i] {
                levels[i] += 1;
                break;
            }
            levels[i] = 0;
            i += 1;
        }
    }
}

/// Exhaustive optimum for a demand-cover instance. Ground truth for tiny
/// cases; `cap` additionally bounds each level.
pub fn brute_force_kc(
    instance: &KcInstance,
    cap: u64,
    budget: u64,
) -> Result<(Cost, IntegralSolution), OracleError> {
    let inst = instance.normalized();
    let bounds: Vec<u64> = inst.items.iter().map(|it| it.costs.m().min(cap)).collect();
    let mut best = Cost::Infinite;
    let mut best_levels: Option<Vec<u64>> = None;
    enumerate_levels(&bounds, budget, |levels| {
        if levels.iter().sum::<u64>() < inst.demand {
            return;
        }
        let mut cost = Cost::zero();
        for (i, &x) in levels.iter().enumerate() {
            cost += inst.items[i].costs.value_at(x);
        }
        if cost < best {
            best = cost;
            best_levels = Some(levels.to_vec());
        }
    })?;
    match best_levels {
        Some(levels) if !best.is_infinite() => Ok((best, IntegralSolution { levels })),
        _ => Err(OracleError::Infeasible),
    }
}

/// Exhaustive optimum for a flow-cover instance. `cap` bounds each level.
pub fn brute_force_ufp(
    instance: &UfpInstance,
    cap: u64,
    budget: u64,
) -> Result<(Cost, IntegralSolution), OracleError> {
    let inst = instance.normalized();
    let bounds: Vec<u64> = inst.items.iter().map(|it| it.costs.m().min(cap)).collect();
    let k = inst.k();
    let mut best = Cost::Infinite;
    let mut best_levels: Option<Vec<u64>> = None;
    enumerate_levels(&bounds, budget, |levels| {
        for t in 1..=k {
            let covered: u64 = levels
                .iter()
                .enumerate()
                .filter(|(i, _)| inst.covers(*i, t))
                .map(|(_, &x)| x)
                .sum();
            if covered < inst.demands[t as usize - 1] {
                return;
            }
        }
        let mut cost = Cost::zero();
        for (i, &x) in levels.iter().enumerate() {
            cost += inst.items[i].costs.value_at(x);
        }
        if cost < best {
            best = cost;
            best_levels = Some(levels.to_vec());
        }
    })?;
    match best_levels {
        Some(levels) if !best.is_infinite() => Ok((best, IntegralSolution { levels })),
        _ => Err(OracleError::Infeasible),
    }
}

/// A violated cover cut: thresholds `a`, residual `d`, and the left-hand
/// side mass the fractional point places in the cut's windows (`lhs < d`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViolatedCut {
    pub a: Vec<u64>,
    pub d: u64,
    pub lhs: Rat,
}

/// Outcome of separation: the most violated cut, or none when every cut
/// holds (which certifies feasibility of the chain-form point).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparationResult {
    pub violated: Option<ViolatedCut>,
}

/// Finds the most violated cover cut for a chain-form fractional point, or
/// reports that none exists. The instance is taken literally (callers that
/// want demand-clamped domains normalize first).
///
/// For each residual `d` in `1..=D` a table over items and placed units
/// minimizes the window mass `sum_i h_i(a_i)` subject to `sum_i a_i = D - d`
/// with `h_i(a) = z_i(a+1) + ... + z_i(min(m_i, a+d))`. Violation is
/// `d - lhs`; ties prefer smaller `d`, then the lexicographically smallest
/// `a` (guaranteed by suffix-table reconstruction).
pub fn separate_gkc(
    instance: &KcInstance,
    z: &[Vec<Rat>],
) -> Result<SeparationResult, OracleError> {
    let inst = instance;
    let n = inst.n();
    assert_eq!(z.len(), n, "one z row per item");

    let one = Rat::from_integer(1.into());
    for (i, zi) in z.iter().enumerate() {
        let m = inst.items[i].costs.m() as usize;
        assert_eq!(zi.len(), m, "item {i}: z row must have m_i entries");
        let mut prev = one.clone();
        for v in zi {
            if *v > prev || *v < Rat::zero() {
                return Err(OracleError::ChainViolated { item: i });
            }
            prev = v.clone();
        }
    }

    // prefix[i][j] = z_i1 + ... + z_ij
    let prefix: Vec<Vec<Rat>> = z
        .iter()
        .map(|zi| {
            let mut acc = Rat::zero();
            let mut out = vec![Rat::zero()];
            for v in zi {
                acc += v.clone();
                out.push(acc.clone());
            }
            out
        })
        .collect();
    let window = |i: usize, a: u64, d: u64| -> Rat {
        let m = inst.items[i].costs.m();
        let hi = m.min(a + d) as usize;
        let lo = a as usize;
        if hi <= lo {
            Rat::zero()
        } else {
            prefix[i][hi].clone() - prefix[i][lo].clone()
        }
    };

    let total_capacity: u64 = inst.items.iter().map(|it| it.costs.m()).sum();
    let mut best: Option<ViolatedCut> = None;

    for d in 1..=inst.demand {
        let place = inst.demand - d;
        if place > total_capacity {
            continue;
        }
        let place = place as usize;
        // suffix table over items i..n: cheapest window mass placing e units
        let mut table = vec![vec![None::<Rat>; place + 1]; n + 1];
        table[n][0] = Some(Rat::zero());
        for i in (0..n).rev() {
            let m = inst.items[i].costs.m() as usize;
            for e in 0..=place {
                let mut acc: Option<Rat> = None;
                for a in 0..=m.min(e) {
                    if let Some(rest) = &table[i + 1][e - a] {
                        let cand = window(i, a as u64, d) + rest.clone();
                        if acc.as_ref().is_none_or(|cur| cand < *cur) {
                            acc = Some(cand);
                        }
                    }
                }
                table[i][e] = acc;
            }
        }
        let Some(lhs) = table[0][place].clone() else {
            continue;
        };
        let d_rat = Rat::from_integer(d.into());
        if lhs >= d_rat {
            continue;
        }
        let violation = d_rat - lhs.clone();
        let better = match &best {
            None => true,
            Some(cur) => {
                let cur_violation = Rat::from_integer(cur.d.into()) - cur.lhs.clone();
                violation > cur_violation || (violation == cur_violation && d < cur.d)
            }
        };
        if !better {
            continue;
        }
        // reconstruct the lexicographically smallest argmin
        let mut a_vec = Vec::with_capacity(n);
        let mut e = place;
        for i in 0..n {
            let m = inst.items[i].costs.m() as usize;
            let target = table[i][e].clone().expect("reachable state");
            for a in 0..=m.min(e) {
                if let Some(rest) = &table[i + 1][e - a] {
                    if window(i, a as u64, d) + rest.clone() == target {
                        a_vec.push(a as u64);
                        e -= a;
                        break;
                    }
                }
            }
        }
        best = Some(ViolatedCut { a: a_vec, d, lhs });
    }

    Ok(SeparationResult { violated: best })
}

//! Problem instances, solutions, validation and normalization.

use serde::{Deserialize, Serialize};

use super::cost::{Cost, Rat};
use super::func::CostFunction;
use super::ModelError;

/// Demand-cover instance: items with cost curves and a single scalar demand.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KcInstance {
    pub demand: u64,
    pub items: Vec<KcItem>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KcItem {
    pub costs: CostFunction,
}

/// Flow-cover instance on a line: items cover sub-intervals of `1..=k` and
/// every point `t` carries its own demand.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UfpInstance {
    pub demands: Vec<u64>,
    pub items: Vec<UfpItem>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UfpItem {
    /// 1-based inclusive endpoints.
    pub interval: (u64, u64),
    pub costs: CostFunction,
}

/// Either instance kind, as read from disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Instance {
    Kc(KcInstance),
    Ufp(UfpInstance),
}

/// Per-item integer levels; `levels[i] = x_i` buys segments `1..=x_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegralSolution {
    pub levels: Vec<u64>,
}

/// On-disk solution: levels plus the cost they incur on their instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub levels: Vec<u64>,
    pub cost: Cost,
}

/// A single violated invariant found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ValidationIssue {
    #[error("item {item}: cost value at segment {segment} is negative")]
    NegativeCost { item: usize, segment: u64 },
    #[error("item {item}: cost decreases at segment {segment}")]
    Decreasing { item: usize, segment: u64 },
    #[error("item {item}: step pieces must have strictly increasing `upto`")]
    StepsUptoNotIncreasing { item: usize },
    #[error("item {item}: step piece values must be strictly increasing")]
    StepsValueNotIncreasing { item: usize },
    #[error("item {item}: step form needs at least one piece")]
    StepsEmpty { item: usize },
    #[error("demand must be at least 1")]
    ZeroDemand,
    #[error("total finite capacity {capacity} cannot cover demand {demand}")]
    InfeasibleDemand { capacity: u64, demand: u64 },
    #[error("item {item}: interval [{s}, {e}] out of range for horizon {k}")]
    IntervalOutOfRange { item: usize, s: u64, e: u64, k: u64 },
    #[error("point {t}: demand {demand} exceeds covering finite capacity {capacity}")]
    UncoverablePoint { t: u64, demand: u64, capacity: u64 },
}

/// Everything [`validate`] found; empty means the instance is well-formed
/// and feasible with finite cost.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

fn validate_cost_function(item: usize, cf: &CostFunction, issues: &mut Vec<ValidationIssue>) {
    match cf {
        CostFunction::List { values } => {
            let mut prev = Cost::zero();
            for (idx, v) in values.iter().enumerate() {
                let segment = idx as u64 + 1;
                if v.is_negative() {
                    issues.push(ValidationIssue::NegativeCost { item, segment });
                }
                if *v < prev {
                    issues.push(ValidationIssue::Decreasing { item, segment });
                }
                prev = v.clone();
            }
        }
        CostFunction::Steps { pieces } => {
            if pieces.is_empty() {
                issues.push(ValidationIssue::StepsEmpty { item });
                return;
            }
            let mut prev_upto = 0u64;
            let mut prev_value: Option<&Cost> = None;
            for p in pieces {
                if p.upto <= prev_upto {
                    issues.push(ValidationIssue::StepsUptoNotIncreasing { item });
                    break;
                }
                if p.value.is_negative() {
                    issues.push(ValidationIssue::NegativeCost {
                        item,
                        segment: p.upto,
                    });
                }
                if let Some(pv) = prev_value {
                    if p.value <= *pv {
                        issues.push(ValidationIssue::StepsValueNotIncreasing { item });
                        break;
                    }
                }
                prev_upto = p.upto;
                prev_value = Some(&p.value);
            }
        }
    }
}

/// Finite-cost capacity of a curve: segments before the first infinite value.
fn finite_capacity(cf: &CostFunction) -> u64 {
    match cf {
        CostFunction::List { values } => values
            .iter()
            .position(|v| v.is_infinite())
            .map_or(values.len() as u64, |p| p as u64),
        CostFunction::Steps { pieces } => {
            let mut cap = 0;
            for p in pieces {
                if p.value.is_infinite() {
                    break;
                }
                cap = p.upto;
            }
            cap
        }
    }
}

/// Checks every structural invariant and feasibility; reports all failures
/// instead of stopping at the first.
pub fn validate(instance: &Instance) -> ValidationReport {
    let mut issues = Vec::new();
    match instance {
        Instance::Kc(kc) => {
            for (i, item) in kc.items.iter().enumerate() {
                validate_cost_function(i, &item.costs, &mut issues);
            }
            if kc.demand == 0 {
                issues.push(ValidationIssue::ZeroDemand);
            }
            if issues.is_empty() {
                let capacity: u64 = kc.items.iter().map(|it| finite_capacity(&it.costs)).sum();
                if capacity < kc.demand {
                    issues.push(ValidationIssue::InfeasibleDemand {
                        capacity,
                        demand: kc.demand,
                    });
                }
            }
        }
        Instance::Ufp(ufp) => {
            let k = ufp.demands.len() as u64;
            for (i, item) in ufp.items.iter().enumerate() {
                validate_cost_function(i, &item.costs, &mut issues);
                let (s, e) = item.interval;
                if s < 1 || e < s || e > k {
                    issues.push(ValidationIssue::IntervalOutOfRange { item: i, s, e, k });
                }
            }
            if issues.is_empty() {
                for (t0, &d) in ufp.demands.iter().enumerate() {
                    if d == 0 {
                        continue;
                    }
                    let t = t0 as u64 + 1;
                    let capacity: u64 = ufp
                        .items
                        .iter()
                        .filter(|it| it.interval.0 <= t && t <= it.interval.1)
                        .map(|it| finite_capacity(&it.costs))
                        .sum();
                    if capacity < d {
                        issues.push(ValidationIssue::UncoverablePoint {
                            t,
                            demand: d,
                            capacity,
                        });
                    }
                }
            }
        }
    }
    ValidationReport { issues }
}

impl KcInstance {
    pub fn new(items: Vec<CostFunction>, demand: u64) -> Self {
        KcInstance {
            demand,
            items: items.into_iter().map(|costs| KcItem { costs }).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    /// Trims infinite tails and caps every item at the demand. Idempotent;
    /// solvers run on the normalized instance.
    pub fn normalized(&self) -> KcInstance {
        KcInstance {
            demand: self.demand,
            items: self
                .items
                .iter()
                .map(|it| KcItem {
                    costs: it.costs.trimmed(self.demand),
                })
                .collect(),
        }
    }
}

impl UfpInstance {
    pub fn k(&self) -> u64 {
        self.demands.len() as u64
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn covers(&self, item: usize, t: u64) -> bool {
        let (s, e) = self.items[item].interval;
        s <= t && t <= e
    }

    pub fn max_demand(&self) -> u64 {
        self.demands.iter().copied().max().unwrap_or(0)
    }

    /// Trims infinite tails and caps every item at the largest demand.
    pub fn normalized(&self) -> UfpInstance {
        let cap = self.max_demand();
        UfpInstance {
            demands: self.demands.clone(),
            items: self
                .items
                .iter()
                .map(|it| UfpItem {
                    interval: it.interval,
                    costs: it.costs.trimmed(cap),
                })
                .collect(),
        }
    }
}

impl Instance {
    pub fn normalized(&self) -> Instance {
        match self {
            Instance::Kc(kc) => Instance::Kc(kc.normalized()),
            Instance::Ufp(ufp) => Instance::Ufp(ufp.normalized()),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Instance::Kc(kc) => kc.n(),
            Instance::Ufp(ufp) => ufp.n(),
        }
    }

    fn item_costs(&self, i: usize) -> &CostFunction {
        match self {
            Instance::Kc(kc) => &kc.items[i].costs,
            Instance::Ufp(ufp) => &ufp.items[i].costs,
        }
    }
}

/// Builds the non-linear form of a classical cover instance: item `i` may
/// provide up to `capacities[i]` units at flat cost `costs[i]`.
pub fn from_classic_kc(
    capacities: &[u64],
    costs: &[Rat],
    demand: u64,
) -> Result<KcInstance, ModelError> {
    assert_eq!(capacities.len(), costs.len());
    let mut items = Vec::with_capacity(capacities.len());
    for (i, (&u, c)) in capacities.iter().zip(costs).enumerate() {
        if u == 0 {
            return Err(ModelError::ZeroCapacity { item: i });
        }
        let m = u.min(demand);
        items.push(CostFunction::list(vec![
            Cost::Finite(c.clone());
            m as usize
        ]));
    }
    Ok(KcInstance::new(items, demand))
}

/// `sum_i f_i(x_i)`, propagating infinity.
pub fn solution_cost(instance: &Instance, sol: &IntegralSolution) -> Result<Cost, ModelError> {
    if sol.levels.len() != instance.n() {
        return Err(ModelError::LevelOutOfRange {
            item: sol.levels.len(),
            level: 0,
            m: instance.n() as u64,
        });
    }
    let mut total = Cost::zero();
    for (i, &x) in sol.levels.iter().enumerate() {
        let cf = instance.item_costs(i);
        if x > cf.m() {
            return Err(ModelError::LevelOutOfRange {
                item: i,
                level: x,
                m: cf.m(),
            });
        }
        total += cf.value_at(x);
    }
    Ok(total)
}

/// Does the solution cover the demand (at every point, for flow instances)?
pub fn is_feasible(instance: &Instance, sol: &IntegralSolution) -> bool {
    if sol.levels.len() != instance.n() {
        return false;
    }
    match instance {
        Instance::Kc(kc) => sol.levels.iter().sum::<u64>() >= kc.demand,
        Instance::Ufp(ufp) => (1..=ufp.k()).all(|t| {
            let covered: u64 = sol
                .levels
                .iter()
                .enumerate()
                .filter(|(i, _)| ufp.covers(*i, t))
                .map(|(_, &x)| x)
                .sum();
            covered >= ufp.demands[t as usize - 1]
        }),
    }
}

/// Coordinate change produced by [`compress_coordinates`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointMap {
    /// For each original point (0-based), the surviving compressed point.
    pub new_of_orig: Vec<Option<u64>>,
    /// For each compressed point (0-based), the original 1-based run `[s, e]`.
    pub orig_range_of_new: Vec<(u64, u64)>,
}

/// Merges maximal runs of points covered by identical item sets, keeping the
/// maximum demand of each run; points covered by no item are dropped (their
/// demand must be zero for the instance to be feasible). The result has at
/// most `2n` points and preserves feasibility of level vectors both ways.
pub fn compress_coordinates(ufp: &UfpInstance) -> (UfpInstance, PointMap) {
    let k = ufp.k();
    let mut new_of_orig: Vec<Option<u64>> = vec![None; k as usize];
    let mut orig_range_of_new: Vec<(u64, u64)> = Vec::new();
    let mut new_demands: Vec<u64> = Vec::new();

    let cover_set = |t: u64| -> Vec<usize> { (0..ufp.n()).filter(|&i| ufp.covers(i, t)).collect() };

    let mut t = 1u64;
    while t <= k {
        let set = cover_set(t);
        if set.is_empty() {
            t += 1;
            continue;
        }
        let mut end = t;
        let mut dmax = ufp.demands[t as usize - 1];
        while end < k && cover_set(end + 1) == set {
            end += 1;
            dmax = dmax.max(ufp.demands[end as usize - 1]);
        }
        let new_idx = new_demands.len() as u64;
        for orig in t..=end {
            new_of_orig[orig as usize - 1] = Some(new_idx);
        }
        orig_range_of_new.push((t, end));
        new_demands.push(dmax);
        t = end + 1;
    }

    let items = ufp
        .items
        .iter()
        .map(|it| {
            let (s, e) = it.interval;
            // every point of a nonempty interval is covered by this item, so
            // the whole range survives compression
            let ns = new_of_orig[s as usize - 1].expect("covered point survives") + 1;
            let ne = new_of_orig[e as usize - 1].expect("covered point survives") + 1;
            UfpItem {
                interval: (ns, ne),
                costs: it.costs.clone(),
            }
        })
        .collect();

    (
        UfpInstance {
            demands: new_demands,
            items,
        },
        PointMap {
            new_of_orig,
            orig_range_of_new,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cost::rat;

    fn kc(items: &[&[i64]], demand: u64) -> Instance {
        Instance::Kc(KcInstance::new(
            items.iter().map(|v| CostFunction::list_ints(v)).collect(),
            demand,
        ))
    }

    fn ufp(items: &[((u64, u64), &[i64])], demands: &[u64]) -> UfpInstance {
        UfpInstance {
            demands: demands.to_vec(),
            items: items
                .iter()
                .map(|&(interval, values)| UfpItem {
                    interval,
                    costs: CostFunction::list_ints(values),
                })
                .collect(),
        }
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&kc(&[&[1, 2]], 2)).ok());

        let short = validate(&kc(&[&[1]], 2));
        assert!(matches!(
            short.issues[..],
            [ValidationIssue::InfeasibleDemand {
                capacity: 1,
                demand: 2
            }]
        ));

        let dec = validate(&kc(&[&[3, 2]], 1));
        assert!(dec.issues.iter().any(|i| matches!(
            i,
            ValidationIssue::Decreasing {
                item: 0,
                segment: 2
            }
        )));
    }

    #[test]
    fn validate_rejects_bad_steps() {
        let st = CostFunction::steps(vec![
            crate::model::StepPiece {
                upto: 3,
                value: Cost::from_int(2),
            },
            crate::model::StepPiece {
                upto: 4,
                value: Cost::from_int(2),
            },
        ]);
        let inst = Instance::Kc(KcInstance::new(vec![st], 2));
        let rep = validate(&inst);
        assert!(rep
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::StepsValueNotIncreasing { item: 0 })));
    }

    #[test]
    fn validate_ufp_coverage() {
        let inst = ufp(&[((1, 1), &[1])], &[1, 1]);
        let rep = validate(&Instance::Ufp(inst));
        assert!(matches!(
            rep.issues[..],
            [ValidationIssue::UncoverablePoint {
                t: 2,
                demand: 1,
                capacity: 0
            }]
        ));
    }

    #[test]
    fn classic_reduction() {
        let inst = from_classic_kc(&[3], &[rat(5)], 2).unwrap();
        assert_eq!(inst.items[0].costs, CostFunction::list_ints(&[5, 5]));

        let zero = from_classic_kc(&[1], &[rat(0)], 1).unwrap();
        assert_eq!(zero.items[0].costs, CostFunction::list_ints(&[0]));

        assert!(matches!(
            from_classic_kc(&[0], &[rat(1)], 1),
            Err(ModelError::ZeroCapacity { item: 0 })
        ));

        let two = from_classic_kc(&[2, 2], &[rat(1), rat(4)], 3).unwrap();
        assert_eq!(two.items[0].costs, CostFunction::list_ints(&[1, 1]));
        assert_eq!(two.items[1].costs, CostFunction::list_ints(&[4, 4]));
    }

    #[test]
    fn cost_and_feasibility() {
        let inst = kc(&[&[1, 2]], 2);
        let cost = solution_cost(&inst, &IntegralSolution { levels: vec![2] }).unwrap();
        assert_eq!(cost, Cost::from_int(2));

        let with_inf = Instance::Kc(KcInstance::new(
            vec![CostFunction::list(vec![Cost::from_int(1), Cost::Infinite])],
            2,
        ));
        let c = solution_cost(&with_inf, &IntegralSolution { levels: vec![2] }).unwrap();
        assert_eq!(c, Cost::Infinite);

        let two = kc(&[&[2, 3], &[2, 4]], 3);
        let c = solution_cost(&two, &IntegralSolution { levels: vec![2, 1] }).unwrap();
        assert_eq!(c, Cost::from_int(5));
        assert!(is_feasible(&two, &IntegralSolution { levels: vec![2, 1] }));

        assert!(matches!(
            solution_cost(&two, &IntegralSolution { levels: vec![3, 0] }),
            Err(ModelError::LevelOutOfRange {
                item: 0,
                level: 3,
                m: 2
            })
        ));
    }

    #[test]
    fn ufp_point_feasibility() {
        let inst = Instance::Ufp(ufp(
            &[((1, 1), &[1]), ((2, 2), &[1]), ((1, 2), &[1])],
            &[1, 1],
        ));
        assert!(is_feasible(
            &inst,
            &IntegralSolution {
                levels: vec![0, 0, 1]
            }
        ));
        assert!(!is_feasible(
            &inst,
            &IntegralSolution {
                levels: vec![1, 0, 0]
            }
        ));
    }

    #[test]
    fn coordinate_compression() {
        let (c, map) = compress_coordinates(&ufp(&[((1, 5), &[1, 1, 1])], &[1, 2, 1, 0, 3]));
        assert_eq!(c.demands, vec![3]);
        assert_eq!(c.items[0].interval, (1, 1));
        assert_eq!(map.orig_range_of_new, vec![(1, 5)]);

        let (c, map) = compress_coordinates(&ufp(&[((1, 1), &[1]), ((3, 3), &[1])], &[1, 0, 1]));
        assert_eq!(c.demands, vec![1, 1]);
        assert_eq!(c.items[0].interval, (1, 1));
        assert_eq!(c.items[1].interval, (2, 2));
        assert_eq!(map.new_of_orig, vec![Some(0), None, Some(1)]);

        // already compressed: identity
        let base = ufp(&[((1, 1), &[1]), ((2, 2), &[2])], &[1, 2]);
        let (c, _) = compress_coordinates(&base);
        assert_eq!(c, base);
    }

    #[test]
    fn normalization_trims_and_caps() {
        let inst = KcInstance::new(
            vec![
                CostFunction::list(vec![Cost::from_int(1), Cost::Infinite, Cost::from_int(5)]),
                CostFunction::list_ints(&[1, 2, 3, 4]),
            ],
            2,
        );
        let norm = inst.normalized();
        assert_eq!(norm.items[0].costs, CostFunction::list_ints(&[1]));
        assert_eq!(norm.items[1].costs, CostFunction::list_ints(&[1, 2]));
        assert_eq!(norm.normalized(), norm);
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = Instance::Kc(KcInstance::new(
            vec![
                CostFunction::list(vec![Cost::from_int(1), Cost::Infinite]),
                CostFunction::steps(vec![
                    crate::model::StepPiece {
                        upto: 2,
                        value: Cost::Finite(crate::model::cost::ratio(3, 2)),
                    },
                    crate::model::StepPiece {
                        upto: 4,
                        value: Cost::from_int(3),
                    },
                ]),
            ],
            3,
        ));
        let js = serde_json::to_string(&inst).unwrap();
        assert!(js.contains("\"type\":\"kc\""));
        assert!(js.contains("\"model\":\"steps\""));
        let back: Instance = serde_json::from_str(&js).unwrap();
        assert_eq!(back, inst);

        let u = Instance::Ufp(ufp(&[((1, 2), &[1])], &[1, 0]));
        let js = serde_json::to_string(&u).unwrap();
        assert!(js.contains("\"interval\":[1,2]"));
        let back: Instance = serde_json::from_str(&js).unwrap();
        assert_eq!(back, u);
    }
}

//! Primal-dual water-filling solver for demand cover, with a certificate
//! checker that re-verifies the 2x guarantee from the dual ledger alone.

use num_traits::Zero;

use crate::engine::{Certificate, Engine, EngineError};
use crate::model::{
    validate, Instance, IntegralSolution, KcInstance, PieceView, Rat, ValidationIssue,
    ValidationReport,
};

#[derive(Debug, thiserror::Error)]
pub enum PdError {
    #[error("instance is invalid or infeasible")]
    Infeasible(ValidationReport),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Solver output: levels, their cost, the dual ledger, and whether the
/// primal is within twice the dual objective (it always is).
#[derive(Clone, Debug)]
pub struct PdKcResult {
    pub solution: IntegralSolution,
    pub primal_cost: Rat,
    pub certificate: Certificate,
    pub ratio_bound_ok: bool,
}

pub(crate) fn kc_piece_views(inst: &KcInstance) -> Vec<Vec<PieceView>> {
    inst.items.iter().map(|it| it.costs.piece_views()).collect()
}

/// Runs the water-filling algorithm: while residual demand remains, raise
/// the dual until a bucket fills, then either take a block (when the lowest
/// pending bucket filled) or redirect spill pointers. Simultaneously tight
/// buckets are handled in (item, bucket) order, stopping the moment the
/// demand is covered.
pub fn solve_pd_kc(instance: &KcInstance, audit: bool) -> Result<PdKcResult, PdError> {
    let report = validate(&Instance::Kc(instance.clone()));
    let only_zero_demand = report
        .issues
        .iter()
        .all(|i| matches!(i, ValidationIssue::ZeroDemand));
    if !report.ok() && !only_zero_demand {
        return Err(PdError::Infeasible(report));
    }

    let inst = instance.normalized();
    let views = kc_piece_views(&inst);
    let mut engine = Engine::new(&views, audit);
    let demand = inst.demand;

    'main: while engine.total_taken_units() < demand {
        let residual = demand - engine.total_taken_units();
        let mut maps = Vec::new();
        for i in 0..engine.n() {
            let stair = &engine.stairs[i];
            let hi = stair.domain_units().min(stair.taken_units + residual);
            let map = engine.rates(i, hi);
            if !map.is_empty() {
                maps.push((i, map));
            }
        }
        let (delta, _) = engine.next_event(&maps)?;
        let newly_full = engine.pour(&delta, &maps, residual, None)?;
        for (item, bucket) in newly_full {
            engine.on_full(item, bucket);
            if engine.total_taken_units() >= demand {
                break 'main;
            }
        }
    }

    let solution = IntegralSolution {
        levels: engine.levels(),
    };
    let primal_cost: Rat = engine
        .stairs
        .iter()
        .flat_map(|s| s.buckets[..s.taken_buckets].iter())
        .map(|b| b.capacity.clone())
        .sum();
    let certificate = engine.certificate;
    let ratio_bound_ok =
        primal_cost <= Rat::from_integer(2.into()) * certificate.dual_objective.clone();
    Ok(PdKcResult {
        solution,
        primal_cost,
        certificate,
        ratio_bound_ok,
    })
}

/// A failed certificate check, pointing at the offending raise or bucket.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CheckFailure {
    #[error("raise {raise}: audit rates are missing (solve with audit on)")]
    MissingTau { raise: usize },
    #[error("raise {raise}: rate entry ({item}, {bucket}) does not match any bucket")]
    InvalidTau {
        raise: usize,
        item: usize,
        bucket: u64,
    },
    #[error("solution covers {covered} of demand {demand} at point {t}")]
    PrimalInfeasible { t: u64, covered: u64, demand: u64 },
    #[error("item {item}: level {level} does not align with a bucket boundary")]
    LevelNotOnBoundary { item: usize, level: u64 },
    #[error("item {item} bucket {bucket}: replayed fill exceeds capacity")]
    DualInfeasible { item: usize, bucket: u64 },
    #[error("item {item} bucket {bucket}: taken but not tight")]
    TakenNotTight { item: usize, bucket: u64 },
    #[error("raise {raise}: weighted taken rates exceed {factor} x residual")]
    SlacknessViolated { raise: usize, factor: u64 },
    #[error("ledger replays to a different dual objective")]
    ObjectiveMismatch,
    #[error("claimed primal cost differs from the solution's cost")]
    CostMismatch,
    #[error("primal cost exceeds {factor} x dual objective")]
    RatioViolated { factor: u64 },
}

/// Outcome of a certificate audit; empty means every check passed.
#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub failures: Vec<CheckFailure>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Certificate audit shared by both solvers: ledger replay against bucket
/// capacities, tightness of taken buckets, the per-raise slackness bound
/// `sum(tau * z) <= factor * residual`, objective consistency, and the final
/// ratio inequality.
pub(crate) fn replay_checks(
    views: &[Vec<PieceView>],
    levels: &[u64],
    certificate: &Certificate,
    claimed_primal: &Rat,
    factor: u64,
    covers: impl Fn(usize, u64) -> bool,
    failures: &mut Vec<CheckFailure>,
) {
    let n = views.len();
    let factor_rat = Rat::from_integer(factor.into());

    // levels must sit on bucket boundaries; record which buckets are taken
    let mut taken: Vec<Vec<bool>> = Vec::with_capacity(n);
    for i in 0..n {
        let x = levels[i];
        if x != 0 && !views[i].iter().any(|v| v.hi == x) {
            failures.push(CheckFailure::LevelNotOnBoundary { item: i, level: x });
        }
        taken.push(views[i].iter().map(|v| v.hi <= x).collect());
    }

    // replay fills
    let mut fills: Vec<Vec<Rat>> = views.iter().map(|vs| vec![Rat::zero(); vs.len()]).collect();
    let mut replayed_objective = Rat::zero();
    for (ridx, raise) in certificate.raises.iter().enumerate() {
        replayed_objective += raise.delta.clone() * Rat::from_integer(raise.residual.into());
        let Some(tau) = &raise.tau else {
            failures.push(CheckFailure::MissingTau { raise: ridx });
            continue;
        };
        let mut weighted = Rat::zero();
        for &(item, bucket, rate) in tau {
            let valid_target = item < n
                && bucket >= 1
                && (bucket as usize) <= views[item].len()
                && raise.t.is_none_or(|t| covers(item, t));
            if !valid_target {
                failures.push(CheckFailure::InvalidTau {
                    raise: ridx,
                    item,
                    bucket,
                });
                continue;
            }
            let b = bucket as usize - 1;
            fills[item][b] += raise.delta.clone() * Rat::from_integer(rate.into());
            if taken[item][b] {
                weighted += Rat::from_integer(rate.into());
            }
        }
        if !raise.delta.is_zero()
            && weighted > factor_rat.clone() * Rat::from_integer(raise.residual.into())
        {
            failures.push(CheckFailure::SlacknessViolated {
                raise: ridx,
                factor,
            });
        }
    }

    if replayed_objective != certificate.dual_objective {
        failures.push(CheckFailure::ObjectiveMismatch);
    }

    for i in 0..n {
        for (b, view) in views[i].iter().enumerate() {
            let fill = &fills[i][b];
            if *fill > view.marginal {
                failures.push(CheckFailure::DualInfeasible {
                    item: i,
                    bucket: b as u64 + 1,
                });
            } else if taken[i][b] && *fill != view.marginal {
                failures.push(CheckFailure::TakenNotTight {
                    item: i,
                    bucket: b as u64 + 1,
                });
            }
        }
    }

    let actual_primal: Rat = (0..n)
        .flat_map(|i| {
            views[i]
                .iter()
                .zip(&taken[i])
                .filter(|(_, &t)| t)
                .map(|(v, _)| v.marginal.clone())
        })
        .sum();
    if actual_primal != *claimed_primal {
        failures.push(CheckFailure::CostMismatch);
    }
    if *claimed_primal > factor_rat * certificate.dual_objective.clone() {
        failures.push(CheckFailure::RatioViolated { factor });
    }
}

/// Verifies a solver result exactly: primal feasibility, dual feasibility by
/// ledger replay, tightness of every taken bucket, the per-raise slackness
/// bound with factor 2, and the ratio inequality.
pub fn check_certificate_kc(instance: &KcInstance, result: &PdKcResult) -> CheckReport {
    let inst = instance.normalized();
    let views = kc_piece_views(&inst);
    let mut failures = Vec::new();

    let covered: u64 = result.solution.levels.iter().sum();
    if covered < inst.demand {
        failures.push(CheckFailure::PrimalInfeasible {
            t: 1,
            covered,
            demand: inst.demand,
        });
    }

    replay_checks(
        &views,
        &result.solution.levels,
        &result.certificate,
        &result.primal_cost,
        2,
        |_, _| true,
        &mut failures,
    );
    CheckReport { failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::model::{is_feasible, rat, solution_cost, Cost, CostFunction};
    use crate::oracles::exact_kc;

    fn kc(items: &[&[i64]], demand: u64) -> KcInstance {
        KcInstance::new(
            items.iter().map(|v| CostFunction::list_ints(v)).collect(),
            demand,
        )
    }

    #[test]
    fn single_item_promise_dynamics() {
        // g = (3, 1): the cheap top bucket fills first and doubles the rate
        // of the bottom one; both raises happen at residual 2
        let result = solve_pd_kc(&kc(&[&[3, 4]], 2), true).unwrap();
        assert_eq!(result.solution.levels, vec![2]);
        assert_eq!(result.primal_cost, rat(4));
        assert_eq!(result.certificate.dual_objective, rat(4));
        let raises = &result.certificate.raises;
        assert_eq!(raises.len(), 2);
        assert_eq!(raises[0].delta, rat(1));
        assert_eq!(raises[0].residual, 2);
        assert_eq!(raises[0].tau, Some(vec![(0, 1, 1), (0, 2, 1)]));
        assert_eq!(raises[1].delta, rat(1));
        assert_eq!(raises[1].residual, 2);
        assert_eq!(raises[1].tau, Some(vec![(0, 1, 2)]));
        assert!(result.ratio_bound_ok);
        assert!(check_certificate_kc(&kc(&[&[3, 4]], 2), &result).passed());

        let (opt, _) = exact_kc(&kc(&[&[3, 4]], 2)).unwrap();
        assert_eq!(opt, Cost::Finite(rat(4)));
    }

    #[test]
    fn zero_bucket_and_truncation() {
        // item 1 is free and taken before any raise; the残 residual of 1 then
        // truncates item 2 to one active segment, whose zero-capacity upper
        // bucket is still swallowed by the take
        let inst = kc(&[&[0], &[1, 1]], 2);
        let result = solve_pd_kc(&inst, true).unwrap();
        assert_eq!(result.solution.levels, vec![1, 2]);
        assert_eq!(result.primal_cost, rat(1));
        assert_eq!(result.certificate.dual_objective, rat(1));
        assert!(result.ratio_bound_ok);
        assert!(is_feasible(&Instance::Kc(inst.clone()), &result.solution));
        assert!(check_certificate_kc(&inst, &result).passed());

        let (opt, _) = exact_kc(&inst).unwrap();
        assert_eq!(opt, Cost::Finite(rat(1)));
    }

    #[test]
    fn zero_demand_is_trivial() {
        let result = solve_pd_kc(&kc(&[&[1, 2]], 0), true).unwrap();
        assert_eq!(result.solution.levels, vec![0]);
        assert_eq!(result.primal_cost, rat(0));
        assert_eq!(result.certificate.dual_objective, rat(0));
        assert!(result.certificate.raises.is_empty());
    }

    #[test]
    fn infeasible_rejected() {
        assert!(matches!(
            solve_pd_kc(&kc(&[&[1]], 2), false),
            Err(PdError::Infeasible(_))
        ));
    }

    #[test]
    fn sandwich_on_random_instances() {
        let mut violations = 0;
        for seed in 0..120u64 {
            let inst = gen::random_kc_for_tests(seed, 6, 6, 20, 20);
            let result = solve_pd_kc(&inst, true).unwrap();
            let (opt, _) = exact_kc(&inst).unwrap();
            let opt = opt.finite().unwrap().clone();
            let dual = result.certificate.dual_objective.clone();
            let two = Rat::from_integer(2.into());
            if !(dual <= opt
                && opt <= result.primal_cost
                && result.primal_cost <= two * dual.clone())
            {
                violations += 1;
            }
            assert!(check_certificate_kc(&inst, &result).passed(), "seed {seed}");
            assert!(is_feasible(&Instance::Kc(inst.clone()), &result.solution));
            assert_eq!(
                solution_cost(&Instance::Kc(inst), &result.solution).unwrap(),
                Cost::Finite(result.primal_cost.clone())
            );
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn truncation_cap_never_grows() {
        // m_i(a) is non-increasing: residual never increases and levels only
        // grow, so re-derive per-iteration caps from the ledger
        let inst = gen::random_kc_for_tests(7, 5, 5, 10, 12);
        let result = solve_pd_kc(&inst, true).unwrap();
        let mut last = u64::MAX;
        for raise in &result.certificate.raises {
            assert!(raise.residual <= last);
            last = raise.residual;
        }
    }

    #[test]
    fn steps_and_list_forms_agree() {
        for seed in 0..40u64 {
            let steps_inst = gen::random_steps_kc_for_tests(seed, 4, 24, 30);
            let list_inst = KcInstance {
                demand: steps_inst.demand,
                items: steps_inst
                    .items
                    .iter()
                    .map(|it| crate::model::KcItem {
                        costs: it.costs.expand_steps_to_list(1 << 16).unwrap(),
                    })
                    .collect(),
            };
            let a = solve_pd_kc(&steps_inst, true).unwrap();
            let b = solve_pd_kc(&list_inst, true).unwrap();
            assert_eq!(a.primal_cost, b.primal_cost, "seed {seed}");
            assert_eq!(
                a.certificate.dual_objective, b.certificate.dual_objective,
                "seed {seed}"
            );
            assert_eq!(a.solution.levels, b.solution.levels, "seed {seed}");
        }
    }

    #[test]
    fn determinism_byte_for_byte() {
        let inst = gen::random_kc_for_tests(42, 6, 6, 20, 20);
        let a = solve_pd_kc(&inst, true).unwrap();
        let b = solve_pd_kc(&inst, true).unwrap();
        assert_eq!(
            serde_json::to_string(&a.certificate).unwrap(),
            serde_json::to_string(&b.certificate).unwrap()
        );
        assert_eq!(a.solution, b.solution);
    }

    #[test]
    fn checker_catches_injected_faults() {
        let inst = kc(&[&[3, 4], &[2, 2]], 3);
        let good = solve_pd_kc(&inst, true).unwrap();
        assert!(check_certificate_kc(&inst, &good).passed());

        // inflate the last recorded delta: some bucket overfills on replay
        let mut bad = good.clone();
        let last = bad.certificate.raises.len() - 1;
        bad.certificate.raises[last].delta += rat(1);
        let report = check_certificate_kc(&inst, &bad);
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, CheckFailure::DualInfeasible { .. })));

        // decrement a level: feasibility or tightness breaks
        let mut bad = good.clone();
        bad.solution.levels[0] -= 1;
        let report = check_certificate_kc(&inst, &bad);
        assert!(report.failures.iter().any(|f| matches!(
            f,
            CheckFailure::PrimalInfeasible { .. } | CheckFailure::CostMismatch
        )));

        // forge a rate downward: a taken bucket is no longer paid for
        let mut bad = good.clone();
        for raise in bad.certificate.raises.iter_mut() {
            if let Some(tau) = raise.tau.as_mut() {
                if let Some(entry) = tau.iter_mut().find(|e| e.2 > 0) {
                    entry.2 -= 1;
                    break;
                }
            }
        }
        let report = check_certificate_kc(&inst, &bad);
        assert!(report
            .failures
            .iter()
            .any(|f| matches!(f, CheckFailure::TakenNotTight { .. })));
    }
}

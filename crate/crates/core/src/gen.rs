//! Seeded instance generators for tests and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Cost, CostFunction, Instance, KcInstance, StepPiece, UfpInstance, UfpItem};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("spec cannot produce a feasible instance: {reason}")]
    UnsatisfiableSpec { reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Kc,
    Ufp,
}

/// Cost-curve families. `Adversarial` biases toward expensive first
/// segments with nearly free tails, the regime where truncation and spill
/// promises do the most work.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostFamily {
    UniformMarginals,
    Facility,
    ConvexQuadratic,
    Steps,
    Adversarial,
}

/// Declarative instance shape; generation is a pure function of the spec
/// (seed included).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    /// Inclusive range for the number of items.
    pub n: (usize, usize),
    /// Inclusive range for segments per item.
    pub m: (u64, u64),
    /// Inclusive range for the horizon (flow instances only).
    #[serde(default = "default_k_range")]
    pub k: (u64, u64),
    /// Inclusive range for the demand (per point, for flow instances).
    pub demand: (u64, u64),
    pub family: CostFamily,
    #[serde(default = "default_max_marginal")]
    pub max_marginal: u64,
    pub seed: u64,
}

fn default_k_range() -> (u64, u64) {
    (1, 8)
}

fn default_max_marginal() -> u64 {
    20
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, r: (T, T)) -> Result<(), GenError> {
    if r.0 > r.1 {
        return Err(GenError::UnsatisfiableSpec {
            reason: format!("empty {name} range {r:?}"),
        });
    }
    Ok(())
}

fn gen_curve(rng: &mut ChaCha8Rng, family: CostFamily, m: u64, max_marginal: u64) -> CostFunction {
    let max_marginal = max_marginal.max(1);
    match family {
        CostFamily::UniformMarginals => {
            let mut acc: i64 = 0;
            let values = (0..m)
                .map(|_| {
                    acc += rng.random_range(0..=max_marginal) as i64;
                    Cost::from_int(acc)
                })
                .collect();
            CostFunction::List { values }
        }
        CostFamily::Facility => {
            // activation plus linear rate, with every marginal at most the cap
            let c = rng.random_range(0..=max_marginal / 5) as i64;
            let b = rng.random_range(1..=max_marginal - c as u64) as i64;
            let values = (1..=m as i64).map(|x| Cost::from_int(b + c * x)).collect();
            CostFunction::List { values }
        }
        CostFamily::ConvexQuadratic => {
            // marginals a(2x-1)+b grow strictly; keep the largest within the
            // cap whenever the domain allows it
            let top = 2 * m - 1;
            let a = rng.random_range(1..=(max_marginal / top).max(1)) as i64;
            let b_max = max_marginal.saturating_sub(a as u64 * top);
            let b = rng.random_range(0..=b_max) as i64;
            let values = (1..=m as i64)
                .map(|x| Cost::from_int(a * x * x + b * x))
                .collect();
            CostFunction::List { values }
        }
        CostFamily::Steps => {
            let pieces_wanted = rng.random_range(1..=4.min(m)) as usize;
            let mut cuts: Vec<u64> = Vec::new();
            while cuts.len() + 1 < pieces_wanted {
                let c = rng.random_range(1..m);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.sort_unstable();
            cuts.push(m);
            let mut value: i64 = rng.random_range(0..=max_marginal) as i64;
            let pieces = cuts
                .into_iter()
                .map(|upto| {
                    let p = StepPiece {
                        upto,
                        value: Cost::from_int(value),
                    };
                    value += rng.random_range(1..=max_marginal) as i64;
                    p
                })
                .collect();
            CostFunction::Steps { pieces }
        }
        CostFamily::Adversarial => {
            let first = rng.random_range(max_marginal.div_ceil(2)..=max_marginal) as i64;
            let mut acc = first;
            let values = std::iter::once(Cost::from_int(first))
                .chain((1..m).map(|_| {
                    acc += rng.random_range(0..=1);
                    Cost::from_int(acc)
                }))
                .collect();
            CostFunction::List { values }
        }
    }
}

/// Generates a feasible, validated instance. Deterministic per spec.
pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    check_range("n", spec.n)?;
    check_range("m", spec.m)?;
    check_range("k", spec.k)?;
    check_range("demand", spec.demand)?;
    if spec.n.1 == 0 {
        return Err(GenError::UnsatisfiableSpec {
            reason: "need at least one item".into(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = rng.random_range(spec.n.0.max(1)..=spec.n.1);

    match spec.kind {
        GenKind::Kc => {
            if spec.demand.0 > spec.n.1 as u64 * spec.m.1 {
                return Err(GenError::UnsatisfiableSpec {
                    reason: "demand floor exceeds any achievable capacity".into(),
                });
            }
            let mut items = Vec::with_capacity(n);
            let mut capacity = 0u64;
            for _ in 0..n {
                let m = rng.random_range(spec.m.0.max(1)..=spec.m.1);
                capacity += m;
                items.push(gen_curve(&mut rng, spec.family, m, spec.max_marginal));
            }
            if capacity < spec.demand.0 {
                return Err(GenError::UnsatisfiableSpec {
                    reason: format!(
                        "drawn capacity {capacity} cannot reach demand floor {}",
                        spec.demand.0
                    ),
                });
            }
            let demand = rng.random_range(spec.demand.0.max(1)..=spec.demand.1.min(capacity));
            let inst = Instance::Kc(KcInstance::new(items, demand));
            debug_assert!(crate::model::validate(&inst).ok());
            Ok(inst)
        }
        GenKind::Ufp => {
            let k = rng.random_range(spec.k.0.max(1)..=spec.k.1);
            let mut items = Vec::with_capacity(n);
            for _ in 0..n {
                let m = rng.random_range(spec.m.0.max(1)..=spec.m.1);
                let s = rng.random_range(1..=k);
                let e = rng.random_range(s..=k);
                items.push(UfpItem {
                    interval: (s, e),
                    costs: gen_curve(&mut rng, spec.family, m, spec.max_marginal),
                });
            }
            let demands = (1..=k)
                .map(|t| {
                    let cap: u64 = items
                        .iter()
                        .filter(|it| it.interval.0 <= t && t <= it.interval.1)
                        .map(|it| it.costs.m())
                        .sum();
                    let want = rng.random_range(spec.demand.0..=spec.demand.1);
                    want.min(cap)
                })
                .collect();
            let inst = Instance::Ufp(UfpInstance { demands, items });
            debug_assert!(crate::model::validate(&inst).ok());
            Ok(inst)
        }
    }
}

fn family_for_seed(seed: u64) -> CostFamily {
    match seed % 4 {
        0 => CostFamily::UniformMarginals,
        1 => CostFamily::Facility,
        2 => CostFamily::ConvexQuadratic,
        _ => CostFamily::Adversarial,
    }
}

/// Small feasible demand-cover instance for test suites; the cost family
/// cycles with the seed.
pub fn random_kc_for_tests(
    seed: u64,
    n_max: usize,
    m_max: u64,
    max_marginal: u64,
    d_max: u64,
) -> KcInstance {
    let spec = GenSpec {
        kind: GenKind::Kc,
        n: (1, n_max),
        m: (1, m_max),
        k: default_k_range(),
        demand: (1, d_max),
        family: family_for_seed(seed),
        max_marginal,
        seed,
    };
    match generate(&spec).expect("test spec is satisfiable") {
        Instance::Kc(kc) => kc,
        Instance::Ufp(_) => unreachable!(),
    }
}

/// Step-form demand-cover instance with at most `m_units_max` materialized
/// segments per item.
pub fn random_steps_kc_for_tests(
    seed: u64,
    n_max: usize,
    m_units_max: u64,
    d_max: u64,
) -> KcInstance {
    let spec = GenSpec {
        kind: GenKind::Kc,
        n: (1, n_max),
        m: (2, m_units_max),
        k: default_k_range(),
        demand: (1, d_max),
        family: CostFamily::Steps,
        max_marginal: 9,
        seed,
    };
    match generate(&spec).expect("test spec is satisfiable") {
        Instance::Kc(kc) => kc,
        Instance::Ufp(_) => unreachable!(),
    }
}

/// Step-form flow-cover instance with at most `m_units_max` materialized
/// segments per item.
pub fn random_steps_ufp_for_tests(
    seed: u64,
    n_max: usize,
    m_units_max: u64,
    k_max: u64,
    dt_max: u64,
) -> UfpInstance {
    let spec = GenSpec {
        kind: GenKind::Ufp,
        n: (1, n_max),
        m: (2, m_units_max),
        k: (1, k_max),
        demand: (0, dt_max),
        family: CostFamily::Steps,
        max_marginal: 9,
        seed,
    };
    match generate(&spec).expect("test spec is satisfiable") {
        Instance::Ufp(ufp) => ufp,
        Instance::Kc(_) => unreachable!(),
    }
}

/// Small feasible flow-cover instance for test suites.
pub fn random_ufp_for_tests(
    seed: u64,
    n_max: usize,
    m_max: u64,
    k_max: u64,
    dt_max: u64,
) -> UfpInstance {
    let spec = GenSpec {
        kind: GenKind::Ufp,
        n: (1, n_max),
        m: (1, m_max),
        k: (1, k_max),
        demand: (0, dt_max),
        family: family_for_seed(seed),
        max_marginal: 10,
        seed,
    };
    match generate(&spec).expect("test spec is satisfiable") {
        Instance::Ufp(ufp) => ufp,
        Instance::Kc(_) => unreachable!(),
    }
}

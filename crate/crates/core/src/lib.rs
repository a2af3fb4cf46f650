//! Exact solvers for covering problems where each item contributes integer
//! units priced by an arbitrary non-decreasing cost curve.
//!
//! Two problems are covered: demand cover (pick per-item levels whose total
//! meets a scalar demand) and flow cover on a line (levels must meet a
//! per-point demand on every point of each item's interval). The crate
//! provides:
//!
//! * primal-dual water-filling solvers with machine-checkable dual
//!   certificates ([`pd_kc`], [`pd_ufp`]) driven by a shared bucket engine
//!   ([`engine`]);
//! * exact ground-truth oracles and the cut separation routine ([`oracles`]);
//! * an LP cutting-plane + rounding pipeline over exact rational arithmetic
//!   ([`lp_round`]);
//! * piecewise-constant compression of oracle-given cost curves with a
//!   `(1+eps)` guarantee ([`compress`]);
//! * seeded instance generators ([`gen`]) and a CLI ([`cli`]).
//!
//! All arithmetic is exact: costs, fills and dual values are arbitrary
//! precision rationals, so every "constraint is tight" decision is an exact
//! equality.
//!
//! ```
//! use nlcover::model::{CostFunction, KcInstance};
//! use nlcover::pd_kc::{check_certificate_kc, solve_pd_kc};
//!
//! // two items: marginal costs (3, 1) and (2, 2); cover a demand of 3
//! let instance = KcInstance::new(
//!     vec![
//!         CostFunction::list_ints(&[3, 4]),
//!         CostFunction::list_ints(&[2, 4]),
//!     ],
//!     3,
//! );
//! let result = solve_pd_kc(&instance, true).unwrap();
//! assert!(result.solution.levels.iter().sum::<u64>() >= 3);
//! assert!(result.ratio_bound_ok); // primal within twice the dual bound
//! assert!(check_certificate_kc(&instance, &result).passed());
//! ```

pub mod cli;
pub mod compress;
pub mod engine;
pub mod gen;
pub mod lp_round;
pub mod model;
pub mod oracles;
pub mod pd_kc;
pub mod pd_ufp;

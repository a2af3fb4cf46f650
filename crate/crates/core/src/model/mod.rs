//! Domain types, validation, normalization and JSON I/O.

pub mod cost;
pub mod func;
pub mod instance;

pub use cost::{decimal6, format_rat, parse_rat, rat, ratio, Cost, Rat};
pub use func::{CostFunction, PieceView, StepPiece};
pub use instance::{
    compress_coordinates, from_classic_kc, is_feasible, solution_cost, validate, Instance,
    IntegralSolution, KcInstance, KcItem, PointMap, SolutionFile, UfpInstance, UfpItem,
    ValidationIssue, ValidationReport,
};

/// Errors from model-level operations.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("item {item}: level {level} exceeds domain size {m}")]
    LevelOutOfRange { item: usize, level: u64, m: u64 },
    #[error("cannot materialize {m} segments (cap {cap})")]
    MaterializationTooLarge { m: u64, cap: u64 },
    #[error("item {item}: capacity must be at least 1")]
    ZeroCapacity { item: usize },
}

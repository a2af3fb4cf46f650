//! Piecewise-constant compression of oracle-given cost curves.
//!
//! An oracle exposes point queries `f(j)` over `1..=m` for a possibly huge
//! `m`. Compression rounds every positive finite value up to the next power
//! of `1+eps` and finds the maximal constant runs by binary search, so the
//! result is a step curve with `f <= f~ <= (1+eps) f` everywhere and at most
//! `ceil(log_{1+eps} f(m)) + 2` pieces when values are scaled to naturals
//! (zero values and an infinite tail each contribute one extra piece).
//! Powers of `1+eps` are exact rationals computed by repeated
//! multiplication, never through logarithms.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Cost, CostFunction, Rat, StepPiece};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CompressError {
    #[error("eps must be positive")]
    InvalidEpsilon,
    #[error("oracle must expose at least one segment")]
    EmptyDomain,
    #[error("oracle decreases near segment {j}")]
    NonMonotoneOracle { j: u64 },
    #[error("compressed value violates the two-sided bound at segment {j}")]
    BoundViolated { j: u64 },
    #[error("{pieces} pieces exceed the allowed {bound}")]
    PieceCountExceeded { pieces: usize, bound: usize },
}

/// A point-query cost curve over `1..=m`; queries are counted.
pub struct CostOracle {
    m: u64,
    eval: Box<dyn Fn(u64) -> Cost>,
    queries: Cell<u64>,
    seen: RefCell<BTreeMap<u64, Cost>>,
}

impl CostOracle {
    /// Wraps a closure. Monotonicity is spot-checked on a handful of random
    /// index pairs; later queries keep watching for decreases.
    pub fn new(m: u64, eval: Box<dyn Fn(u64) -> Cost>) -> Result<CostOracle, CompressError> {
        if m == 0 {
            return Err(CompressError::EmptyDomain);
        }
        let oracle = CostOracle {
            m,
            eval,
            queries: Cell::new(0),
            seen: RefCell::new(BTreeMap::new()),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x0c0_ffee ^ m);
        for _ in 0..16.min(m) {
            let j = rng.random_range(1..=m);
            let jp = rng.random_range(j..=m);
            oracle.eval(j)?;
            oracle.eval(jp)?;
        }
        Ok(oracle)
    }

    pub fn from_cost_function(cf: &CostFunction) -> Result<CostOracle, CompressError> {
        let cf = cf.clone();
        CostOracle::new(cf.m(), Box::new(move |j| cf.value_at(j)))
    }

    /// `f(j) = scale * j^degree`.
    pub fn polynomial(m: u64, degree: u32, scale: u64) -> Result<CostOracle, CompressError> {
        CostOracle::new(
            m,
            Box::new(move |j| {
                let base = num_bigint::BigInt::from(j).pow(degree);
                Cost::Finite(Rat::from_integer(base * num_bigint::BigInt::from(scale)))
            }),
        )
    }

    /// Activation cost plus a linear rate, infinite past the capacity:
    /// `f(j) = b + c j` for `j <= u`.
    pub fn facility(m: u64, b: u64, c: u64, u: u64) -> Result<CostOracle, CompressError> {
        CostOracle::new(
            m,
            Box::new(move |j| {
                if j > u {
                    Cost::Infinite
                } else {
                    Cost::Finite(Rat::from_integer((b + c * j).into()))
                }
            }),
        )
    }

    /// `f(j) = a j^2 + b j`.
    pub fn quadratic(m: u64, a: u64, b: u64) -> Result<CostOracle, CompressError> {
        CostOracle::new(
            m,
            Box::new(move |j| Cost::Finite(Rat::from_integer((a * j * j + b * j).into()))),
        )
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn queries(&self) -> u64 {
        self.queries.get()
    }

    pub fn reset_queries(&self) {
        self.queries.set(0);
    }

    /// Queries `f(j)`, watching the growing sample for monotonicity.
    pub fn eval(&self, j: u64) -> Result<Cost, CompressError> {
        assert!((1..=self.m).contains(&j), "query out of domain");
        self.queries.set(self.queries.get() + 1);
        let v = (self.eval)(j);
        let mut seen = self.seen.borrow_mut();
        if let Some((_, prev)) = seen.range(..j).next_back() {
            if *prev > v {
                return Err(CompressError::NonMonotoneOracle { j });
            }
        }
        if let Some((_, next)) = seen.range(j + 1..).next() {
            if v > *next {
                return Err(CompressError::NonMonotoneOracle { j });
            }
        }
        seen.insert(j, v.clone());
        Ok(v)
    }
}

/// Exact powers of `1+eps`, grown lazily in both directions.
struct PowerLadder {
    base: Rat,
    pos: Vec<Rat>,
    neg: Vec<Rat>,
}

impl PowerLadder {
    fn new(eps: &Rat) -> PowerLadder {
        PowerLadder {
            base: Rat::one() + eps.clone(),
            pos: vec![Rat::one()],
            neg: vec![Rat::one()],
        }
    }

    fn power(&mut self, e: i64) -> Rat {
        if e >= 0 {
            let e = e as usize;
            while self.pos.len() <= e {
                let next = self.pos.last().unwrap().clone() * self.base.clone();
                self.pos.push(next);
            }
            self.pos[e].clone()
        } else {
            let t = (-e) as usize;
            while self.neg.len() <= t {
                let next = self.neg.last().unwrap().clone() / self.base.clone();
                self.neg.push(next);
            }
            self.neg[t].clone()
        }
    }

    /// Smallest integer `e` with `(1+eps)^e >= v`, for positive `v`.
    fn ceil_exponent(&mut self, v: &Rat) -> i64 {
        assert!(*v > Rat::zero());
        if *v <= Rat::one() {
            // largest t with base^-t >= v gives e = -t
            let mut t = 0usize;
            while self.power(-(t as i64 + 1)) >= *v {
                t += 1;
            }
            -(t as i64)
        } else {
            let mut e = 1usize;
            while self.power(e as i64) < *v {
                e += 1;
            }
            e as i64
        }
    }
}

/// Largest `j` in `[lo, hi]` satisfying the monotone predicate, assuming
/// `pred(lo)` holds.
fn last_true(
    lo: u64,
    hi: u64,
    mut pred: impl FnMut(u64) -> Result<bool, CompressError>,
) -> Result<u64, CompressError> {
    let (mut lo, mut hi) = (lo, hi);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// Rounds the oracle up to powers of `1+eps` and returns the step curve
/// with maximal constant pieces, found by binary search per piece.
pub fn compress_function(oracle: &CostOracle, eps: &Rat) -> Result<CostFunction, CompressError> {
    if *eps <= Rat::zero() {
        return Err(CompressError::InvalidEpsilon);
    }
    let m = oracle.m();
    let mut ladder = PowerLadder::new(eps);
    let mut pieces: Vec<StepPiece> = Vec::new();

    // zero prefix
    let mut cur = if oracle.eval(1)?.is_zero() {
        if oracle.eval(m)?.is_zero() {
            return Ok(CostFunction::steps(vec![StepPiece {
                upto: m,
                value: Cost::zero(),
            }]));
        }
        let last_zero = last_true(1, m, |j| Ok(oracle.eval(j)?.is_zero()))?;
        pieces.push(StepPiece {
            upto: last_zero,
            value: Cost::zero(),
        });
        last_zero + 1
    } else {
        1
    };

    // infinite suffix
    let finite_end = if oracle.eval(m)?.is_infinite() {
        if oracle.eval(cur)?.is_infinite() {
            pieces.push(StepPiece {
                upto: m,
                value: Cost::Infinite,
            });
            return Ok(CostFunction::steps(pieces));
        }
        last_true(cur, m, |j| Ok(!oracle.eval(j)?.is_infinite()))?
    } else {
        m
    };

    while cur <= finite_end {
        let v = oracle.eval(cur)?;
        let v = v.finite().expect("finite region").clone();
        let exponent = ladder.ceil_exponent(&v);
        let threshold = ladder.power(exponent);
        let upto = last_true(cur, finite_end, |j| {
            Ok(match oracle.eval(j)? {
                Cost::Finite(f) => f <= threshold,
                Cost::Infinite => false,
            })
        })?;
        pieces.push(StepPiece {
            upto,
            value: Cost::Finite(threshold),
        });
        cur = upto + 1;
    }

    if finite_end < m {
        pieces.push(StepPiece {
            upto: m,
            value: Cost::Infinite,
        });
    }
    Ok(CostFunction::steps(pieces))
}

/// Verification outcome for one compressed curve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressionStats {
    pub pieces: usize,
    pub sampled: usize,
    /// Whether the piece-count bound applied (positive values of at least
    /// one, as after natural scaling).
    pub count_checked: bool,
}

/// Checks `f(j) <= f~(j) <= (1+eps) f(j)` at all piece boundaries and at a
/// random sample of interior points, plus the piece-count bound
/// `ceil(log_{1+eps} f_max) + 2` when the curve's positive values are
/// naturally scaled (at least one).
pub fn verify_compression(
    oracle: &CostOracle,
    compressed: &CostFunction,
    eps: &Rat,
    sample_budget: usize,
) -> Result<CompressionStats, CompressError> {
    if *eps <= Rat::zero() {
        return Err(CompressError::InvalidEpsilon);
    }
    let m = oracle.m();
    assert_eq!(compressed.m(), m, "domains must agree");
    let factor = Rat::one() + eps.clone();

    let mut points: Vec<u64> = vec![1, m];
    if let CostFunction::Steps { pieces } = compressed {
        for p in pieces {
            points.push(p.upto);
            if p.upto < m {
                points.push(p.upto + 1);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xfacade);
    for _ in 0..sample_budget {
        points.push(rng.random_range(1..=m));
    }
    points.sort_unstable();
    points.dedup();

    let sampled = points.len();
    for j in points {
        let f = oracle.eval(j)?;
        let ft = compressed.value_at(j);
        let ok = match (&f, &ft) {
            (Cost::Infinite, Cost::Infinite) => true,
            (Cost::Infinite, Cost::Finite(_)) | (Cost::Finite(_), Cost::Infinite) => false,
            (Cost::Finite(f), Cost::Finite(ft)) => *f <= *ft && *ft <= factor.clone() * f.clone(),
        };
        if !ok {
            return Err(CompressError::BoundViolated { j });
        }
    }

    let (pieces, max_finite, min_positive) = match compressed {
        CostFunction::Steps { pieces } => {
            let max_finite = pieces
                .iter()
                .filter_map(|p| p.value.finite())
                .next_back()
                .cloned();
            let min_positive = pieces
                .iter()
                .filter_map(|p| p.value.finite())
                .find(|v| !v.is_zero())
                .cloned();
            (pieces.len(), max_finite, min_positive)
        }
        CostFunction::List { .. } => unreachable!("compression always yields steps"),
    };

    // the compressed values only round up, so a sub-unit compressed value
    // witnesses a sub-unit input; claim the count bound only above one
    let count_checked = matches!(&min_positive, Some(v) if *v >= Rat::one());
    if count_checked {
        let mut ladder = PowerLadder::new(eps);
        let bound = match &max_finite {
            Some(v) if *v > Rat::zero() => ladder.ceil_exponent(v).max(0) as usize + 2,
            _ => 2,
        };
        if pieces > bound {
            return Err(CompressError::PieceCountExceeded { pieces, bound });
        }
    }

    Ok(CompressionStats {
        pieces,
        sampled,
        count_checked,
    })
}

//! Exact cost values: non-negative rationals extended with an `Infinite` point.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Exact rational scalar used everywhere in the crate.
pub type Rat = BigRational;

/// Shorthand for an integer-valued rational.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Shorthand for `p/q`. Panics if `q == 0`.
pub fn ratio(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Renders a rational as `p` (integral) or `p/q` (reduced).
pub fn format_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p` or `p/q` with arbitrary-precision integers.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    match s.split_once('/') {
        None => {
            let n = BigInt::from_str(s).map_err(|e| format!("bad integer {s:?}: {e}"))?;
            Ok(Rat::from_integer(n))
        }
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|e| format!("bad numerator {p:?}: {e}"))?;
            let q =
                BigInt::from_str(q.trim()).map_err(|e| format!("bad denominator {q:?}: {e}"))?;
            if q.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(Rat::new(p, q))
        }
    }
}

/// Renders a rational in fixed-point decimal with six places (round half away
/// from zero). Used for human-facing ratio columns next to the exact value.
pub fn decimal6(r: &Rat) -> String {
    let scale = BigInt::from(1_000_000i64);
    let scaled = r * Rat::from_integer(scale.clone());
    let num = scaled.numer().clone();
    let den = scaled.denom().clone();
    let (q, rem) = num_integer::Integer::div_rem(&num, &den);
    let mut q = q;
    // round half away from zero
    if (&rem * BigInt::from(2)).abs() >= den {
        if num.is_negative() {
            q -= BigInt::one();
        } else {
            q += BigInt::one();
        }
    }
    let neg = q.is_negative();
    let q = q.abs();
    let (int, frac) = num_integer::Integer::div_rem(&q, &scale);
    format!("{}{}.{:06}", if neg { "-" } else { "" }, int, frac)
}

/// A cost: an exact rational or the distinguished infinite value.
///
/// `Infinite` compares strictly greater than every finite value and absorbs
/// addition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cost {
    Finite(Rat),
    Infinite,
}

impl Cost {
    pub fn zero() -> Self {
        Cost::Finite(Rat::zero())
    }

    pub fn from_int(n: i64) -> Self {
        Cost::Finite(rat(n))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Cost::Infinite)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Cost::Finite(r) if r.is_zero())
    }

    /// The finite value, if any.
    pub fn finite(&self) -> Option<&Rat> {
        match self {
            Cost::Finite(r) => Some(r),
            Cost::Infinite => None,
        }
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, Cost::Finite(r) if r.is_negative())
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Cost::Infinite, Cost::Infinite) => Ordering::Equal,
            (Cost::Infinite, Cost::Finite(_)) => Ordering::Greater,
            (Cost::Finite(_), Cost::Infinite) => Ordering::Less,
            (Cost::Finite(a), Cost::Finite(b)) => a.cmp(b),
        }
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        match (self, rhs) {
            (Cost::Finite(a), Cost::Finite(b)) => Cost::Finite(a + b),
            _ => Cost::Infinite,
        }
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        let lhs = std::mem::replace(self, Cost::Infinite);
        *self = lhs + rhs;
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(r) => write!(f, "{}", format_rat(r)),
            Cost::Infinite => write!(f, "inf"),
        }
    }
}

// Wire format: a JSON integer, a string "p/q" (or "p" for big integers), or
// the string "inf". Integral values that fit an i64 serialize as numbers so
// that files stay readable; everything round-trips exactly.

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cost::Infinite => serializer.serialize_str("inf"),
            Cost::Finite(r) => serialize_rat(r, serializer),
        }
    }
}

pub(crate) fn serialize_rat<S: Serializer>(r: &Rat, serializer: S) -> Result<S::Ok, S::Error> {
    if r.is_integer() {
        if let Some(n) = r.numer().to_i64() {
            return serializer.serialize_i64(n);
        }
    }
    serializer.serialize_str(&format_rat(r))
}

struct CostVisitor;

impl Visitor<'_> for CostVisitor {
    type Value = Cost;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "an integer, a string \"p/q\", or \"inf\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Cost, E> {
        Ok(Cost::Finite(rat(v)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Cost, E> {
        Ok(Cost::Finite(Rat::from_integer(BigInt::from(v))))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Cost, E> {
        if v == "inf" {
            return Ok(Cost::Infinite);
        }
        parse_rat(v).map(Cost::Finite).map_err(de::Error::custom)
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Cost, D::Error> {
        deserializer.deserialize_any(CostVisitor)
    }
}

/// Serde adapter for plain `Rat` fields using the same wire format as `Cost`
/// (minus "inf").
pub mod rat_serde {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        serialize_rat(r, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        struct RatVisitor;
        impl Visitor<'_> for RatVisitor {
            type Value = Rat;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "an integer or a string \"p/q\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
                Ok(rat(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
                Ok(Rat::from_integer(BigInt::from(v)))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
                parse_rat(v).map_err(de::Error::custom)
            }
        }
        d.deserialize_any(RatVisitor)
    }
}

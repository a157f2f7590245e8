//! Exact rational arithmetic helpers.
//!
//! All sparsity thresholds, witness parameters and volume windows compare in
//! exact rationals; floating point never reaches control flow.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Ratio = BigRational;

pub fn ratio(num: i64, den: i64) -> Ratio {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

pub fn ratio_u(num: u64, den: u64) -> Ratio {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_u64(v: u64) -> Ratio {
    Ratio::from_integer(BigInt::from(v))
}

/// `⌈r⌉` clamped to u64; errors are impossible for the parameter ranges used
/// here, so saturate instead.
pub fn ceil_u64(r: &Ratio) -> u64 {
    let c = r.ceil();
    c.to_integer().to_u64().unwrap_or(u64::MAX)
}

pub fn floor_u64(r: &Ratio) -> u64 {
    if r.is_negative() {
        return 0;
    }
    r.floor().to_integer().to_u64().unwrap_or(u64::MAX)
}

/// Exact comparison `lhs <= r` for integer lhs.
pub fn le_ratio(lhs: u64, r: &Ratio) -> bool {
    &from_u64(lhs) <= r
}

/// Exact comparison `lhs < r` for integer lhs.
pub fn lt_ratio(lhs: u64, r: &Ratio) -> bool {
    &from_u64(lhs) < r
}

/// `⌊log2(max(m, 2))⌋` as used by round-count formulas.
pub fn floor_log2(m: u64) -> u32 {
    m.max(2).ilog2()
}

/// r^4 for the level schedule.
pub fn pow4(r: &Ratio) -> Ratio {
    let sq = r * r;
    &sq * &sq
}

pub fn is_probability(r: &Ratio) -> bool {
    r > &Ratio::zero() && r <= &Ratio::one()
}

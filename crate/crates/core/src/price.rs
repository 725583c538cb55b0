//! Exact dyadic rationals used as offered prices.
//!
//! Every built-in pricing machine emits prices of the form `k / 2^e`, and the
//! consistency checkers compare prices for equality, so prices are kept exact.
//! Small values (denominator exponent at most 64, numerator fitting a `u64`)
//! use an inline representation; anything deeper, such as binary search run for
//! a thousand rounds, falls back to a big integer numerator.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// A non-negative dyadic rational `num / 2^exp` in canonical form
/// (numerator odd, or zero with exponent zero).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Price(Repr);

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    Small { num: u64, exp: u32 },
    Big { num: BigUint, exp: u32 },
}

const SMALL_EXP_MAX: u32 = 64;

impl Price {
    pub fn zero() -> Self {
        Price(Repr::Small { num: 0, exp: 0 })
    }

    pub fn one() -> Self {
        Price(Repr::Small { num: 1, exp: 0 })
    }

    /// `num / 2^exp`, canonicalized.
    pub fn dyadic(num: u64, exp: u32) -> Self {
        Self::normalize_small(num as u128, exp)
    }

    /// `2^-exp`.
    pub fn pow2_neg(exp: u32) -> Self {
        if exp <= SMALL_EXP_MAX {
            Price(Repr::Small { num: 1, exp })
        } else {
            Price(Repr::Big {
                num: BigUint::from(1u8),
                exp,
            })
        }
    }

    /// Exact conversion of a finite, non-negative float (every such float is dyadic).
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() || x < 0.0 {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let bits = x.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, e2) = if raw_exp == 0 {
            (frac, -1074i64)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        // x = mantissa * 2^e2
        if e2 >= 0 {
            let num = BigUint::from(mantissa) << (e2 as usize);
            Some(Self::normalize_big(num, 0))
        } else {
            Some(Self::normalize_big(BigUint::from(mantissa), (-e2) as u32))
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small { num: 0, .. })
    }

    /// Exponent of the canonical denominator.
    pub fn denominator_exp(&self) -> u32 {
        match &self.0 {
            Repr::Small { exp, .. } | Repr::Big { exp, .. } => *exp,
        }
    }

    pub fn numerator(&self) -> BigUint {
        match &self.0 {
            Repr::Small { num, .. } => BigUint::from(*num),
            Repr::Big { num, .. } => num.clone(),
        }
    }

    /// Half of this price.
    pub fn half(&self) -> Self {
        match &self.0 {
            Repr::Small { num, exp } => Self::normalize_small(*num as u128, exp + 1),
            Repr::Big { num, exp } => Self::normalize_big(num.clone(), exp + 1),
        }
    }

    /// Midpoint `(self + other) / 2`.
    pub fn midpoint(&self, other: &Price) -> Self {
        (self + other).half()
    }

    /// `self - other`, or `None` if the result would be negative.
    pub fn checked_sub(&self, other: &Price) -> Option<Self> {
        if let (Repr::Small { num: a, exp: ea }, Repr::Small { num: b, exp: eb }) =
            (&self.0, &other.0)
        {
            let e = (*ea).max(*eb);
            let a = (*a as u128) << (e - ea);
            let b = (*b as u128) << (e - eb);
            return a.checked_sub(b).map(|d| Self::normalize_wide(d, e));
        }
        let (a, b, e) = self.aligned(other);
        if a < b {
            None
        } else {
            Some(Self::normalize_big(a - b, e))
        }
    }

    /// Nearest `f64` (exact whenever the value is representable).
    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small { num, exp } => {
                // num < 2^64 and exp <= 64; split to keep the scaling exact.
                (*num as f64) * 2f64.powi(-(*exp as i32))
            }
            Repr::Big { num, exp } => {
                let bits = num.bits();
                if bits > 64 {
                    let shift = bits - 64;
                    let top = (num >> shift).to_u64().unwrap_or(u64::MAX);
                    scale_pow2(top as f64, shift as i64 - *exp as i64)
                } else {
                    scale_pow2(num.to_u64().unwrap_or(0) as f64, -(*exp as i64))
                }
            }
        }
    }

    fn aligned(&self, other: &Price) -> (BigUint, BigUint, u32) {
        let ea = self.denominator_exp();
        let eb = other.denominator_exp();
        let e = ea.max(eb);
        let a = self.numerator() << ((e - ea) as usize);
        let b = other.numerator() << ((e - eb) as usize);
        (a, b, e)
    }

    fn normalize_small(num: u128, exp: u32) -> Self {
        Self::normalize_wide(num, exp)
    }

    fn normalize_wide(mut num: u128, mut exp: u32) -> Self {
        if num == 0 {
            return Self::zero();
        }
        let tz = num.trailing_zeros().min(exp);
        num >>= tz;
        exp -= tz;
        if exp <= SMALL_EXP_MAX && num <= u64::MAX as u128 {
            Price(Repr::Small {
                num: num as u64,
                exp,
            })
        } else {
            Self::promote(BigUint::from(num), exp)
        }
    }

    fn normalize_big(mut num: BigUint, mut exp: u32) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        let tz = (num.trailing_zeros().unwrap_or(0) as u32).min(exp);
        num >>= tz as usize;
        exp -= tz;
        Self::promote(num, exp)
    }

    fn promote(num: BigUint, exp: u32) -> Self {
        if exp <= SMALL_EXP_MAX {
            if let Some(n) = num.to_u64() {
                return Price(Repr::Small { num: n, exp });
            }
        }
        Price(Repr::Big { num, exp })
    }
}

fn scale_pow2(x: f64, e: i64) -> f64 {
    // powi saturates to 0/inf for very large |e|; apply in steps to stay exact.
    let mut x = x;
    let mut e = e;
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    x * 2f64.powi(e as i32)
}

impl Add for &Price {
    type Output = Price;

    fn add(self, other: &Price) -> Price {
        if let (Repr::Small { num: a, exp: ea }, Repr::Small { num: b, exp: eb }) =
            (&self.0, &other.0)
        {
            let e = (*ea).max(*eb);
            let a = (*a as u128) << (e - ea);
            let b = (*b as u128) << (e - eb);
            if let Some(s) = a.checked_add(b) {
                return Price::normalize_wide(s, e);
            }
        }
        let (a, b, e) = self.aligned(other);
        Price::normalize_big(a + b, e)
    }
}

impl Add for Price {
    type Output = Price;

    fn add(self, other: Price) -> Price {
        &self + &other
    }
}

impl Ord for Price {
    fn cmp(&self, other: &Self) -> Ordering {
        if let (Repr::Small { num: a, exp: ea }, Repr::Small { num: b, exp: eb }) =
            (&self.0, &other.0)
        {
            let e = (*ea).max(*eb);
            let a = (*a as u128) << (e - ea);
            let b = (*b as u128) << (e - eb);
            return a.cmp(&b);
        }
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for Price {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small { num, exp: 0 } => write!(f, "{num}"),
            Repr::Small { num, exp } if *exp < 64 => write!(f, "{num}/{}", 1u64 << exp),
            Repr::Small { num, exp } => write!(f, "{num}/2^{exp}"),
            Repr::Big { num, exp } => write!(f, "{num}/2^{exp}"),
        }
    }
}

impl fmt::Debug for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Price({self})")
    }
}

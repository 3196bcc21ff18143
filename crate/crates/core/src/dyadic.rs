//! Exact dyadic rationals `m / 2^k`.
//!
//! Every distance in a diamond graph is dyadic, so this is the value type
//! for the whole distance layer. Values are kept reduced: the numerator is
//! odd unless the exponent is zero.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::space::Q;

// Numerators are kept in i128, which bounds the exponent at 126.
const MAX_EXP: u32 = 126;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    num: i128,
    exp: u32,
}

impl DyadicRational {
    pub const ZERO: DyadicRational = DyadicRational { num: 0, exp: 0 };
    pub const ONE: DyadicRational = DyadicRational { num: 1, exp: 0 };
    pub const HALF: DyadicRational = DyadicRational { num: 1, exp: 1 };

    /// `num / 2^exp`, reduced.
    pub fn new(num: i128, exp: u32) -> Self {
        assert!(exp <= MAX_EXP, "dyadic exponent {exp} out of range");
        let mut d = DyadicRational { num, exp };
        d.reduce();
        d
    }

    pub fn from_int(n: i64) -> Self {
        DyadicRational { num: n as i128, exp: 0 }
    }

    fn reduce(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    fn aligned(self, other: Self) -> (i128, i128, u32) {
        let exp = self.exp.max(other.exp);
        let a = self
            .num
            .checked_mul(1i128 << (exp - self.exp))
            .expect("dyadic numerator overflow");
        let b = other
            .num
            .checked_mul(1i128 << (exp - other.exp))
            .expect("dyadic numerator overflow");
        (a, b, exp)
    }

    /// `self / 2`.
    pub fn half(self) -> Self {
        if self.num == 0 {
            return self;
        }
        if self.num % 2 == 0 {
            DyadicRational { num: self.num / 2, exp: self.exp }
        } else {
            Self::new(self.num, self.exp + 1)
        }
    }

    /// `2 · self`.
    pub fn double(self) -> Self {
        if self.exp > 0 {
            DyadicRational { num: self.num, exp: self.exp - 1 }
        } else {
            DyadicRational {
                num: self.num.checked_mul(2).expect("dyadic numerator overflow"),
                exp: 0,
            }
        }
    }

    pub fn abs(self) -> Self {
        DyadicRational { num: self.num.abs(), exp: self.exp }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn to_q(&self) -> Q {
        Q::new(BigInt::from(self.num), BigInt::from(1) << self.exp)
    }

    /// Converts an exact rational with a power-of-two denominator.
    pub fn from_q(x: &Q) -> Option<Self> {
        use num_traits::ToPrimitive;
        let d = x.denom();
        let bits = d.bits();
        if bits == 0 || (d.clone() & (d.clone() - 1u32)) != BigInt::from(0) {
            return None;
        }
        let exp = (bits - 1) as u32;
        if exp > MAX_EXP {
            return None;
        }
        Some(Self::new(x.numer().to_i128()?, exp))
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / (2f64).powi(self.exp as i32)
    }

    /// The `p/2^k` rendering used in graph exports.
    pub fn pow2_string(&self) -> String {
        if self.exp == 0 {
            self.num.to_string()
        } else {
            format!("{}/2^{}", self.num, self.exp)
        }
    }
}

impl Add for DyadicRational {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (a, b, exp) = self.aligned(rhs);
        Self::new(a.checked_add(b).expect("dyadic numerator overflow"), exp)
    }
}

impl Sub for DyadicRational {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for DyadicRational {
    type Output = Self;

    fn neg(self) -> Self {
        DyadicRational { num: -self.num, exp: self.exp }
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, 1u128 << self.exp)
        }
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for DyadicRational {
    type Err = String;

    /// Accepts `p`, `p/q` with `q` a power of two, or `p/2^k`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((n, k)) = s.split_once("/2^") {
            let n: i128 = n.trim().parse().map_err(|e| format!("bad dyadic {s:?}: {e}"))?;
            let k: u32 = k.trim().parse().map_err(|e| format!("bad dyadic {s:?}: {e}"))?;
            if k > MAX_EXP {
                return Err(format!("dyadic exponent too large in {s:?}"));
            }
            return Ok(Self::new(n, k));
        }
        let x = crate::space::parse_q(s)?;
        Self::from_q(&x).ok_or_else(|| format!("{s:?} is not a dyadic rational"))
    }
}

impl Serialize for DyadicRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DyadicRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

//! Exact rational vectors in finite-dimensional ℓ1, ℓ2 and ℓ∞ spaces.
//!
//! Norms of ℓ1 and ℓ∞ are rational and computed exactly. The ℓ2 norm is
//! generally irrational, so every comparison goes through the squared
//! norm: [`NormedSpace::norm_pow`] returns `‖v‖^p` with `p` the space's
//! [`NormedSpace::power`] (1 or 2), and thresholds are raised to the same
//! power before comparing.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Q = BigRational;
pub type Vector = Vec<Q>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn half() -> Q {
    q(1, 2)
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_q(text: &str) -> Result<Q, String> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator in {text:?}: {e}"))?;
            let d = BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator in {text:?}: {e}"))?;
            if d.is_zero() {
                return Err(format!("zero denominator in {text:?}"));
            }
            Q::new(n, d)
        }
        None => Q::from_integer(BigInt::from_str(text).map_err(|e| format!("bad rational {text:?}: {e}"))?),
    };
    Ok(value)
}

pub fn q_to_string(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn q_to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// serde adapters that write rationals as `"p/q"` strings.
pub mod serde_q {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q_to_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let text = String::deserialize(d)?;
        parse_q(&text).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&q_to_string(x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
            let items = Vec::<String>::deserialize(d)?;
            items
                .iter()
                .map(|t| parse_q(t).map_err(serde::de::Error::custom))
                .collect()
        }
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(x: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(x) => s.serialize_some(&q_to_string(x)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|t| parse_q(&t).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "linf")]
    LInf,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::LInf => "linf",
        })
    }
}

impl FromStr for Norm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::LInf),
            other => Err(format!("unknown norm {other:?} (expected l1, l2 or linf)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dimension mismatch: expected {expected}, got {got}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub got: usize,
}

/// A finite-dimensional normed space over the rationals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormedSpace {
    pub dim: usize,
    pub norm: Norm,
}

impl NormedSpace {
    pub fn new(dim: usize, norm: Norm) -> Self {
        NormedSpace { dim, norm }
    }

    /// The exponent `p` such that [`Self::norm_pow`] returns `‖v‖^p`.
    pub fn power(&self) -> u32 {
        match self.norm {
            Norm::L2 => 2,
            _ => 1,
        }
    }

    pub fn check(&self, v: &[Q]) -> Result<(), DimensionMismatch> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            })
        }
    }

    pub fn zero(&self) -> Vector {
        vec![Q::zero(); self.dim]
    }

    /// `‖v‖` for ℓ1/ℓ∞, `‖v‖²` for ℓ2.
    pub fn norm_pow(&self, v: &[Q]) -> Q {
        match self.norm {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum(),
            Norm::LInf => v.iter().map(|x| x.abs()).max().unwrap_or_else(Q::zero),
        }
    }

    pub fn raise(&self, t: &Q) -> Q {
        match self.power() {
            2 => t * t,
            _ => t.clone(),
        }
    }

    /// Compares `‖v‖` with a nonnegative threshold exactly.
    pub fn cmp_norm(&self, v: &[Q], t: &Q) -> Ordering {
        self.norm_pow(v).cmp(&self.raise(t))
    }

    pub fn dist_pow(&self, a: &[Q], b: &[Q]) -> Q {
        self.norm_pow(&sub(a, b))
    }

    /// The norm as an `f64`, for display only.
    pub fn norm_f64(&self, v: &[Q]) -> f64 {
        let p = q_to_f64(&self.norm_pow(v));
        if self.power() == 2 {
            p.sqrt()
        } else {
            p
        }
    }
}

pub fn add(a: &[Q], b: &[Q]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Q], b: &[Q]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(s: &Q, a: &[Q]) -> Vector {
    a.iter().map(|x| s * x).collect()
}

pub fn midpoint(a: &[Q], b: &[Q]) -> Vector {
    let h = half();
    a.iter().zip(b).map(|(x, y)| (x + y) * &h).collect()
}

pub fn vec_to_strings(v: &[Q]) -> Vec<String> {
    v.iter().map(q_to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_are_exact() {
        let v = vec![q(3, 4), q(-1, 4), qi(0)];
        assert_eq!(NormedSpace::new(3, Norm::L1).norm_pow(&v), qi(1));
        assert_eq!(NormedSpace::new(3, Norm::LInf).norm_pow(&v), q(3, 4));
        assert_eq!(NormedSpace::new(3, Norm::L2).norm_pow(&v), q(10, 16));
    }

    #[test]
    fn l2_threshold_uses_squares() {
        let s = NormedSpace::new(2, Norm::L2);
        let v = vec![qi(3), qi(4)];
        assert_eq!(s.cmp_norm(&v, &qi(5)), Ordering::Equal);
        assert_eq!(s.cmp_norm(&v, &q(49, 10)), Ordering::Greater);
    }

    #[test]
    fn rational_strings() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q("-2").unwrap(), qi(-2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("a").is_err());
        assert_eq!(q_to_string(&q(-6, 4)), "-3/2");
    }
}

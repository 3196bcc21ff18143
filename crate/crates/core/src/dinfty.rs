//! The limit diamond `D_∞`.
//!
//! A point is coded as `(A, r)`: a finite branch address `A` and its
//! distance `r` to the bottom. Each `D_α^ω` embeds isometrically through
//! [`psi`], built from the half-scale maps [`g_map`] at successor stages and
//! a branch relabeling through the Cantor pairing at limit stages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::diamond::{Sign, Slot, Vertex};
use crate::dyadic::DyadicRational;
use crate::ordinal::{enumerate_below, pair, Ordinal, OrdinalKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DInfError {
    #[error("distance to bottom {0} lies outside [0, 1]")]
    OutOfRange(DyadicRational),
    #[error("r = {r} needs {needed} branch indices but only {given} were given")]
    ShortAddress { r: DyadicRational, needed: u32, given: usize },
    #[error("vertex {vertex} does not belong to a diamond of height {alpha}")]
    Inconsistent { vertex: String, alpha: Ordinal },
    #[error("relabeled branch index overflows for summand {0}")]
    Overflow(u64),
    #[error("cannot parse code {0:?}")]
    Parse(String),
}

/// A canonical code: either a pole `(∅, 0)`, `(∅, 1)`, or `(A, m/2^k)` with
/// `|A| = k ≥ 1` and `m` odd.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DInfCode {
    branches: Vec<u64>,
    r: DyadicRational,
}

impl DInfCode {
    pub fn bottom() -> Self {
        DInfCode {
            branches: Vec::new(),
            r: DyadicRational::ZERO,
        }
    }

    pub fn top() -> Self {
        DInfCode {
            branches: Vec::new(),
            r: DyadicRational::ONE,
        }
    }

    /// The hub `((i), ½)`.
    pub fn hub(i: u64) -> Self {
        DInfCode {
            branches: vec![i],
            r: DyadicRational::HALF,
        }
    }

    /// Normalizes a raw code: `r ∈ {0, 1}` collapses to a pole and branch
    /// indices beyond the exponent of `r` are dropped.
    pub fn new(mut branches: Vec<u64>, r: DyadicRational) -> Result<Self, DInfError> {
        if r < DyadicRational::ZERO || r > DyadicRational::ONE {
            return Err(DInfError::OutOfRange(r));
        }
        if r.is_zero() || r == DyadicRational::ONE {
            return Ok(DInfCode { branches: Vec::new(), r });
        }
        let k = r.exponent();
        if k as usize > branches.len() {
            return Err(DInfError::ShortAddress {
                r,
                needed: k,
                given: branches.len(),
            });
        }
        branches.truncate(k as usize);
        Ok(DInfCode { branches, r })
    }

    pub fn branches(&self) -> &[u64] {
        &self.branches
    }

    /// Distance to the bottom pole.
    pub fn r(&self) -> DyadicRational {
        self.r
    }

    pub fn is_pole(&self) -> bool {
        self.branches.is_empty()
    }

    /// Canonical-form check (always true for values built through [`Self::new`]).
    pub fn is_canonical(&self) -> bool {
        if self.is_pole() {
            return self.r.is_zero() || self.r == DyadicRational::ONE;
        }
        self.r.exponent() as usize == self.branches.len() && self.r.numerator() % 2 != 0
    }

    /// The code with its first branch index replaced by `f(index)`.
    pub fn relabel_first(&self, f: impl FnOnce(u64) -> u64) -> DInfCode {
        let mut c = self.clone();
        if let Some(first) = c.branches.first_mut() {
            *first = f(*first);
        }
        c
    }

    /// Samples a canonical code with address length at most `max_len` and
    /// branch indices below `width`. `pick(n)` must be uniform on `0..n`.
    pub fn sample(max_len: u32, width: u64, pick: &mut impl FnMut(u64) -> u64) -> DInfCode {
        assert!((1..=60).contains(&max_len));
        if pick(10) == 0 {
            return if pick(2) == 0 { Self::bottom() } else { Self::top() };
        }
        let k = 1 + pick(max_len as u64) as u32;
        let branches = (0..k).map(|_| pick(width)).collect();
        let m = 2 * pick(1u64 << (k - 1)) + 1;
        DInfCode::new(branches, DyadicRational::new(m as i128, k)).expect("odd numerator over 2^k")
    }
}

/// `g^{(i,−)}(A, r) = (i⌢A, r/2)` and `g^{(i,+)}(A, r) = (i⌢A, (r+1)/2)`.
/// Both maps fix one pole, send the other to the hub `((i), ½)`, and halve
/// all distances.
pub fn g_map(i: u64, sign: Sign, c: &DInfCode) -> DInfCode {
    let r = match sign {
        Sign::Minus => c.r.half(),
        Sign::Plus => (c.r + DyadicRational::ONE).half(),
    };
    let mut branches = Vec::with_capacity(c.branches.len() + 1);
    branches.push(i);
    branches.extend_from_slice(&c.branches);
    DInfCode::new(branches, r).expect("image of a canonical code")
}

fn through_poles(rx: DyadicRational, ry: DyadicRational) -> DyadicRational {
    (rx + ry).min(DyadicRational::from_int(2) - rx - ry)
}

/// The metric of `D_∞` on canonical codes.
pub fn dinf_dist(x: &DInfCode, y: &DInfCode) -> DyadicRational {
    if x == y {
        return DyadicRational::ZERO;
    }
    let (rx, ry) = (x.r, y.r);
    if x.is_pole() || y.is_pole() {
        return (rx - ry).abs();
    }
    if x.branches[0] != y.branches[0] {
        return through_poles(rx, ry);
    }
    let half = DyadicRational::HALF;
    if rx < half && ry < half {
        let tail = |c: &DInfCode| DInfCode::new(c.branches[1..].to_vec(), c.r.double()).expect("lower tail");
        dinf_dist(&tail(x), &tail(y)).half()
    } else if rx > half && ry > half {
        let tail = |c: &DInfCode| {
            DInfCode::new(c.branches[1..].to_vec(), c.r.double() - DyadicRational::ONE).expect("upper tail")
        };
        dinf_dist(&tail(x), &tail(y)).half()
    } else {
        (rx - ry).abs()
    }
}

/// The isometry `D_α^ω → D_∞`.
///
/// Successor stages apply `g^{(i,±)}` to the image of the inner vertex.
/// At a limit stage the `n`-th summand's image has its first branch index
/// `i` replaced by `⟨n, i⟩`, which keeps the summands on disjoint branches.
pub fn psi(alpha: &Ordinal, v: &Vertex) -> Result<DInfCode, DInfError> {
    let inconsistent = || DInfError::Inconsistent {
        vertex: v.to_string(),
        alpha: alpha.clone(),
    };
    match (v, alpha.classify()) {
        (Vertex::Top, _) => Ok(DInfCode::top()),
        (Vertex::Bottom, _) => Ok(DInfCode::bottom()),
        (Vertex::Hub(i), OrdinalKind::Successor(_)) => Ok(DInfCode::hub(*i)),
        (Vertex::Sub(Slot::Branch(i, sign), w), OrdinalKind::Successor(beta)) => {
            Ok(g_map(*i, *sign, &psi(&beta, w)?))
        }
        (Vertex::Sub(Slot::Summand(n), w), OrdinalKind::Limit) => {
            let beta = enumerate_below(alpha, *n).expect("limit");
            let inner = psi(&beta, w)?;
            let first = inner.branches.first().copied().ok_or_else(inconsistent)?;
            let label = pair(*n, first).ok_or(DInfError::Overflow(*n))?;
            Ok(inner.relabel_first(|_| label))
        }
        _ => Err(inconsistent()),
    }
}

impl fmt::Display for DInfCode {
    /// `A=[0,1];r=3/8`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a: Vec<String> = self.branches.iter().map(|b| b.to_string()).collect();
        write!(f, "A=[{}];r={}", a.join(","), self.r)
    }
}

impl FromStr for DInfCode {
    type Err = DInfError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DInfError::Parse(s.to_string());
        let (a, r) = s.trim().split_once(';').ok_or_else(bad)?;
        let a = a.trim().strip_prefix("A=").ok_or_else(bad)?;
        let a = a.strip_prefix('[').and_then(|a| a.strip_suffix(']')).ok_or_else(bad)?;
        let branches = if a.trim().is_empty() {
            Vec::new()
        } else {
            a.split(',')
                .map(|t| t.trim().parse::<u64>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        };
        let r: DyadicRational = r.trim().strip_prefix("r=").ok_or_else(bad)?.parse().map_err(|_| bad())?;
        DInfCode::new(branches, r)
    }
}

impl Serialize for DInfCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DInfCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

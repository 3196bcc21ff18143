//! Minimum-distortion embeddings of small finite metrics into ℓ1.
//!
//! A metric embeds into ℓ1 with distortion `c` exactly when some
//! nonnegative combination of cut semimetrics `Σ λ_S δ_S` satisfies
//! `d ≤ Σ λ_S δ_S ≤ c·d`. With all `2^{n−1} − 1` cuts as columns this is
//! the linear program
//!
//! ```text
//! maximize t  subject to  Σ λ_S δ_S(p) ≤ d(p),  t·d(p) − Σ λ_S δ_S(p) ≤ 0,  λ, t ≥ 0
//! ```
//!
//! whose optimum is `1/c`. The LP is solved in floating point, the final
//! basis is re-solved in exact rationals (continuing with exact pivots if
//! needed), and the resulting certificate is checked exactly by
//! [`verify_cut_sandwich`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diamond::{vertex_dist, DiamondError, DiamondSpec};
use crate::dinfty::{dinf_dist, DInfCode};
use crate::dyadic::DyadicRational;
use crate::space::{self, half, q_to_f64, Q};

pub const MAX_POINTS: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum L1Error {
    #[error("metric has {0} points, the cut LP is limited to {MAX_POINTS}")]
    TooManyPoints(usize),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error(transparent)]
    Diamond(#[from] DiamondError),
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
    #[error("malformed step function: {0}")]
    StepFunction(String),
}

// ---------------------------------------------------------------------------
// Finite metrics and cuts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteMetric {
    pub labels: Vec<String>,
    #[serde(with = "matrix_serde")]
    pub d: Vec<Vec<Q>>,
}

mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = m.iter().map(|r| space::vec_to_strings(r)).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Q>>, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(d)?;
        rows.iter()
            .map(|r| {
                r.iter()
                    .map(|t| space::parse_q(t).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

impl FiniteMetric {
    /// Validates symmetry, zero diagonal, positivity and the triangle
    /// inequality.
    pub fn new(labels: Vec<String>, d: Vec<Vec<Q>>) -> Result<Self, L1Error> {
        let n = labels.len();
        let bad = |m: String| Err(L1Error::InvalidMetric(m));
        if n == 0 {
            return bad("no points".into());
        }
        if d.len() != n || d.iter().any(|r| r.len() != n) {
            return bad(format!("distance matrix is not {n}×{n}"));
        }
        for i in 0..n {
            if !d[i][i].is_zero() {
                return bad(format!("d({0},{0}) ≠ 0", labels[i]));
            }
            for j in 0..n {
                if d[i][j] != d[j][i] {
                    return bad(format!("d({},{}) is not symmetric", labels[i], labels[j]));
                }
                if i != j && !d[i][j].is_positive() {
                    return bad(format!("d({},{}) is not positive", labels[i], labels[j]));
                }
                for k in 0..n {
                    if d[i][k] > &d[i][j] + &d[j][k] {
                        return bad(format!(
                            "triangle inequality fails for {}, {}, {}",
                            labels[i], labels[j], labels[k]
                        ));
                    }
                }
            }
        }
        Ok(FiniteMetric { labels, d })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The metric on the materialized window of a diamond.
    pub fn from_diamond(spec: &DiamondSpec) -> Result<Self, L1Error> {
        let m = spec.materialize()?;
        let d = m
            .vertices
            .iter()
            .map(|u| m.vertices.iter().map(|v| vertex_dist(u, v).to_q()).collect())
            .collect();
        FiniteMetric::new(m.vertices.iter().map(|v| v.to_string()).collect(), d)
    }

    /// The cycle on `n` points with unit edges.
    pub fn cycle(n: usize) -> Self {
        let d = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let k = i.abs_diff(j);
                        Q::from_integer(k.min(n - k).into())
                    })
                    .collect()
            })
            .collect();
        FiniteMetric::new((0..n).map(|i| format!("p{i}")).collect(), d).expect("cycle metric")
    }

    /// The metric induced on a subset of the points.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        FiniteMetric {
            labels: keep.iter().map(|&i| self.labels[i].clone()).collect(),
            d: keep
                .iter()
                .map(|&i| keep.iter().map(|&j| self.d[i][j].clone()).collect())
                .collect(),
        }
    }

    /// Reads a matrix whose first line holds the labels.
    pub fn from_csv(text: &str) -> Result<Self, L1Error> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| L1Error::InvalidMetric("empty input".into()))?;
        let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let d = lines
            .map(|l| {
                l.split(',')
                    .map(|t| space::parse_q(t).map_err(L1Error::InvalidMetric))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        FiniteMetric::new(labels, d)
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }
}

/// A cut is a bitmask of the side not containing the last point.
pub type Cut = u32;

fn separates(cut: Cut, i: usize, j: usize) -> bool {
    ((cut >> i) & 1) != ((cut >> j) & 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CutCombination {
    pub weights: BTreeMap<Cut, Q>,
}

impl CutCombination {
    /// `Σ λ_S δ_S(i, j)`.
    pub fn semimetric(&self, i: usize, j: usize) -> Q {
        self.weights
            .iter()
            .filter(|(c, _)| separates(**c, i, j))
            .map(|(_, w)| w.clone())
            .sum()
    }

    pub fn scaled(&self, s: &Q) -> CutCombination {
        CutCombination {
            weights: self.weights.iter().map(|(c, w)| (*c, w * s)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub passed: bool,
    pub pairs: usize,
    /// First violating pair and which side fails.
    pub witness: Option<(String, String, String)>,
}

/// Exactly checks `d ≤ Σ λ_S δ_S ≤ c·d` on all pairs.
pub fn verify_cut_sandwich(m: &FiniteMetric, cuts: &CutCombination, c: &Q) -> SandwichReport {
    let pairs = m.pairs();
    for &(i, j) in &pairs {
        let s = cuts.semimetric(i, j);
        let side = if s < m.d[i][j] {
            Some("below d")
        } else if s > c * &m.d[i][j] {
            Some("above c·d")
        } else {
            None
        };
        if let Some(side) = side {
            return SandwichReport {
                passed: false,
                pairs: pairs.len(),
                witness: Some((m.labels[i].clone(), m.labels[j].clone(), side.to_string())),
            };
        }
    }
    SandwichReport {
        passed: true,
        pairs: pairs.len(),
        witness: None,
    }
}

// ---------------------------------------------------------------------------
// Linear programming
// ---------------------------------------------------------------------------

/// `maximize c·x  subject to  A x ≤ b, x ≥ 0` with `b ≥ 0`, so the slack
/// basis is feasible. Columns are stored sparsely.
#[derive(Debug, Clone)]
pub struct PackingLp {
    pub rows: usize,
    pub columns: Vec<Vec<(usize, Q)>>,
    pub b: Vec<Q>,
    pub c: Vec<Q>,
}

impl PackingLp {
    /// Column `j` for `j < columns.len()`, slack column otherwise.
    fn column(&self, j: usize) -> Vec<(usize, Q)> {
        if j < self.columns.len() {
            self.columns[j].clone()
        } else {
            vec![(j - self.columns.len(), Q::one())]
        }
    }

    fn total_columns(&self) -> usize {
        self.columns.len() + self.rows
    }

    fn cost(&self, j: usize) -> Q {
        self.c.get(j).cloned().unwrap_or_else(Q::zero)
    }
}

/// A floating-point LP backend; only its final basis is trusted, and only
/// after exact re-solution.
pub trait LpBackend {
    /// Returns the indices of the basic columns (slacks numbered after the
    /// structural columns), one per row.
    fn solve_basis(&self, lp: &PackingLp) -> Result<Vec<usize>, L1Error>;
}

/// Dense tableau simplex: Dantzig pricing, switching to Bland's rule after
/// a run of degenerate pivots.
#[derive(Debug, Clone)]
pub struct DenseSimplex {
    pub tolerance: f64,
    pub max_pivots: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex {
            tolerance: 1e-9,
            max_pivots: 200_000,
        }
    }
}

impl LpBackend for DenseSimplex {
    fn solve_basis(&self, lp: &PackingLp) -> Result<Vec<usize>, L1Error> {
        let m = lp.rows;
        let n = lp.total_columns();
        let width = n + 1;
        // rows 0..m constraints, row m objective (z_j − c_j); last column rhs
        let mut t = vec![0.0f64; (m + 1) * width];
        for (j, col) in lp.columns.iter().enumerate() {
            for (i, a) in col {
                t[i * width + j] = q_to_f64(a);
            }
        }
        for i in 0..m {
            t[i * width + lp.columns.len() + i] = 1.0;
            t[i * width + n] = q_to_f64(&lp.b[i]);
        }
        for j in 0..lp.columns.len() {
            t[m * width + j] = -q_to_f64(&lp.cost(j));
        }
        let mut basis: Vec<usize> = (lp.columns.len()..n).collect();
        let tol = self.tolerance;
        let mut degenerate_run = 0usize;
        for _ in 0..self.max_pivots {
            let obj = &t[m * width..m * width + n];
            let entering = if degenerate_run < 50 {
                obj.iter()
                    .enumerate()
                    .filter(|(_, v)| **v < -tol)
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(Ordering::Equal))
                    .map(|(j, _)| j)
            } else {
                obj.iter().position(|v| *v < -tol)
            };
            let Some(e) = entering else {
                return Ok(basis);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = t[i * width + e];
                if a > tol {
                    let ratio = t[i * width + n] / a;
                    let better = match leave {
                        None => true,
                        Some((k, r)) => ratio < r - tol || (ratio <= r + tol && basis[i] < basis[k]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                // unbounded cannot happen for these programs; stop with the current basis
                return Ok(basis);
            };
            degenerate_run = if ratio.abs() <= tol { degenerate_run + 1 } else { 0 };
            let p = t[r * width + e];
            for x in &mut t[r * width..(r + 1) * width] {
                *x /= p;
            }
            let pivot_row: Vec<f64> = t[r * width..(r + 1) * width].to_vec();
            for i in 0..=m {
                if i == r {
                    continue;
                }
                let f = t[i * width + e];
                if f != 0.0 {
                    for (x, y) in t[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                        *x -= f * y;
                    }
                }
            }
            basis[r] = e;
        }
        Err(L1Error::IterationLimit(self.max_pivots))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    /// Exact optimality was certified by reduced costs.
    Optimal,
    /// Exact pivot limit reached; the certificate is feasible but its
    /// optimality was not proven.
    Feasible,
}

/// Exact solution of a [`PackingLp`] from a starting basis.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub x: Vec<Q>,
    pub objective: Q,
    pub status: LpStatus,
    pub exact_pivots: usize,
}

/// Exact revised simplex with Bland's rule. Starts from `start` when that
/// basis is nonsingular and primal feasible, from the slack basis otherwise.
pub fn exact_resolve(lp: &PackingLp, start: &[usize], max_pivots: usize) -> ExactSolution {
    let m = lp.rows;
    let slack: Vec<usize> = (lp.columns.len()..lp.total_columns()).collect();
    let (mut basis, mut inv) = match invert_basis(lp, start) {
        Some(inv) if mat_vec(&inv, &lp.b).iter().all(|x| !x.is_negative()) => (start.to_vec(), inv),
        _ => (slack.clone(), identity(m)),
    };
    let mut pivots = 0;
    let status = loop {
        let xb = mat_vec(&inv, &lp.b);
        // duals y = c_B B^{-1}
        let cb: Vec<Q> = basis.iter().map(|&j| lp.cost(j)).collect();
        let y: Vec<Q> = (0..m)
            .map(|k| (0..m).filter(|&i| !cb[i].is_zero()).map(|i| &cb[i] * &inv[i][k]).sum())
            .collect();
        let in_basis: std::collections::HashSet<usize> = basis.iter().copied().collect();
        let entering = (0..lp.total_columns()).filter(|j| !in_basis.contains(j)).find(|&j| {
            let col = lp.column(j);
            let reduced = lp.cost(j) - col.iter().map(|(i, a)| &y[*i] * a).sum::<Q>();
            reduced.is_positive()
        });
        let Some(e) = entering else {
            break LpStatus::Optimal;
        };
        if pivots >= max_pivots {
            break LpStatus::Feasible;
        }
        let col = lp.column(e);
        let dir: Vec<Q> = (0..m)
            .map(|i| col.iter().map(|(k, a)| &inv[i][*k] * a).sum())
            .collect();
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..m {
            if dir[i].is_positive() {
                let ratio = &xb[i] / &dir[i];
                let better = match &leave {
                    None => true,
                    Some((k, r)) => ratio < *r || (ratio == *r && basis[i] < basis[*k]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            // bounded programs never get here
            break LpStatus::Feasible;
        };
        let p = dir[r].clone();
        let pivot_row: Vec<Q> = inv[r].iter().map(|x| x / &p).collect();
        for i in 0..m {
            if i != r && !dir[i].is_zero() {
                let f = dir[i].clone();
                for (x, y) in inv[i].iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
        inv[r] = pivot_row;
        basis[r] = e;
        pivots += 1;
    };
    let xb = mat_vec(&inv, &lp.b);
    let mut x = vec![Q::zero(); lp.columns.len()];
    for (i, &j) in basis.iter().enumerate() {
        if j < lp.columns.len() {
            x[j] = xb[i].clone();
        }
    }
    let objective = x.iter().enumerate().map(|(j, v)| lp.cost(j) * v).sum();
    ExactSolution {
        x,
        objective,
        status,
        exact_pivots: pivots,
    }
}

fn identity(m: usize) -> Vec<Vec<Q>> {
    (0..m)
        .map(|i| (0..m).map(|k| if i == k { Q::one() } else { Q::zero() }).collect())
        .collect()
}

fn mat_vec(a: &[Vec<Q>], v: &[Q]) -> Vec<Q> {
    a.iter()
        .map(|row| row.iter().zip(v).filter(|(_, y)| !y.is_zero()).map(|(x, y)| x * y).sum())
        .collect()
}

/// Exact Gauss–Jordan inverse of the basis matrix, `None` if singular.
fn invert_basis(lp: &PackingLp, basis: &[usize]) -> Option<Vec<Vec<Q>>> {
    let m = lp.rows;
    if basis.len() != m {
        return None;
    }
    let mut a = vec![vec![Q::zero(); m]; m];
    for (k, &j) in basis.iter().enumerate() {
        for (i, v) in lp.column(j) {
            a[i][k] = v;
        }
    }
    let mut inv = identity(m);
    for col in 0..m {
        let pivot = (col..m).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &p;
        }
        for x in inv[col].iter_mut() {
            *x /= &p;
        }
        let (arow, irow) = (a[col].clone(), inv[col].clone());
        for r in 0..m {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for (x, y) in a[r].iter_mut().zip(&arow) {
                    *x -= &f * y;
                }
                for (x, y) in inv[r].iter_mut().zip(&irow) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// Minimum distortion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DistortionResult {
    /// Exact distortion of the returned certificate.
    pub c: Q,
    pub cuts: CutCombination,
    pub status: LpStatus,
    pub exact_pivots: usize,
}

/// Builds the cut LP of a metric: columns `0..cuts` are cut weights, the
/// last structural column is `t`.
fn cut_lp(m: &FiniteMetric) -> (PackingLp, Vec<Cut>) {
    let n = m.len();
    let pairs = m.pairs();
    let p = pairs.len();
    let cuts: Vec<Cut> = (1..(1u32 << (n - 1))).collect();
    let mut columns: Vec<Vec<(usize, Q)>> = cuts
        .iter()
        .map(|&cut| {
            let mut col = Vec::new();
            for (k, &(i, j)) in pairs.iter().enumerate() {
                if separates(cut, i, j) {
                    col.push((k, Q::one()));
                    col.push((p + k, -Q::one()));
                }
            }
            col
        })
        .collect();
    columns.push(pairs.iter().enumerate().map(|(k, &(i, j))| (p + k, m.d[i][j].clone())).collect());
    let mut b: Vec<Q> = pairs.iter().map(|&(i, j)| m.d[i][j].clone()).collect();
    b.extend(std::iter::repeat_n(Q::zero(), p));
    let mut c = vec![Q::zero(); cuts.len()];
    c.push(Q::one());
    (PackingLp { rows: 2 * p, columns, b, c }, cuts)
}

/// Minimum ℓ1 distortion of a metric on at most [`MAX_POINTS`] points,
/// with an exact cut certificate.
pub fn min_distortion_l1(m: &FiniteMetric) -> Result<DistortionResult, L1Error> {
    min_distortion_with(m, &DenseSimplex::default())
}

pub fn min_distortion_with(m: &FiniteMetric, backend: &dyn LpBackend) -> Result<DistortionResult, L1Error> {
    if m.len() > MAX_POINTS {
        return Err(L1Error::TooManyPoints(m.len()));
    }
    if m.len() == 1 {
        return Ok(DistortionResult {
            c: Q::one(),
            cuts: CutCombination::default(),
            status: LpStatus::Optimal,
            exact_pivots: 0,
        });
    }
    let (lp, cuts) = cut_lp(m);
    let basis = backend.solve_basis(&lp)?;
    let sol = exact_resolve(&lp, &basis, 100_000);
    let t = sol.x[cuts.len()].clone();
    if !t.is_positive() {
        return Err(L1Error::InvalidMetric("cut LP returned t = 0".into()));
    }
    let inv_t = Q::one() / &t;
    let weights = cuts
        .iter()
        .zip(&sol.x)
        .filter(|(_, w)| w.is_positive())
        .map(|(&cut, w)| (cut, w * &inv_t))
        .collect();
    Ok(DistortionResult {
        c: inv_t,
        cuts: CutCombination { weights },
        status: sol.status,
        exact_pivots: sol.exact_pivots,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutJson {
    pub subset: Vec<String>,
    #[serde(with = "space::serde_q")]
    pub weight: Q,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateJson {
    #[serde(with = "space::serde_q")]
    pub c: Q,
    pub cuts: Vec<CutJson>,
}

impl CertificateJson {
    pub fn new(m: &FiniteMetric, c: &Q, cuts: &CutCombination) -> Self {
        CertificateJson {
            c: c.clone(),
            cuts: cuts
                .weights
                .iter()
                .map(|(&cut, w)| CutJson {
                    subset: (0..m.len())
                        .filter(|&i| (cut >> i) & 1 == 1)
                        .map(|i| m.labels[i].clone())
                        .collect(),
                    weight: w.clone(),
                })
                .collect(),
        }
    }

    /// Reads the cuts back against a metric's labels; each subset may name
    /// either side of its cut.
    pub fn to_cuts(&self, m: &FiniteMetric) -> Result<CutCombination, L1Error> {
        let n = m.len();
        let mut weights: BTreeMap<Cut, Q> = BTreeMap::new();
        for cut in &self.cuts {
            let mut mask: Cut = 0;
            for name in &cut.subset {
                let i = m
                    .labels
                    .iter()
                    .position(|l| l == name)
                    .ok_or_else(|| L1Error::InvalidMetric(format!("unknown point {name:?}")))?;
                mask |= 1 << i;
            }
            if (mask >> (n - 1)) & 1 == 1 {
                mask ^= (1u32 << n) - 1;
            }
            if mask == 0 {
                return Err(L1Error::InvalidMetric("cut with an empty side".into()));
            }
            *weights.entry(mask).or_insert_with(Q::zero) += &cut.weight;
        }
        Ok(CutCombination { weights })
    }
}

/// One coordinate per cut: point `x` gets `λ_S` on coordinate `S` when
/// `x ∈ S`, zero otherwise.
pub fn cuts_to_embedding(m: &FiniteMetric, cuts: &CutCombination) -> Vec<Vec<Q>> {
    (0..m.len())
        .map(|x| {
            cuts.weights
                .iter()
                .map(|(&cut, w)| if (cut >> x) & 1 == 1 { w.clone() } else { Q::zero() })
                .collect()
        })
        .collect()
}

/// The same embedding into `L1[0,1]`: cut `k` owns the dyadic interval
/// `[k/2^e, (k+1)/2^e)` and contributes `λ_S·2^e` on it.
pub fn cuts_to_step_functions(m: &FiniteMetric, cuts: &CutCombination) -> Vec<DyadicStepFunction> {
    let count = cuts.weights.len().max(1);
    let e = usize::BITS - (count - 1).leading_zeros();
    let scale = Q::from_integer((1u64 << e).into());
    (0..m.len())
        .map(|x| {
            let mut f = DyadicStepFunction::zero();
            for (k, (&cut, w)) in cuts.weights.iter().enumerate() {
                if (cut >> x) & 1 == 1 {
                    let piece = DyadicStepFunction::indicator(
                        DyadicRational::new(k as i128, e),
                        DyadicRational::new(k as i128 + 1, e),
                    )
                    .expect("interval inside [0,1]");
                    f = f.add(&piece.scale(&(w * &scale)));
                }
            }
            f
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Step functions
// ---------------------------------------------------------------------------

/// A function on `[0,1)` that is constant on the intervals between
/// consecutive dyadic breakpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicStepFunction {
    // 0 = breaks[0] < ... < breaks[k] = 1; values[i] on [breaks[i], breaks[i+1])
    breaks: Vec<DyadicRational>,
    values: Vec<Q>,
}

impl DyadicStepFunction {
    pub fn zero() -> Self {
        DyadicStepFunction {
            breaks: vec![DyadicRational::ZERO, DyadicRational::ONE],
            values: vec![Q::zero()],
        }
    }

    pub fn new(breaks: Vec<DyadicRational>, values: Vec<Q>) -> Result<Self, L1Error> {
        let bad = |m: &str| Err(L1Error::StepFunction(m.into()));
        if breaks.first() != Some(&DyadicRational::ZERO) || breaks.last() != Some(&DyadicRational::ONE) {
            return bad("breakpoints must start at 0 and end at 1");
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return bad("breakpoints must increase");
        }
        if values.len() + 1 != breaks.len() {
            return bad("one value per interval");
        }
        Ok(DyadicStepFunction { breaks, values }.simplified())
    }

    /// `χ_[a, b)`.
    pub fn indicator(a: DyadicRational, b: DyadicRational) -> Result<Self, L1Error> {
        if !(DyadicRational::ZERO <= a && a <= b && b <= DyadicRational::ONE) {
            return Err(L1Error::StepFunction(format!("[{a}, {b}) is not inside [0, 1]")));
        }
        let mut breaks = vec![DyadicRational::ZERO];
        let mut values = Vec::new();
        if a > DyadicRational::ZERO {
            breaks.push(a);
            values.push(Q::zero());
        }
        if b > a {
            if b < DyadicRational::ONE {
                breaks.push(b);
            }
            values.push(Q::one());
        }
        if b < DyadicRational::ONE {
            values.push(Q::zero());
        }
        if *breaks.last().unwrap() != DyadicRational::ONE {
            breaks.push(DyadicRational::ONE);
        }
        DyadicStepFunction::new(breaks, values)
    }

    pub fn breakpoints(&self) -> &[DyadicRational] {
        &self.breaks
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    fn value_at(&self, x: DyadicRational) -> &Q {
        let k = self.breaks.partition_point(|b| *b <= x) - 1;
        &self.values[k.min(self.values.len() - 1)]
    }

    fn combine(&self, other: &Self, op: impl Fn(&Q, &Q) -> Q) -> Self {
        let mut breaks: Vec<DyadicRational> = self.breaks.iter().chain(&other.breaks).copied().collect();
        breaks.sort();
        breaks.dedup();
        let values = breaks[..breaks.len() - 1]
            .iter()
            .map(|&x| op(self.value_at(x), other.value_at(x)))
            .collect();
        DyadicStepFunction { breaks, values }.simplified()
    }

    fn simplified(mut self) -> Self {
        let mut breaks = vec![self.breaks[0]];
        let mut values: Vec<Q> = Vec::new();
        for (k, v) in self.values.drain(..).enumerate() {
            if values.last() == Some(&v) {
                *breaks.last_mut().unwrap() = self.breaks[k + 1];
            } else {
                values.push(v);
                breaks.push(self.breaks[k + 1]);
            }
        }
        DyadicStepFunction { breaks, values }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, s: &Q) -> Self {
        DyadicStepFunction {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
        .simplified()
    }

    /// `∫ |f|` exactly.
    pub fn l1_norm(&self) -> Q {
        self.values
            .iter()
            .zip(self.breaks.windows(2))
            .map(|(v, w)| v.abs() * (w[1] - w[0]).to_q())
            .sum()
    }
}

impl fmt::Display for DyadicStepFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.values.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "[{},{}):{}", self.breaks[k], self.breaks[k + 1], space::q_to_string(v))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Candidate maps D_∞ → L1
// ---------------------------------------------------------------------------

/// A user-supplied map from `D_∞` codes into `L1[0,1]`.
pub trait L1Provider {
    fn image(&self, x: &DInfCode) -> DyadicStepFunction;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderReport {
    pub pairs: usize,
    pub passed: bool,
    /// First pair violating `½·d ≤ ‖Ψx − Ψy‖₁ ≤ d`.
    pub witness: Option<(DInfCode, DInfCode)>,
    #[serde(with = "space::serde_q::opt")]
    pub min_ratio: Option<Q>,
    #[serde(with = "space::serde_q::opt")]
    pub max_ratio: Option<Q>,
}

/// Checks the distortion-2 sandwich `½·d_∞ ≤ ‖Ψx − Ψy‖₁ ≤ d_∞` exactly on
/// the given pairs (pairs of equal codes are skipped).
pub fn verify_provider(p: &dyn L1Provider, pairs: &[(DInfCode, DInfCode)]) -> ProviderReport {
    let mut checked = 0;
    let (mut lo, mut hi): (Option<Q>, Option<Q>) = (None, None);
    let mut witness = None;
    for (x, y) in pairs {
        let d = dinf_dist(x, y);
        if d.is_zero() {
            continue;
        }
        checked += 1;
        let norm = p.image(x).sub(&p.image(y)).l1_norm();
        let d = d.to_q();
        if witness.is_none() && (norm < &d * half() || norm > d) {
            witness = Some((x.clone(), y.clone()));
        }
        let ratio = norm / d;
        if lo.as_ref().is_none_or(|l| ratio < *l) {
            lo = Some(ratio.clone());
        }
        if hi.as_ref().is_none_or(|h| ratio > *h) {
            hi = Some(ratio);
        }
    }
    ProviderReport {
        pairs: checked,
        passed: witness.is_none(),
        witness,
        min_ratio: lo,
        max_ratio: hi,
    }
}

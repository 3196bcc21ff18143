//! Slice derivations on finite planar point sets.
//!
//! One derivation removes every point that lies in some open half-plane
//! whose intersection with the set has diameter below `ε`. Iterating until
//! nothing is left gives the peeling index at scale `ε`.
//!
//! The sets cut out by open half-planes are exactly the strict suffixes of
//! the orders induced by directions `u`. The order only changes when `u`
//! crosses the normal of a line through two points, so the orders obtained
//! from every pair normal (both orientations), tilted infinitesimally either
//! way, cover all of them; the tilt is applied symbolically as a
//! lexicographic tie-break.

use std::cmp::Ordering;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{self, qi, Norm, Q};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeelError {
    #[error("point set is empty")]
    Empty,
    #[error("point {0} is repeated")]
    Duplicate(usize),
    #[error("scale must be positive")]
    BadScale,
}

pub type Point = (Q, Q);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet2D {
    pub points: Vec<Point>,
    pub norm: Norm,
}

impl PointSet2D {
    pub fn new(points: Vec<Point>, norm: Norm) -> Result<Self, PeelError> {
        if points.is_empty() {
            return Err(PeelError::Empty);
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(PeelError::Duplicate(i));
            }
        }
        Ok(PointSet2D { points, norm })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `‖a − b‖` raised to the norm's comparison power.
    fn dist_pow(&self, a: &Point, b: &Point) -> Q {
        let (dx, dy) = ((&a.0 - &b.0).abs(), (&a.1 - &b.1).abs());
        match self.norm {
            Norm::L1 => dx + dy,
            Norm::L2 => &dx * &dx + &dy * &dy,
            Norm::LInf => dx.max(dy),
        }
    }

    fn eps_pow(&self, eps: &Q) -> Q {
        match self.norm {
            Norm::L2 => eps * eps,
            _ => eps.clone(),
        }
    }

    /// Whether the points with the given indices have diameter below `ε`.
    pub fn diameter_below(&self, idx: &[usize], eps: &Q) -> bool {
        let e = self.eps_pow(eps);
        idx.iter().enumerate().all(|(k, &i)| {
            idx[k + 1..]
                .iter()
                .all(|&j| self.dist_pow(&self.points[i], &self.points[j]) < e)
        })
    }

    pub fn subset(&self, idx: &[usize]) -> PointSet2D {
        PointSet2D {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            norm: self.norm,
        }
    }
}

fn dot(u: &Point, p: &Point) -> Q {
    &u.0 * &p.0 + &u.1 * &p.1
}

fn perp(u: &Point) -> Point {
    (-u.1.clone(), u.0.clone())
}

/// Every direction whose infinitesimal tilts realize all half-plane orders.
fn candidate_directions(points: &[Point]) -> Vec<Point> {
    let mut dirs = vec![(qi(1), qi(0)), (qi(0), qi(1))];
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            dirs.push(perp(&(&q.0 - &p.0, &q.1 - &p.1)));
        }
    }
    let neg: Vec<Point> = dirs.iter().map(|d| (-d.0.clone(), -d.1.clone())).collect();
    dirs.extend(neg);
    dirs
}

/// Indices of the points that survive one derivation at scale `ε`.
pub fn derive_once(c: &PointSet2D, eps: &Q) -> Result<Vec<usize>, PeelError> {
    if !eps.is_positive() {
        return Err(PeelError::BadScale);
    }
    let n = c.len();
    let mut removed = vec![false; n];
    for u in candidate_directions(&c.points) {
        let w = perp(&u);
        for tilt in [qi(1), qi(-1)] {
            let mut order: Vec<usize> = (0..n).collect();
            let keys: Vec<(Q, Q)> = c
                .points
                .iter()
                .map(|p| (dot(&u, p), &tilt * dot(&w, p)))
                .collect();
            // descending: the first k entries form a strict suffix
            order.sort_by(|&a, &b| keys[b].cmp(&keys[a]));
            let mut k = 0;
            while k < n && c.diameter_below(&order[..k + 1], eps) {
                k += 1;
            }
            for &i in &order[..k] {
                removed[i] = true;
            }
        }
    }
    Ok((0..n).filter(|&i| !removed[i]).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeelReport {
    #[serde(with = "space::serde_q")]
    pub eps: Q,
    pub norm: Norm,
    /// Surviving points before each derivation, starting with the input.
    pub stages: Vec<Vec<[String; 2]>>,
    /// Number of derivations until the set is empty, `None` if some stage
    /// stopped changing.
    pub index: Option<usize>,
}

/// Iterates [`derive_once`] until nothing is left.
pub fn peel_index(c: &PointSet2D, eps: &Q) -> Result<PeelReport, PeelError> {
    let render = |s: &PointSet2D| -> Vec<[String; 2]> {
        s.points
            .iter()
            .map(|p| [space::q_to_string(&p.0), space::q_to_string(&p.1)])
            .collect()
    };
    let mut stages = vec![render(c)];
    let mut current = c.clone();
    let mut index = 0;
    loop {
        let survivors = derive_once(&current, eps)?;
        index += 1;
        if survivors.is_empty() {
            return Ok(PeelReport {
                eps: eps.clone(),
                norm: c.norm,
                stages,
                index: Some(index),
            });
        }
        if survivors.len() == current.len() {
            return Ok(PeelReport {
                eps: eps.clone(),
                norm: c.norm,
                stages,
                index: None,
            });
        }
        current = current.subset(&survivors);
        stages.push(render(&current));
    }
}

/// Whether `p` is a vertex of the convex hull of `set` (it is not in the
/// hull of the other points).
pub fn is_hull_vertex(set: &[Point], p: &Point) -> bool {
    let others: Vec<&Point> = set.iter().filter(|q| *q != p).collect();
    if others.is_empty() {
        return true;
    }
    // p is a vertex iff some direction strictly exposes it
    let mut all = vec![p.clone()];
    all.extend(others.iter().map(|q| (*q).clone()));
    candidate_directions(&all).iter().any(|u| {
        let w = perp(u);
        [qi(1), qi(-1)].iter().any(|tilt| {
            let key = |x: &Point| (dot(u, x), tilt * dot(&w, x));
            others.iter().all(|q| key(p).cmp(&key(q)) == Ordering::Greater)
        })
    })
}

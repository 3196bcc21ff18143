//! Oracles and fixtures shared by the integration suites. Nothing here calls
//! the code it is used to check.

#![allow(dead_code)]

use std::collections::HashSet;

use num_traits::{Signed, Zero};
use ordinal_diamonds::diamond::Materialization;
use ordinal_diamonds::space::{Norm, Q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A `pick(n)` closure drawing uniformly from `0..n`.
pub fn picker(rng: &mut ChaCha8Rng) -> impl FnMut(u64) -> u64 + '_ {
    |n| rng.gen_range(0..n)
}

/// All-pairs shortest paths by Floyd–Warshall over the edge list.
pub fn floyd_warshall(m: &Materialization) -> Vec<Vec<Option<Q>>> {
    let n = m.vertices.len();
    let mut d: Vec<Vec<Option<Q>>> = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(Q::zero());
    }
    for &(a, b, w) in &m.edges {
        let w = w.to_q();
        for (x, y) in [(a, b), (b, a)] {
            if d[x][y].as_ref().is_none_or(|old| &w < old) {
                d[x][y] = Some(w.clone());
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i][k].clone() else { continue };
            let via_k = d[k].clone();
            for (j, kj) in via_k.iter().enumerate() {
                if let Some(kj) = kj {
                    let through = &ik + kj;
                    if d[i][j].as_ref().is_none_or(|old| &through < old) {
                        d[i][j] = Some(through);
                    }
                }
            }
        }
    }
    d
}

pub type P2 = (Q, Q);

fn within(a: &P2, b: &P2, eps: &Q, norm: Norm) -> bool {
    let (dx, dy) = ((&a.0 - &b.0).abs(), (&a.1 - &b.1).abs());
    match norm {
        Norm::L1 => dx + dy < *eps,
        Norm::LInf => dx.max(dy) < *eps,
        Norm::L2 => &dx * &dx + &dy * &dy < eps * eps,
    }
}

/// Bitmasks of every nonempty `Q ⊆ C` that an open half-plane cuts out of
/// `C`, i.e. with `min_Q ⟨u,·⟩ > max_{C∖Q} ⟨u,·⟩` for some `u`.
///
/// The directions `u` that separate a given `Q` form an open convex cone
/// bounded by perpendiculars of pair differences. A cone narrower than a
/// half-plane contains the sum of its two boundary rays; a half-plane cone
/// contains the pair difference it is bounded by. Trying all those vectors
/// therefore finds every separable subset.
pub fn separable_subsets(points: &[P2]) -> HashSet<u32> {
    let n = points.len();
    let full = (1u32 << n) - 1;
    let mut diffs = Vec::new();
    for a in points {
        for b in points {
            if a != b {
                diffs.push((&a.0 - &b.0, &a.1 - &b.1));
            }
        }
    }
    let normals: Vec<P2> = diffs.iter().map(|(x, y)| (-y.clone(), x.clone())).collect();
    let mut dirs = diffs.clone();
    for (i, g) in normals.iter().enumerate() {
        for h in &normals[i + 1..] {
            let s = (&g.0 + &h.0, &g.1 + &h.1);
            if !(s.0.is_zero() && s.1.is_zero()) {
                dirs.push(s);
            }
        }
    }
    // one representative per ray: scale so the larger coordinate is ±1
    let rays: HashSet<P2> = dirs
        .into_iter()
        .map(|(x, y)| {
            let m = x.abs().max(y.abs());
            (x / &m, y / &m)
        })
        .collect();
    let mut found: HashSet<u32> = HashSet::from([full]);
    for u in rays {
        let vals: Vec<Q> = points.iter().map(|p| &u.0 * &p.0 + &u.1 * &p.1).collect();
        let mut thresholds = vals.clone();
        thresholds.sort();
        thresholds.dedup();
        // every strict upper level set above a value actually taken
        for t in &thresholds {
            let mask = (0..n).filter(|&i| vals[i] > *t).fold(0u32, |m, i| m | (1 << i));
            if mask != 0 {
                found.insert(mask);
            }
        }
    }
    found
}

/// Survivors of one derivation by exhaustive enumeration of subsets.
pub fn derive_once_oracle(points: &[P2], eps: &Q, norm: Norm) -> Vec<usize> {
    let n = points.len();
    let separable = separable_subsets(points);
    let mut removed = vec![false; n];
    for mask in 1u32..(1 << n) {
        if !separable.contains(&mask) {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let small = members
            .iter()
            .enumerate()
            .all(|(k, &i)| members[k + 1..].iter().all(|&j| within(&points[i], &points[j], eps, norm)));
        if small {
            for i in members {
                removed[i] = true;
            }
        }
    }
    (0..n).filter(|&i| !removed[i]).collect()
}

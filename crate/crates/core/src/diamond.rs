//! Diamond graphs of ordinal height.
//!
//! `D_0` is a single edge from bottom to top. `D_{β+1}` takes `b` (or
//! countably many) hubs between two new poles and puts a half-scale copy of
//! `D_β` on each hub-to-pole edge. A limit `D_α` glues the copies
//! `D_{β_n}` along their poles. Vertices are addressed by the path of
//! copies leading to them, so distances, pole distances and active pairs
//! are all computed from addresses alone; materialized graphs and the
//! Dijkstra oracle exist to check those computations.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::DyadicRational;
use crate::ordinal::{enumerate_below, Ordinal, OrdinalKind};
use crate::space::Q;
use crate::trees::TruncationSpec;

pub const DEFAULT_VERTEX_CAP: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiamondError {
    #[error("address {addr} does not fit a diamond of height {alpha}: {reason}")]
    Inconsistent { addr: String, alpha: Ordinal, reason: String },
    #[error("cannot parse vertex address {0:?}")]
    Parse(String),
    #[error("materialization would have {count} vertices, cap is {cap}")]
    CapExceeded { count: String, cap: u64 },
    #[error("vertex {0} is not in the materialized window")]
    NotMaterialized(String),
    #[error("branching must be at least 2")]
    BadBranching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branching {
    Finite(u64),
    Omega,
}

impl fmt::Display for Branching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branching::Finite(b) => write!(f, "{b}"),
            Branching::Omega => f.write_str("w"),
        }
    }
}

impl FromStr for Branching {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "w" | "omega" | "ω" => Ok(Branching::Omega),
            n => {
                let b: u64 = n.parse().map_err(|_| format!("bad branching {s:?}"))?;
                if b < 2 {
                    return Err("branching must be at least 2".into());
                }
                Ok(Branching::Finite(b))
            }
        }
    }
}

/// A diamond `D_α^κ` together with the window used to materialize it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiamondSpec {
    pub alpha: Ordinal,
    pub branching: Branching,
    pub trunc: TruncationSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Minus => '-',
            Sign::Plus => '+',
        }
    }
}

/// Which copy of a smaller diamond an address descends into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    /// The copy on the edge from hub `i` to the top (`Plus`) or from the
    /// bottom to hub `i` (`Minus`), at a successor stage.
    Branch(u64, Sign),
    /// The `n`-th summand at a limit stage.
    Summand(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Bottom,
    Top,
    Hub(u64),
    Sub(Slot, Box<Vertex>),
}

impl Vertex {
    pub fn sub(slot: Slot, inner: Vertex) -> Vertex {
        Vertex::Sub(slot, Box::new(inner))
    }

    pub fn is_pole(&self) -> bool {
        matches!(self, Vertex::Top | Vertex::Bottom)
    }

    /// Applies the gluing rules at the outermost level, assuming `inner` is
    /// already canonical.
    pub fn glue(slot: Slot, inner: Vertex) -> Vertex {
        match (slot, inner) {
            (Slot::Branch(i, Sign::Plus), Vertex::Bottom) => Vertex::Hub(i),
            (Slot::Branch(_, Sign::Plus), Vertex::Top) => Vertex::Top,
            (Slot::Branch(i, Sign::Minus), Vertex::Top) => Vertex::Hub(i),
            (Slot::Branch(_, Sign::Minus), Vertex::Bottom) => Vertex::Bottom,
            (Slot::Summand(_), pole @ (Vertex::Top | Vertex::Bottom)) => pole,
            (slot, inner) => Vertex::sub(slot, inner),
        }
    }

    /// Canonical form of a raw address: every collapsible copy of a pole is
    /// replaced by the pole or hub it is glued to. Idempotent.
    pub fn normalized(&self) -> Vertex {
        match self {
            Vertex::Sub(slot, inner) => Vertex::glue(*slot, inner.normalized()),
            v => v.clone(),
        }
    }

    /// Distance to the bottom pole. Distance to the top is `1 −` this.
    pub fn to_bottom(&self) -> DyadicRational {
        match self {
            Vertex::Bottom => DyadicRational::ZERO,
            Vertex::Top => DyadicRational::ONE,
            Vertex::Hub(_) => DyadicRational::HALF,
            Vertex::Sub(Slot::Branch(_, Sign::Minus), w) => w.to_bottom().half(),
            Vertex::Sub(Slot::Branch(_, Sign::Plus), w) => DyadicRational::HALF + w.to_bottom().half(),
            Vertex::Sub(Slot::Summand(_), w) => w.to_bottom(),
        }
    }

    /// Number of nested copies in the address.
    pub fn depth(&self) -> usize {
        match self {
            Vertex::Sub(_, w) => 1 + w.depth(),
            _ => 0,
        }
    }

    /// Samples a canonical vertex of `spec` inside its window. `pick(n)`
    /// must return a uniform value in `0..n`.
    pub fn sample(spec: &DiamondSpec, pick: &mut impl FnMut(u64) -> u64) -> Vertex {
        sample_at(&spec.alpha, spec.branch_window(), spec.trunc.limit_width, pick).normalized()
    }
}

fn sample_at(alpha: &Ordinal, width: u64, limit_width: u64, pick: &mut impl FnMut(u64) -> u64) -> Vertex {
    let pole = |pick: &mut dyn FnMut(u64) -> u64| if pick(2) == 0 { Vertex::Bottom } else { Vertex::Top };
    match alpha.classify() {
        OrdinalKind::Zero => pole(pick),
        OrdinalKind::Successor(beta) => match pick(8) {
            0 => pole(pick),
            1 | 2 => Vertex::Hub(pick(width)),
            _ => {
                let i = pick(width);
                let sign = if pick(2) == 0 { Sign::Minus } else { Sign::Plus };
                Vertex::sub(Slot::Branch(i, sign), sample_at(&beta, width, limit_width, pick))
            }
        },
        OrdinalKind::Limit => {
            if pick(8) == 0 {
                pole(pick)
            } else {
                let n = pick(limit_width);
                let beta = enumerate_below(alpha, n).expect("limit");
                Vertex::sub(Slot::Summand(n), sample_at(&beta, width, limit_width, pick))
            }
        }
    }
}

impl fmt::Display for Vertex {
    /// `T`, `B`, `H3`, `(0+)H1`, `(2-)(1+)H0`, `[5]H0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Top => f.write_str("T"),
            Vertex::Bottom => f.write_str("B"),
            Vertex::Hub(i) => write!(f, "H{i}"),
            Vertex::Sub(Slot::Branch(i, s), w) => write!(f, "({i}{}){w}", s.symbol()),
            Vertex::Sub(Slot::Summand(n), w) => write!(f, "[{n}]{w}"),
        }
    }
}

impl FromStr for Vertex {
    type Err = DiamondError;

    /// Parses an address; the result is normalized.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || DiamondError::Parse(text.to_string());
        let mut slots = Vec::new();
        let mut rest = text.trim();
        loop {
            if let Some(r) = rest.strip_prefix('(') {
                let close = r.find(')').ok_or_else(bad)?;
                let body = &r[..close];
                let (num, sign) = match body.chars().last() {
                    Some('+') => (&body[..body.len() - 1], Sign::Plus),
                    Some('-') => (&body[..body.len() - 1], Sign::Minus),
                    _ => return Err(bad()),
                };
                slots.push(Slot::Branch(num.parse().map_err(|_| bad())?, sign));
                rest = &r[close + 1..];
            } else if let Some(r) = rest.strip_prefix('[') {
                let close = r.find(']').ok_or_else(bad)?;
                slots.push(Slot::Summand(r[..close].parse().map_err(|_| bad())?));
                rest = &r[close + 1..];
            } else {
                break;
            }
        }
        let mut v = match rest {
            "T" => Vertex::Top,
            "B" => Vertex::Bottom,
            h if h.starts_with('H') => Vertex::Hub(h[1..].parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        for slot in slots.into_iter().rev() {
            v = Vertex::sub(slot, v);
        }
        Ok(v.normalized())
    }
}

impl Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn branch_of(v: &Vertex) -> Option<u64> {
    match v {
        Vertex::Hub(i) | Vertex::Sub(Slot::Branch(i, _), _) => Some(*i),
        _ => None,
    }
}

fn through_poles(ru: DyadicRational, rv: DyadicRational) -> DyadicRational {
    let two = DyadicRational::from_int(2);
    (ru + rv).min(two - ru - rv)
}

/// The distance between two canonical vertices of the same diamond.
///
/// Addresses determine the distance on their own: the height only decides
/// which slot kinds may occur, and both vertices must come from the same
/// diamond (as checked by [`DiamondSpec::dist`]).
pub fn vertex_dist(u: &Vertex, v: &Vertex) -> DyadicRational {
    if u == v {
        return DyadicRational::ZERO;
    }
    let (ru, rv) = (u.to_bottom(), v.to_bottom());
    if u.is_pole() || v.is_pole() {
        return (ru - rv).abs();
    }
    match (u, v) {
        (Vertex::Sub(Slot::Summand(n), x), Vertex::Sub(Slot::Summand(m), y)) => {
            if n == m {
                vertex_dist(x, y)
            } else {
                through_poles(ru, rv)
            }
        }
        _ => {
            let (bu, bv) = (branch_of(u), branch_of(v));
            assert!(
                bu.is_some() && bv.is_some(),
                "vertices {u} and {v} come from different stages"
            );
            if bu != bv {
                return through_poles(ru, rv);
            }
            match (u, v) {
                (Vertex::Sub(Slot::Branch(_, s), x), Vertex::Sub(Slot::Branch(_, t), y)) if s == t => {
                    vertex_dist(x, y).half()
                }
                _ => (ru - rv).abs(),
            }
        }
    }
}

/// An unordered pair of distinct vertices, smaller address first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivePair {
    pub u: Vertex,
    pub v: Vertex,
    /// Number of nested copies above the complete graph that created it.
    pub depth: usize,
}

impl ActivePair {
    fn new(a: Vertex, b: Vertex, depth: usize) -> Self {
        if a <= b {
            ActivePair { u: a, v: b, depth }
        } else {
            ActivePair { u: b, v: a, depth }
        }
    }
}

/// A finite weighted graph realizing a window of a diamond.
#[derive(Debug, Clone)]
pub struct Materialization {
    pub vertices: Vec<Vertex>,
    pub index: HashMap<Vertex, usize>,
    pub edges: Vec<(usize, usize, DyadicRational)>,
}

impl Materialization {
    fn edge() -> Self {
        Materialization {
            vertices: vec![Vertex::Bottom, Vertex::Top],
            index: [(Vertex::Bottom, 0), (Vertex::Top, 1)].into_iter().collect(),
            edges: vec![(0, 1, DyadicRational::ONE)],
        }
    }

    fn intern(&mut self, v: Vertex) -> usize {
        if let Some(&k) = self.index.get(&v) {
            return k;
        }
        let k = self.vertices.len();
        self.index.insert(v.clone(), k);
        self.vertices.push(v);
        k
    }

    pub fn position(&self, v: &Vertex) -> Result<usize, DiamondError> {
        self.index
            .get(v)
            .copied()
            .ok_or_else(|| DiamondError::NotMaterialized(v.to_string()))
    }

    fn adjacency(&self) -> Vec<Vec<(usize, Q)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(a, b, w) in &self.edges {
            adj[a].push((b, w.to_q()));
            adj[b].push((a, w.to_q()));
        }
        adj
    }

    /// Exact single-source shortest paths, computed with rational weights.
    pub fn oracle_from(&self, source: usize) -> Vec<Option<Q>> {
        shortest_paths(&self.adjacency(), source)
    }

    /// All-pairs exact shortest-path distances (one Dijkstra per vertex).
    pub fn oracle_all_pairs(&self) -> Vec<Vec<Option<Q>>> {
        let adj = self.adjacency();
        (0..self.vertices.len()).map(|s| shortest_paths(&adj, s)).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph diamond {\n");
        for v in &self.vertices {
            out.push_str(&format!("  \"{v}\";\n"));
        }
        for &(a, b, w) in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -- \"{}\" [label=\"{}\"];\n",
                self.vertices[a],
                self.vertices[b],
                w.pow2_string()
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.vertices.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|&(a, b, w)| serde_json::json!({
                "u": self.vertices[a].to_string(),
                "v": self.vertices[b].to_string(),
                "weight": w.pow2_string(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Exact Dijkstra over rational weights.
pub fn oracle_dist(m: &Materialization, u: &Vertex, v: &Vertex) -> Result<Q, DiamondError> {
    let (s, t) = (m.position(u)?, m.position(v)?);
    Ok(m.oracle_from(s)[t].clone().expect("materializations are connected"))
}

fn shortest_paths(adj: &[Vec<(usize, Q)>], source: usize) -> Vec<Option<Q>> {
    let mut best: Vec<Option<Q>> = vec![None; adj.len()];
    let mut done = vec![false; adj.len()];
    let mut heap = BinaryHeap::new();
    best[source] = Some(Q::zero());
    heap.push(Reverse((Q::zero(), source)));
    while let Some(Reverse((d, x))) = heap.pop() {
        if done[x] {
            continue;
        }
        done[x] = true;
        for (y, w) in &adj[x] {
            let cand = &d + w;
            let better = match &best[*y] {
                None => true,
                Some(cur) => cand.cmp(cur) == Ordering::Less,
            };
            if better {
                best[*y] = Some(cand.clone());
                heap.push(Reverse((cand, *y)));
            }
        }
    }
    best
}

impl DiamondSpec {
    pub fn new(alpha: Ordinal, branching: Branching, trunc: TruncationSpec) -> Result<Self, DiamondError> {
        if matches!(branching, Branching::Finite(b) if b < 2) {
            return Err(DiamondError::BadBranching);
        }
        Ok(DiamondSpec { alpha, branching, trunc })
    }

    /// Hubs materialized per successor stage.
    pub fn branch_window(&self) -> u64 {
        match self.branching {
            Branching::Finite(b) => b,
            Branching::Omega => self.trunc.fan_width,
        }
    }

    /// Validates a raw address against the height and branching and
    /// returns its canonical form.
    pub fn normalize(&self, raw: &Vertex) -> Result<Vertex, DiamondError> {
        self.check(&self.alpha, raw, raw)?;
        Ok(raw.normalized())
    }

    fn check(&self, alpha: &Ordinal, v: &Vertex, whole: &Vertex) -> Result<(), DiamondError> {
        let fail = |reason: String| DiamondError::Inconsistent {
            addr: whole.to_string(),
            alpha: self.alpha.clone(),
            reason,
        };
        let branch_ok = |i: u64| match self.branching {
            Branching::Finite(b) => i < b,
            Branching::Omega => true,
        };
        match (v, alpha.classify()) {
            (Vertex::Top | Vertex::Bottom, _) => Ok(()),
            (Vertex::Hub(i), OrdinalKind::Successor(_)) | (Vertex::Sub(Slot::Branch(i, _), _), OrdinalKind::Successor(_))
                if !branch_ok(*i) =>
            {
                Err(fail(format!("branch {i} exceeds branching {}", self.branching)))
            }
            (Vertex::Hub(_), OrdinalKind::Successor(_)) => Ok(()),
            (Vertex::Sub(Slot::Branch(..), w), OrdinalKind::Successor(beta)) => self.check(&beta, w, whole),
            (Vertex::Sub(Slot::Summand(n), w), OrdinalKind::Limit) => {
                let beta = enumerate_below(alpha, *n).expect("limit");
                self.check(&beta, w, whole)
            }
            _ => Err(fail(format!("{v} cannot occur at a stage of height {alpha}"))),
        }
    }

    /// `(to_bottom, to_top)`.
    pub fn dist_to_poles(&self, v: &Vertex) -> (DyadicRational, DyadicRational) {
        let r = v.to_bottom();
        (r, DyadicRational::ONE - r)
    }

    /// Exact distance between two addresses of this diamond.
    pub fn dist(&self, u: &Vertex, v: &Vertex) -> Result<DyadicRational, DiamondError> {
        let u = self.normalize(u)?;
        let v = self.normalize(v)?;
        Ok(vertex_dist(&u, &v))
    }

    /// Active pairs in the window, deduplicated, in a deterministic order.
    pub fn active_pairs(&self) -> Vec<ActivePair> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.collect_pairs(&self.alpha, &|v| v, 0, &mut out, &mut seen);
        out
    }

    fn collect_pairs(
        &self,
        alpha: &Ordinal,
        embed: &dyn Fn(Vertex) -> Vertex,
        depth: usize,
        out: &mut Vec<ActivePair>,
        seen: &mut HashSet<(Vertex, Vertex)>,
    ) {
        let mut push = |a: Vertex, b: Vertex| {
            let pair = ActivePair::new(embed(a), embed(b), depth);
            if seen.insert((pair.u.clone(), pair.v.clone())) {
                out.push(pair);
            }
        };
        match alpha.classify() {
            OrdinalKind::Zero => push(Vertex::Bottom, Vertex::Top),
            OrdinalKind::Successor(beta) => {
                let w = self.branch_window();
                let level: Vec<Vertex> = [Vertex::Bottom, Vertex::Top]
                    .into_iter()
                    .chain((0..w).map(Vertex::Hub))
                    .collect();
                for (k, a) in level.iter().enumerate() {
                    for b in &level[k + 1..] {
                        push(a.clone(), b.clone());
                    }
                }
                if !beta.is_zero() {
                    for i in 0..w {
                        for sign in [Sign::Minus, Sign::Plus] {
                            let inner = |x: Vertex| embed(Vertex::glue(Slot::Branch(i, sign), x));
                            self.collect_pairs(&beta, &inner, depth + 1, out, seen);
                        }
                    }
                }
            }
            OrdinalKind::Limit => {
                for n in 0..self.trunc.limit_width {
                    let beta = enumerate_below(alpha, n).expect("limit");
                    let inner = |x: Vertex| embed(Vertex::glue(Slot::Summand(n), x));
                    self.collect_pairs(&beta, &inner, depth + 1, out, seen);
                }
            }
        }
    }

    /// Number of vertices in the window, or `None` on overflow.
    pub fn window_vertex_count(&self) -> Option<u128> {
        self.count_at(&self.alpha)
    }

    fn count_at(&self, alpha: &Ordinal) -> Option<u128> {
        match alpha.classify() {
            OrdinalKind::Zero => Some(2),
            OrdinalKind::Successor(beta) => {
                let w = self.branch_window() as u128;
                let inner = self.count_at(&beta)? - 2;
                2u128.checked_add(w)?.checked_add(w.checked_mul(2)?.checked_mul(inner)?)
            }
            OrdinalKind::Limit => {
                let mut total = 2u128;
                for n in 0..self.trunc.limit_width {
                    let beta = enumerate_below(alpha, n).expect("limit");
                    total = total.checked_add(self.count_at(&beta)? - 2)?;
                }
                Some(total)
            }
        }
    }

    pub fn materialize(&self) -> Result<Materialization, DiamondError> {
        self.materialize_capped(DEFAULT_VERTEX_CAP)
    }

    /// Builds the window as a weighted graph: each successor stage replaces
    /// every edge of the previous graph by half-scale copies, each limit
    /// stage glues the summand graphs at their poles.
    pub fn materialize_capped(&self, cap: u64) -> Result<Materialization, DiamondError> {
        match self.window_vertex_count() {
            Some(c) if c <= cap as u128 => {}
            other => {
                return Err(DiamondError::CapExceeded {
                    count: other.map_or_else(|| "overflowing".to_string(), |c| c.to_string()),
                    cap,
                })
            }
        }
        Ok(self.materialize_at(&self.alpha))
    }

    fn materialize_at(&self, alpha: &Ordinal) -> Materialization {
        let (copies, scale): (Vec<(Slot, Ordinal)>, bool) = match alpha.classify() {
            OrdinalKind::Zero => return Materialization::edge(),
            OrdinalKind::Successor(beta) => (
                (0..self.branch_window())
                    .flat_map(|i| [(Slot::Branch(i, Sign::Minus), beta.clone()), (Slot::Branch(i, Sign::Plus), beta.clone())])
                    .collect(),
                true,
            ),
            OrdinalKind::Limit => (
                (0..self.trunc.limit_width)
                    .map(|n| (Slot::Summand(n), enumerate_below(alpha, n).expect("limit")))
                    .collect(),
                false,
            ),
        };
        let mut m = Materialization {
            vertices: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
        };
        m.intern(Vertex::Bottom);
        m.intern(Vertex::Top);
        let mut cache: HashMap<Ordinal, Materialization> = HashMap::new();
        let mut seen_edges = HashSet::new();
        for (slot, beta) in copies {
            let inner = cache.entry(beta.clone()).or_insert_with(|| self.materialize_at(&beta));
            let ids: Vec<usize> = inner
                .vertices
                .iter()
                .map(|v| m.intern(Vertex::glue(slot, v.clone())))
                .collect();
            for &(a, b, w) in &inner.edges {
                let (a, b) = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                if seen_edges.insert((a, b)) {
                    m.edges.push((a, b, if scale { w.half() } else { w }));
                }
            }
        }
        m
    }
}

//! Embeddings of diamonds built from labelled trees, and labelled trees
//! extracted back from embeddings.
//!
//! A [`PointMap`] sends the vertices of a diamond to rational vectors. Maps
//! are evaluated lazily by address and memoized, so countably branching
//! diamonds are queried without enumerating them. [`check_distortion`]
//! compares `‖f(u) − f(v)‖` with `d(u, v)` on every active pair of the
//! window.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diamond::{vertex_dist, Branching, DiamondError, DiamondSpec, Sign, Slot, Vertex};
use crate::ordinal::{enumerate_below, Ordinal, OrdinalKind};
use crate::space::{self, half, qi, NormedSpace, Vector, Q};
use crate::trees::{
    self, build_shape, verify_dyadic, verify_sprawling, LabelJson, LabelledTree, LabelledTreeJson, NodePath, Step,
    TreeError, TreeKind, TruncationSpec,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Diamond(#[from] DiamondError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("input tree fails verification at {node}: {reason}")]
    TreeUnverified { node: NodePath, reason: String },
    #[error("label of node {node} has norm outside [1/2, 1]")]
    NormWindow { node: NodePath },
    #[error("separation constant {0} is outside the admissible window")]
    DeltaWindow(String),
    #[error("vertex {0} lies outside the window of the tree")]
    OutsideWindow(String),
    #[error("no value for vertex {0}")]
    MissingValue(String),
    #[error("at node {node} no hub passes the 2A separation test (best hub {best_hub})")]
    BranchTestFailed { node: NodePath, best_hub: u64 },
    #[error("map has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// A map from the vertices of a diamond into a finite-dimensional space.
pub trait PointMap: Send + Sync {
    fn spec(&self) -> &DiamondSpec;
    fn space(&self) -> NormedSpace;
    /// The image of a canonical vertex of [`Self::spec`].
    fn eval(&self, v: &Vertex) -> Result<Vector, EmbedError>;
}

/// Memo table shared by the lazily evaluated maps.
#[derive(Debug, Default)]
struct Memo(Mutex<HashMap<Vertex, Vector>>);

impl Memo {
    fn get_or(&self, v: &Vertex, compute: impl FnOnce() -> Result<Vector, EmbedError>) -> Result<Vector, EmbedError> {
        if let Some(x) = self.0.lock().unwrap().get(v) {
            return Ok(x.clone());
        }
        let x = compute()?;
        self.0.lock().unwrap().insert(v.clone(), x.clone());
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Dyadic,
    Sprawling,
}

/// The embedding of a diamond determined by a labelled tree.
#[derive(Debug)]
pub struct TreeEmbedding {
    spec: DiamondSpec,
    construction: Construction,
    tree: LabelledTree,
    memo: Memo,
}

impl TreeEmbedding {
    pub fn tree(&self) -> &LabelledTree {
        &self.tree
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    fn w(&self, s: &NodePath) -> Result<&Vector, EmbedError> {
        self.tree
            .label(s)
            .ok_or_else(|| EmbedError::OutsideWindow(s.to_string()))
    }

    fn eval_at(&self, s: &NodePath, alpha: &Ordinal, v: &Vertex) -> Result<Vector, EmbedError> {
        let (branch_step, plus_step): (StepFn, StepFn) = match self.construction {
            Construction::Dyadic => (Step::Index, |i| Step::Index(1 - i)),
            Construction::Sprawling => (|i| Step::Pair(0, i), |i| Step::Pair(1, i)),
        };
        let limit_step: StepFn = match self.construction {
            Construction::Dyadic => Step::Index,
            Construction::Sprawling => |n| Step::Pair(0, n),
        };
        let h = half();
        match (v, alpha.classify()) {
            (Vertex::Top, _) => Ok(self.w(s)?.clone()),
            (Vertex::Bottom, _) => Ok(self.tree.space.zero()),
            (Vertex::Hub(i), OrdinalKind::Successor(_)) => {
                self.check_branch(*i, v)?;
                Ok(space::scale(&h, self.w(&s.child(branch_step(*i)))?))
            }
            (Vertex::Sub(Slot::Branch(i, sign), u), OrdinalKind::Successor(beta)) => {
                self.check_branch(*i, v)?;
                match sign {
                    Sign::Minus => Ok(space::scale(&h, &self.eval_at(&s.child(branch_step(*i)), &beta, u)?)),
                    Sign::Plus => {
                        let inner = self.eval_at(&s.child(plus_step(*i)), &beta, u)?;
                        Ok(space::scale(&h, &space::add(self.w(&s.child(branch_step(*i)))?, &inner)))
                    }
                }
            }
            (Vertex::Sub(Slot::Summand(n), u), OrdinalKind::Limit) => {
                let beta = enumerate_below(alpha, *n).expect("limit");
                self.eval_at(&s.child(limit_step(*n)), &beta, u)
            }
            _ => Err(EmbedError::OutsideWindow(v.to_string())),
        }
    }

    fn check_branch(&self, i: u64, v: &Vertex) -> Result<(), EmbedError> {
        let width = match self.construction {
            Construction::Dyadic => 2,
            Construction::Sprawling => self.tree.shape.trunc.fan_width,
        };
        if i < width {
            Ok(())
        } else {
            Err(EmbedError::OutsideWindow(v.to_string()))
        }
    }
}

impl PointMap for TreeEmbedding {
    fn spec(&self) -> &DiamondSpec {
        &self.spec
    }

    fn space(&self) -> NormedSpace {
        self.tree.space
    }

    fn eval(&self, v: &Vertex) -> Result<Vector, EmbedError> {
        let v = self.spec.normalize(v)?;
        self.memo
            .get_or(&v, || self.eval_at(&NodePath::root(), &self.spec.alpha, &v))
    }
}

fn check_norm_window(tree: &LabelledTree) -> Result<(), EmbedError> {
    let lo = tree.space.raise(&half());
    for (node, x) in &tree.labels {
        let p = tree.space.norm_pow(x);
        if p < lo || p > Q::one() {
            return Err(EmbedError::NormWindow { node: node.clone() });
        }
    }
    Ok(())
}

fn require_passed(report: trees::VerifyReport) -> Result<(), EmbedError> {
    match report.failure {
        None => Ok(()),
        Some(f) => Err(EmbedError::TreeUnverified {
            node: f.node,
            reason: f.reason,
        }),
    }
}

type StepFn = fn(u64) -> Step;

/// Embeds `D_α^2` through a δ-tree of height `α`.
///
/// The tree must pass [`verify_dyadic`] with `0 < δ ≤ ½` and every label
/// must have norm in `[½, 1]`. The top goes to the root label, the bottom
/// to zero, hub `i` to half of child `i`; the lower copy on branch `i` is
/// half the map of child `i`, the upper copy is half of child `i` plus half
/// the map of the other child. The result satisfies
/// `δ·d ≤ ‖f(u) − f(v)‖ ≤ d` on active pairs.
pub fn build_dyadic_embedding(tree: &LabelledTree) -> Result<TreeEmbedding, EmbedError> {
    require_passed(verify_dyadic(tree)?)?;
    if tree.delta <= Q::zero() || tree.delta > half() {
        return Err(EmbedError::DeltaWindow(space::q_to_string(&tree.delta)));
    }
    check_norm_window(tree)?;
    Ok(TreeEmbedding {
        spec: DiamondSpec::new(tree.shape.alpha.clone(), Branching::Finite(2), tree.shape.trunc)?,
        construction: Construction::Dyadic,
        tree: tree.clone(),
        memo: Memo::default(),
    })
}

/// Embeds `D_α^ω` (on the fan window of the tree) through a δ-sprawling
/// tree with labels of norm in `[½, 1]`. Hub `i` goes to half of child
/// `(0,i)`, the lower copy on branch `i` to half the map of `(0,i)`, the
/// upper copy to half of `(0,i)` plus half the map of `(1,i)`. Active pairs
/// satisfy `(δ/2)·d ≤ ‖f(u) − f(v)‖ ≤ d`.
pub fn build_sprawling_embedding(tree: &LabelledTree) -> Result<TreeEmbedding, EmbedError> {
    require_passed(verify_sprawling(tree)?)?;
    if tree.delta <= Q::zero() || tree.delta > Q::one() {
        return Err(EmbedError::DeltaWindow(space::q_to_string(&tree.delta)));
    }
    check_norm_window(tree)?;
    Ok(TreeEmbedding {
        spec: DiamondSpec::new(tree.shape.alpha.clone(), Branching::Omega, tree.shape.trunc)?,
        construction: Construction::Sprawling,
        tree: tree.clone(),
        memo: Memo::default(),
    })
}

/// Brings a tree from the unit ball into the form the constructions need:
/// labels are lifted into the shell `½ ≤ ‖·‖ ≤ 1` of a space with one more
/// coordinate (see [`trees::lift_to_shell`]) and, for dyadic trees, the
/// declared separation is capped at `½`.
pub fn prepare_tree(tree: &LabelledTree) -> LabelledTree {
    let mut lifted = trees::lift_to_shell(tree);
    if tree.shape.kind == TreeKind::Dyadic && lifted.delta > half() {
        lifted.delta = half();
    }
    lifted
}

/// A map given by an explicit table of values.
#[derive(Debug)]
pub struct TableMap {
    spec: DiamondSpec,
    space: NormedSpace,
    values: HashMap<Vertex, Vector>,
}

impl TableMap {
    pub fn new(spec: DiamondSpec, space: NormedSpace, values: HashMap<Vertex, Vector>) -> Result<Self, EmbedError> {
        for x in values.values() {
            if x.len() != space.dim {
                return Err(EmbedError::Dimension {
                    expected: space.dim,
                    got: x.len(),
                });
            }
        }
        Ok(TableMap { spec, space, values })
    }

    /// Tabulates `f` on every vertex of the materialized window.
    pub fn tabulate(f: &dyn PointMap) -> Result<Self, EmbedError> {
        let m = f.spec().materialize()?;
        let values = m
            .vertices
            .iter()
            .map(|v| Ok((v.clone(), f.eval(v)?)))
            .collect::<Result<_, EmbedError>>()?;
        Ok(TableMap {
            spec: f.spec().clone(),
            space: f.space(),
            values,
        })
    }

    pub fn values(&self) -> &HashMap<Vertex, Vector> {
        &self.values
    }
}

impl PointMap for TableMap {
    fn spec(&self) -> &DiamondSpec {
        &self.spec
    }

    fn space(&self) -> NormedSpace {
        self.space
    }

    fn eval(&self, v: &Vertex) -> Result<Vector, EmbedError> {
        let v = self.spec.normalize(v)?;
        self.values
            .get(&v)
            .cloned()
            .ok_or_else(|| EmbedError::MissingValue(v.to_string()))
    }
}

/// A map given by a closure.
pub struct FnMap<F> {
    spec: DiamondSpec,
    space: NormedSpace,
    f: F,
}

impl<F: Fn(&Vertex) -> Vector + Send + Sync> FnMap<F> {
    pub fn new(spec: DiamondSpec, space: NormedSpace, f: F) -> Self {
        FnMap { spec, space, f }
    }
}

impl<F: Fn(&Vertex) -> Vector + Send + Sync> PointMap for FnMap<F> {
    fn spec(&self) -> &DiamondSpec {
        &self.spec
    }

    fn space(&self) -> NormedSpace {
        self.space
    }

    fn eval(&self, v: &Vertex) -> Result<Vector, EmbedError> {
        Ok((self.f)(&self.spec.normalize(v)?))
    }
}

/// `λ·f`.
pub struct Scaled<'a> {
    pub base: &'a dyn PointMap,
    pub factor: Q,
}

impl PointMap for Scaled<'_> {
    fn spec(&self) -> &DiamondSpec {
        self.base.spec()
    }

    fn space(&self) -> NormedSpace {
        self.base.space()
    }

    fn eval(&self, v: &Vertex) -> Result<Vector, EmbedError> {
        Ok(space::scale(&self.factor, &self.base.eval(v)?))
    }
}

/// The quotient vector `f_{xy} = (f(x) − f(y)) / d(x, y)` for `x ≠ y`.
pub fn quotient(f: &dyn PointMap, x: &Vertex, y: &Vertex) -> Result<Vector, EmbedError> {
    let (x, y) = (f.spec().normalize(x)?, f.spec().normalize(y)?);
    let d = vertex_dist(&x, &y);
    assert!(!d.is_zero(), "quotient of a vertex with itself");
    let inv = Q::one() / d.to_q();
    Ok(space::scale(&inv, &space::sub(&f.eval(&x)?, &f.eval(&y)?)))
}

// ---------------------------------------------------------------------------
// Distortion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub u: Vertex,
    pub v: Vertex,
    #[serde(with = "space::serde_q")]
    pub ratio: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub pairs: usize,
    /// Ratios are `‖Δf‖/d` raised to this power (2 in ℓ2, else 1).
    pub ratio_power: u32,
    #[serde(with = "space::serde_q")]
    pub lower: Q,
    #[serde(with = "space::serde_q")]
    pub upper: Q,
    #[serde(with = "space::serde_q")]
    pub min_ratio: Q,
    #[serde(with = "space::serde_q")]
    pub max_ratio: Q,
    pub witnesses: Vec<Witness>,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub passed: bool,
}

/// Checks `lower·d(u,v) ≤ ‖f(u) − f(v)‖ ≤ upper·d(u,v)` exactly on every
/// active pair of the window. The witnesses are the pairs attaining the
/// minimal and maximal ratio (first in pair order on ties).
pub fn check_distortion(f: &dyn PointMap, lower: &Q, upper: &Q) -> Result<DistortionReport, EmbedError> {
    let sp = f.space();
    let pairs = f.spec().active_pairs();
    let mut min: Option<Witness> = None;
    let mut max: Option<Witness> = None;
    for p in &pairs {
        let d = sp.raise(&vertex_dist(&p.u, &p.v).to_q());
        let diff = space::sub(&f.eval(&p.u)?, &f.eval(&p.v)?);
        let ratio = sp.norm_pow(&diff) / d;
        if min.as_ref().is_none_or(|m| ratio < m.ratio) {
            min = Some(Witness { u: p.u.clone(), v: p.v.clone(), ratio: ratio.clone() });
        }
        if max.as_ref().is_none_or(|m| ratio > m.ratio) {
            max = Some(Witness { u: p.u.clone(), v: p.v.clone(), ratio });
        }
    }
    let (min, max) = (min.expect("at least one active pair"), max.expect("at least one active pair"));
    let lower_ok = min.ratio >= sp.raise(lower);
    let upper_ok = max.ratio <= sp.raise(upper);
    Ok(DistortionReport {
        pairs: pairs.len(),
        ratio_power: sp.power(),
        lower: lower.clone(),
        upper: upper.clone(),
        min_ratio: min.ratio.clone(),
        max_ratio: max.ratio.clone(),
        witnesses: vec![min, max],
        lower_ok,
        upper_ok,
        passed: lower_ok && upper_ok,
    })
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// `factor · f` restricted to the copy reached through `prefix`.
struct View<'a> {
    f: &'a dyn PointMap,
    prefix: Vec<Slot>,
    factor: Q,
}

impl<'a> View<'a> {
    fn at(&self, v: Vertex) -> Result<Vector, EmbedError> {
        let mut full = v;
        for slot in self.prefix.iter().rev() {
            full = Vertex::glue(*slot, full);
        }
        Ok(space::scale(&self.factor, &self.f.eval(&full)?))
    }

    fn descend(&self, slot: Slot, scale: bool) -> View<'a> {
        let mut prefix = self.prefix.clone();
        prefix.push(slot);
        View {
            f: self.f,
            prefix,
            factor: if scale { &self.factor * qi(2) } else { self.factor.clone() },
        }
    }

    /// `f_{tb}` of the viewed copy (its poles are at distance one).
    fn root(&self) -> Result<Vector, EmbedError> {
        Ok(space::sub(&self.at(Vertex::Top)?, &self.at(Vertex::Bottom)?))
    }

    /// `(f_{t,x^i}, f_{x^i,b})` of the viewed copy.
    fn hub_quotients(&self, i: u64) -> Result<(Vector, Vector), EmbedError> {
        let two = qi(2);
        let (t, x, b) = (self.at(Vertex::Top)?, self.at(Vertex::Hub(i))?, self.at(Vertex::Bottom)?);
        Ok((space::scale(&two, &space::sub(&t, &x)), space::scale(&two, &space::sub(&x, &b))))
    }
}

/// Extracts an `A`-tree of height `α` from a map on `D_α^2` satisfying
/// `A·d ≤ ‖Δf‖ ≤ d` on active pairs.
///
/// The root is `f_{tb}`. At a successor stage the lowest hub `i` with
/// `‖f_{t,x^i} − f_{x^i,b}‖ ≥ 2A` is chosen; child `0` is `f_{t,x^i}` and
/// carries the tree of `2f` on the upper copy of branch `i`, child `1` is
/// `f_{x^i,b}` with the tree of `2f` on the lower copy. At a limit stage
/// child `n` carries the tree of `f` on summand `n`.
pub fn extract_dyadic_tree(f: &dyn PointMap, a: &Q) -> Result<LabelledTree, EmbedError> {
    let spec = f.spec();
    let shape = build_shape(TreeKind::Dyadic, &spec.alpha, spec.trunc)?;
    let mut labels = BTreeMap::new();
    let hubs = spec.branch_window();
    let two_a = a * qi(2);
    let sp = f.space();
    let root = View { f, prefix: Vec::new(), factor: Q::one() };
    let mut stack = vec![(NodePath::root(), spec.alpha.clone(), root)];
    while let Some((path, alpha, view)) = stack.pop() {
        labels.insert(path.clone(), view.root()?);
        match alpha.classify() {
            OrdinalKind::Zero => {}
            OrdinalKind::Successor(beta) => {
                let mut best = (0, Q::zero());
                let mut chosen = None;
                for i in 0..hubs {
                    let (up, down) = view.hub_quotients(i)?;
                    let gap = sp.norm_pow(&space::sub(&up, &down));
                    if gap >= sp.raise(&two_a) {
                        chosen = Some(i);
                        break;
                    }
                    if gap > best.1 {
                        best = (i, gap);
                    }
                }
                let i = chosen.ok_or(EmbedError::BranchTestFailed {
                    node: path.clone(),
                    best_hub: best.0,
                })?;
                let upper = view.descend(Slot::Branch(i, Sign::Plus), true);
                let lower = view.descend(Slot::Branch(i, Sign::Minus), true);
                stack.push((path.child(Step::Index(0)), beta.clone(), upper));
                stack.push((path.child(Step::Index(1)), beta, lower));
            }
            OrdinalKind::Limit => {
                for n in 0..spec.trunc.limit_width {
                    let beta = enumerate_below(&alpha, n).expect("limit");
                    stack.push((path.child(Step::Index(n)), beta, view.descend(Slot::Summand(n), false)));
                }
            }
        }
    }
    Ok(LabelledTree::new(shape, sp, a.clone(), labels))
}

/// Extracts a `2A`-sprawling tree of height `α` from a map on the window of
/// `D_α^ω` satisfying `A·d ≤ ‖Δf‖ ≤ d` on active pairs.
///
/// The root is `f_{tb}`. At a successor stage child `(0,i)` is `f_{x^i,b}`
/// with the tree of `2f` on the lower copy of branch `i`, and child `(1,i)`
/// is `f_{t,x^i}` with the tree of `2f` on the upper copy. At a limit stage
/// child `(0,n)` carries the tree of `f` on summand `n`.
pub fn extract_sprawling_tree(f: &dyn PointMap, a: &Q, trunc: TruncationSpec) -> Result<LabelledTree, EmbedError> {
    let spec = f.spec();
    let shape = build_shape(TreeKind::Sprawling, &spec.alpha, trunc)?;
    let mut labels = BTreeMap::new();
    let root = View { f, prefix: Vec::new(), factor: Q::one() };
    let mut stack = vec![(NodePath::root(), spec.alpha.clone(), root)];
    while let Some((path, alpha, view)) = stack.pop() {
        labels.insert(path.clone(), view.root()?);
        match alpha.classify() {
            OrdinalKind::Zero => {}
            OrdinalKind::Successor(beta) => {
                for i in 0..trunc.fan_width {
                    let lower = view.descend(Slot::Branch(i, Sign::Minus), true);
                    let upper = view.descend(Slot::Branch(i, Sign::Plus), true);
                    stack.push((path.child(Step::Pair(0, i)), beta.clone(), lower));
                    stack.push((path.child(Step::Pair(1, i)), beta.clone(), upper));
                }
            }
            OrdinalKind::Limit => {
                for n in 0..trunc.limit_width {
                    let beta = enumerate_below(&alpha, n).expect("limit");
                    stack.push((path.child(Step::Pair(0, n)), beta, view.descend(Slot::Summand(n), false)));
                }
            }
        }
    }
    Ok(LabelledTree::new(shape, f.space(), a * qi(2), labels))
}

// ---------------------------------------------------------------------------
// JSON descriptors
// ---------------------------------------------------------------------------

/// A serializable description of a map: a tree together with the
/// construction that turns it into an embedding, or an explicit table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "lowercase")]
pub enum EmbeddingDescriptor {
    Dyadic { tree: LabelledTreeJson },
    Sprawling { tree: LabelledTreeJson },
    Table {
        alpha: Ordinal,
        branching: Branching,
        #[serde(default)]
        trunc: TruncationSpec,
        space: NormedSpace,
        values: Vec<(Vertex, LabelJson)>,
    },
}

impl EmbeddingDescriptor {
    pub fn of_tree(construction: Construction, tree: &LabelledTree) -> Self {
        let tree = LabelledTreeJson::from(tree);
        match construction {
            Construction::Dyadic => EmbeddingDescriptor::Dyadic { tree },
            Construction::Sprawling => EmbeddingDescriptor::Sprawling { tree },
        }
    }

    pub fn of_table(t: &TableMap) -> Self {
        let mut values: Vec<(Vertex, LabelJson)> =
            t.values.iter().map(|(v, x)| (v.clone(), LabelJson(x.clone()))).collect();
        values.sort_by(|a, b| a.0.cmp(&b.0));
        EmbeddingDescriptor::Table {
            alpha: t.spec.alpha.clone(),
            branching: t.spec.branching,
            trunc: t.spec.trunc,
            space: t.space,
            values,
        }
    }

    pub fn instantiate(self) -> Result<Box<dyn PointMap>, EmbedError> {
        Ok(match self {
            EmbeddingDescriptor::Dyadic { tree } => Box::new(build_dyadic_embedding(&LabelledTree::try_from(tree)?)?),
            EmbeddingDescriptor::Sprawling { tree } => {
                Box::new(build_sprawling_embedding(&LabelledTree::try_from(tree)?)?)
            }
            EmbeddingDescriptor::Table { alpha, branching, trunc, space, values } => {
                let spec = DiamondSpec::new(alpha, branching, trunc)?;
                let values = values
                    .into_iter()
                    .map(|(v, x)| Ok((spec.normalize(&v)?, x.0)))
                    .collect::<Result<_, EmbedError>>()?;
                Box::new(TableMap::new(spec, space, values)?)
            }
        })
    }
}

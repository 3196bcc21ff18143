//! Tree shapes of ordinal height and their labelled versions.
//!
//! Three shape families are built by transfinite recursion on the height:
//!
//! * dyadic trees: a successor height gives a root with the two children
//!   `0` and `1`, a limit height `α` gives a root whose child `n` carries the
//!   subtree of height `β_n` (the canonical enumeration of `[0, α)`);
//! * sprawling trees: a successor height gives the children `(0,n)` and
//!   `(1,n)` for every `n`, a limit height the children `(0,n)`;
//! * bushes: finitely many children at successor heights, with convex
//!   weights attached to the labels.
//!
//! Countable fans are materialized through a [`TruncationSpec`] window and
//! the verifiers only ever judge materialized nodes; reports say so through
//! their `truncated` flag.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ordinal::{enumerate_below, Ordinal, OrdinalKind};
use crate::space::{self, half, q, qi, Norm, NormedSpace, Vector, Q};

pub const DEFAULT_NODE_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("node budget exceeded: more than {0} nodes")]
    BudgetExceeded(usize),
    #[error("expected a {expected:?} tree, got {got:?}")]
    KindMismatch { expected: TreeKind, got: TreeKind },
    #[error("node {0} has no label")]
    MissingLabel(NodePath),
    #[error("label of node {node} has dimension {got}, space has dimension {expected}")]
    BadDimension { node: NodePath, expected: usize, got: usize },
    #[error("node {0} has finitely many successors but no weights")]
    MissingWeights(NodePath),
    #[error("label given for node {0}, which is not in the shape")]
    UnknownNode(NodePath),
    #[error("invalid truncation: {0}")]
    BadTruncation(String),
    #[error("input tree fails verification: {0}")]
    Unverified(String),
    #[error("invalid tree: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Dyadic,
    Sprawling,
    Bush,
}

/// Finite windows onto countable fans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TruncationSpec {
    /// Explicit members kept per infinite fan at successor stages.
    pub fan_width: u64,
    /// Summands kept per limit stage.
    pub limit_width: u64,
    /// Optional depth past which successors are not materialized.
    #[serde(default)]
    pub depth_budget: Option<usize>,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        TruncationSpec {
            fan_width: 3,
            limit_width: 3,
            depth_budget: None,
        }
    }
}

impl TruncationSpec {
    pub fn new(fan_width: u64, limit_width: u64) -> Self {
        TruncationSpec {
            fan_width,
            limit_width,
            depth_budget: None,
        }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.fan_width < 2 {
            return Err(TreeError::BadTruncation("fan_width must be at least 2".into()));
        }
        if self.limit_width < 1 {
            return Err(TreeError::BadTruncation("limit_width must be at least 1".into()));
        }
        if self.depth_budget == Some(0) {
            return Err(TreeError::BadTruncation("depth_budget must be positive".into()));
        }
        Ok(())
    }
}

/// One step of a node path: `n` in dyadic trees and bushes, `(bit, n)` in
/// sprawling trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Step {
    Index(u64),
    Pair(u8, u64),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodePath(pub Vec<Step>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn child(&self, step: Step) -> Self {
        let mut steps = self.0.clone();
        steps.push(step);
        NodePath(steps)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_indices(indices: &[u64]) -> Self {
        NodePath(indices.iter().map(|&n| Step::Index(n)).collect())
    }

    pub fn from_pairs(pairs: &[(u8, u64)]) -> Self {
        NodePath(pairs.iter().map(|&(b, n)| Step::Pair(b, n)).collect())
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("∅");
        }
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match s {
                Step::Index(n) => write!(f, "{n}")?,
                Step::Pair(b, n) => write!(f, "({b},{n})")?,
            }
        }
        f.write_str(")")
    }
}

/// The successor profile of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Successors {
    Leaf,
    /// Children `0` and `1` (dyadic trees).
    Binary,
    /// Children `0..count` (bushes).
    Finite { count: u64 },
    /// Children `n` for all `n`; the first `kept` are materialized.
    Fan { kept: u64 },
    /// Children `(0,n)` and `(1,n)` for all `n`.
    SprawlPairs { kept: u64 },
    /// Children `(0,n)` for all `n`.
    SprawlSingles { kept: u64 },
    /// Beyond the depth budget; successors are not materialized.
    Cut,
}

impl Successors {
    pub fn children(&self) -> Vec<Step> {
        match *self {
            Successors::Leaf | Successors::Cut => Vec::new(),
            Successors::Binary => vec![Step::Index(0), Step::Index(1)],
            Successors::Finite { count } => (0..count).map(Step::Index).collect(),
            Successors::Fan { kept } => (0..kept).map(Step::Index).collect(),
            Successors::SprawlPairs { kept } => (0..kept)
                .flat_map(|n| [Step::Pair(0, n), Step::Pair(1, n)])
                .collect(),
            Successors::SprawlSingles { kept } => (0..kept).map(|n| Step::Pair(0, n)).collect(),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(
            self,
            Successors::Fan { .. } | Successors::SprawlPairs { .. } | Successors::SprawlSingles { .. } | Successors::Cut
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    /// Height of the subtree rooted here.
    pub height: Ordinal,
    pub successors: Successors,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeShape {
    pub kind: TreeKind,
    pub alpha: Ordinal,
    pub trunc: TruncationSpec,
    pub nodes: BTreeMap<NodePath, Node>,
}

impl TreeShape {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, path: &NodePath) -> bool {
        self.nodes.contains_key(path)
    }

    /// True when some fan or depth cut hides nodes.
    pub fn is_truncated(&self) -> bool {
        self.nodes.values().any(|n| n.successors.is_infinite())
    }

    /// Every prefix of every node is a node.
    pub fn is_prefix_closed(&self) -> bool {
        self.nodes.keys().all(|p| {
            (0..p.len()).all(|k| self.nodes.contains_key(&NodePath(p.0[..k].to_vec())))
        })
    }
}

/// Builds the canonical shape of the given kind and height.
pub fn build_shape(kind: TreeKind, alpha: &Ordinal, trunc: TruncationSpec) -> Result<TreeShape, TreeError> {
    build_shape_capped(kind, alpha, trunc, DEFAULT_NODE_CAP)
}

pub fn build_shape_capped(
    kind: TreeKind,
    alpha: &Ordinal,
    trunc: TruncationSpec,
    node_cap: usize,
) -> Result<TreeShape, TreeError> {
    trunc.validate()?;
    let mut nodes = BTreeMap::new();
    grow(kind, alpha, &trunc, NodePath::root(), &mut nodes, node_cap)?;
    Ok(TreeShape {
        kind,
        alpha: alpha.clone(),
        trunc,
        nodes,
    })
}

fn grow(
    kind: TreeKind,
    height: &Ordinal,
    trunc: &TruncationSpec,
    path: NodePath,
    nodes: &mut BTreeMap<NodePath, Node>,
    cap: usize,
) -> Result<(), TreeError> {
    if nodes.len() >= cap {
        return Err(TreeError::BudgetExceeded(cap));
    }
    let cut = !height.is_zero() && trunc.depth_budget.is_some_and(|b| path.len() >= b);
    let (successors, children): (Successors, Vec<(Step, Ordinal)>) = if cut {
        (Successors::Cut, Vec::new())
    } else {
        match height.classify() {
            OrdinalKind::Zero => (Successors::Leaf, Vec::new()),
            OrdinalKind::Successor(beta) => match kind {
                TreeKind::Dyadic => (
                    Successors::Binary,
                    vec![(Step::Index(0), beta.clone()), (Step::Index(1), beta)],
                ),
                TreeKind::Bush => (
                    Successors::Finite { count: 2 },
                    vec![(Step::Index(0), beta.clone()), (Step::Index(1), beta)],
                ),
                TreeKind::Sprawling => {
                    let kept = trunc.fan_width;
                    let children = (0..kept)
                        .flat_map(|n| [(Step::Pair(0, n), beta.clone()), (Step::Pair(1, n), beta.clone())])
                        .collect();
                    (Successors::SprawlPairs { kept }, children)
                }
            },
            OrdinalKind::Limit => {
                let kept = trunc.limit_width;
                let summands = (0..kept).map(|n| (n, enumerate_below(height, n).expect("limit")));
                match kind {
                    TreeKind::Sprawling => (
                        Successors::SprawlSingles { kept },
                        summands.map(|(n, b)| (Step::Pair(0, n), b)).collect(),
                    ),
                    _ => (Successors::Fan { kept }, summands.map(|(n, b)| (Step::Index(n), b)).collect()),
                }
            }
        }
    };
    nodes.insert(
        path.clone(),
        Node {
            height: height.clone(),
            successors,
        },
    );
    for (step, h) in children {
        grow(kind, &h, trunc, path.child(step), nodes, cap)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Labelled trees
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct LabelledTree {
    pub shape: TreeShape,
    pub space: NormedSpace,
    pub delta: Q,
    /// Radius of the ball all labels must lie in.
    pub radius: Q,
    pub labels: BTreeMap<NodePath, Vector>,
    /// Convex weights per finite-successor node (bushes only), in child order.
    pub weights: Option<BTreeMap<NodePath, Vec<Q>>>,
}

impl LabelledTree {
    pub fn new(shape: TreeShape, space: NormedSpace, delta: Q, labels: BTreeMap<NodePath, Vector>) -> Self {
        LabelledTree {
            shape,
            space,
            delta,
            radius: Q::one(),
            labels,
            weights: None,
        }
    }

    pub fn root(&self) -> &Vector {
        &self.labels[&NodePath::root()]
    }

    pub fn label(&self, path: &NodePath) -> Option<&Vector> {
        self.labels.get(path)
    }

    /// The same tree with each label `x` replaced by `f(x)` in `space`.
    pub fn map_labels(&self, space: NormedSpace, delta: Q, f: impl Fn(&Vector) -> Vector) -> LabelledTree {
        LabelledTree {
            shape: self.shape.clone(),
            space,
            delta,
            radius: self.radius.clone(),
            labels: self.labels.iter().map(|(p, v)| (p.clone(), f(v))).collect(),
            weights: self.weights.clone(),
        }
    }

    fn check_labels(&self) -> Result<(), TreeError> {
        for path in self.shape.nodes.keys() {
            let v = self.labels.get(path).ok_or_else(|| TreeError::MissingLabel(path.clone()))?;
            if v.len() != self.space.dim {
                return Err(TreeError::BadDimension {
                    node: path.clone(),
                    expected: self.space.dim,
                    got: v.len(),
                });
            }
        }
        if let Some(extra) = self.labels.keys().find(|p| !self.shape.contains(p)) {
            return Err(TreeError::UnknownNode(extra.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: NodePath,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub nodes_checked: usize,
    /// Some fan of the shape has members that were not materialized.
    pub truncated: bool,
    pub failure: Option<Violation>,
}

struct Checker<'a> {
    tree: &'a LabelledTree,
    checked: usize,
}

impl<'a> Checker<'a> {
    fn x(&self, p: &NodePath) -> &'a Vector {
        &self.tree.labels[p]
    }

    fn fail(&self, node: &NodePath, reason: String) -> VerifyReport {
        VerifyReport {
            passed: false,
            nodes_checked: self.checked,
            truncated: self.tree.shape.is_truncated(),
            failure: Some(Violation {
                node: node.clone(),
                reason,
            }),
        }
    }

    fn pass(&self) -> VerifyReport {
        VerifyReport {
            passed: true,
            nodes_checked: self.checked,
            truncated: self.tree.shape.is_truncated(),
            failure: None,
        }
    }

    fn in_ball(&self, p: &NodePath) -> Result<(), String> {
        let sp = &self.tree.space;
        if sp.cmp_norm(self.x(p), &self.tree.radius).is_gt() {
            Err(format!(
                "label {:?} lies outside the ball of radius {}",
                space::vec_to_strings(self.x(p)),
                space::q_to_string(&self.tree.radius)
            ))
        } else {
            Ok(())
        }
    }

    fn constant_fan(&self, s: &NodePath, children: &[Step]) -> Result<(), String> {
        for c in children {
            if self.x(&s.child(*c)) != self.x(s) {
                return Err(format!("fan member {} differs from its parent", s.child(*c)));
            }
        }
        Ok(())
    }
}

fn run_checks(
    tree: &LabelledTree,
    expected: TreeKind,
    node_rule: impl Fn(&Checker, &NodePath, &Node) -> Result<(), String>,
) -> Result<VerifyReport, TreeError> {
    if tree.shape.kind != expected {
        return Err(TreeError::KindMismatch {
            expected,
            got: tree.shape.kind,
        });
    }
    tree.check_labels()?;
    let mut checker = Checker { tree, checked: 0 };
    for (path, node) in &tree.shape.nodes {
        if let Err(reason) = checker.in_ball(path).and_then(|_| node_rule(&checker, path, node)) {
            return Ok(checker.fail(path, reason));
        }
        checker.checked += 1;
    }
    Ok(checker.pass())
}

/// Checks the δ-tree conditions on every materialized node: binary nodes
/// are exact midpoints of children at distance at least `2δ`, fan nodes
/// equal all their children, and every label lies in the ball.
pub fn verify_dyadic(tree: &LabelledTree) -> Result<VerifyReport, TreeError> {
    let two_delta = &tree.delta * qi(2);
    run_checks(tree, TreeKind::Dyadic, |c, s, node| match node.successors {
        Successors::Binary => {
            let x0 = c.x(&s.child(Step::Index(0)));
            let x1 = c.x(&s.child(Step::Index(1)));
            if &space::midpoint(x0, x1) != c.x(s) {
                return Err("label is not the midpoint of its two children".into());
            }
            if tree.space.cmp_norm(&space::sub(x0, x1), &two_delta).is_lt() {
                return Err("children are closer than 2δ".into());
            }
            Ok(())
        }
        Successors::Fan { .. } => c.constant_fan(s, &node.successors.children()),
        Successors::Leaf | Successors::Cut => Ok(()),
        other => Err(format!("unexpected successor profile {other:?} in a dyadic tree")),
    })
}

/// Checks the δ-sprawling-tree conditions: at pair nodes the label is the
/// midpoint of every `(0,n)`/`(1,n)` pair and the `(0,·)` children are
/// pairwise at distance at least `δ`; single-fan nodes are constant.
pub fn verify_sprawling(tree: &LabelledTree) -> Result<VerifyReport, TreeError> {
    run_checks(tree, TreeKind::Sprawling, |c, s, node| match node.successors {
        Successors::SprawlPairs { kept } => {
            for n in 0..kept {
                let left = c.x(&s.child(Step::Pair(0, n)));
                let right = c.x(&s.child(Step::Pair(1, n)));
                if &space::midpoint(left, right) != c.x(s) {
                    return Err(format!("label is not the midpoint of children (0,{n}) and (1,{n})"));
                }
            }
            for n in 0..kept {
                for m in n + 1..kept {
                    let a = c.x(&s.child(Step::Pair(0, n)));
                    let b = c.x(&s.child(Step::Pair(0, m)));
                    if tree.space.cmp_norm(&space::sub(a, b), &tree.delta).is_lt() {
                        return Err(format!("children (0,{n}) and (0,{m}) are closer than δ"));
                    }
                }
            }
            Ok(())
        }
        Successors::SprawlSingles { .. } => c.constant_fan(s, &node.successors.children()),
        Successors::Leaf | Successors::Cut => Ok(()),
        other => Err(format!("unexpected successor profile {other:?} in a sprawling tree")),
    })
}

/// Checks the δ-bush conditions: finite-successor nodes are exact convex
/// combinations of their children with weights in `(0,1]` summing to one
/// and every child at distance at least `δ`; countable fans are constant.
/// Labels must lie in the ball of radius `tree.radius`.
pub fn verify_bush(tree: &LabelledTree) -> Result<VerifyReport, TreeError> {
    if tree.shape.kind == TreeKind::Bush {
        for (path, node) in &tree.shape.nodes {
            if let Successors::Finite { .. } = node.successors {
                let has = tree.weights.as_ref().is_some_and(|w| w.contains_key(path));
                if !has {
                    return Err(TreeError::MissingWeights(path.clone()));
                }
            }
        }
    }
    run_checks(tree, TreeKind::Bush, |c, s, node| match node.successors {
        Successors::Finite { count } => {
            let weights = &tree.weights.as_ref().unwrap()[s];
            if weights.len() as u64 != count {
                return Err(format!("{} weights for {count} successors", weights.len()));
            }
            if let Some(w) = weights.iter().find(|w| !w.is_positive() || **w > Q::one()) {
                return Err(format!("weight {} outside (0,1]", space::q_to_string(w)));
            }
            let total: Q = weights.iter().sum();
            if !total.is_one() {
                return Err(format!("weights sum to {}", space::q_to_string(&total)));
            }
            let mut combo = tree.space.zero();
            for (k, w) in weights.iter().enumerate() {
                combo = space::add(&combo, &space::scale(w, c.x(&s.child(Step::Index(k as u64)))));
            }
            if &combo != c.x(s) {
                return Err("label is not the weighted combination of its children".into());
            }
            for k in 0..count {
                let child = c.x(&s.child(Step::Index(k)));
                if tree.space.cmp_norm(&space::sub(c.x(s), child), &tree.delta).is_lt() {
                    return Err(format!("child {k} is closer than δ"));
                }
            }
            Ok(())
        }
        Successors::Fan { .. } => c.constant_fan(s, &node.successors.children()),
        Successors::Leaf | Successors::Cut => Ok(()),
        other => Err(format!("unexpected successor profile {other:?} in a bush")),
    })
}

/// Reads a passing dyadic tree as a bush with weights `(½, ½)`.
pub fn tree_as_bush(tree: &LabelledTree) -> Result<LabelledTree, TreeError> {
    let report = verify_dyadic(tree)?;
    if !report.passed {
        let f = report.failure.unwrap();
        return Err(TreeError::Unverified(format!("{}: {}", f.node, f.reason)));
    }
    let mut weights = BTreeMap::new();
    let mut nodes = BTreeMap::new();
    for (path, node) in &tree.shape.nodes {
        let successors = match node.successors {
            Successors::Binary => {
                weights.insert(path.clone(), vec![half(), half()]);
                Successors::Finite { count: 2 }
            }
            other => other,
        };
        nodes.insert(
            path.clone(),
            Node {
                height: node.height.clone(),
                successors,
            },
        );
    }
    Ok(LabelledTree {
        shape: TreeShape {
            kind: TreeKind::Bush,
            alpha: tree.shape.alpha.clone(),
            trunc: tree.shape.trunc,
            nodes,
        },
        space: tree.space,
        delta: tree.delta.clone(),
        radius: tree.radius.clone(),
        labels: tree.labels.clone(),
        weights: Some(weights),
    })
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// The normalized dyadic-indicator tree of the given depth in ℓ1 of
/// dimension `2^depth`: `x_s` is `2^|s| / 2^depth` on the dyadic block
/// addressed by `s` and zero elsewhere. Every label has ℓ1-norm one and the
/// tree is a 1-tree.
pub fn haar_tree(depth: u32) -> LabelledTree {
    assert!(depth <= 12, "haar_tree depth is capped at 12");
    let shape = build_shape(TreeKind::Dyadic, &Ordinal::nat(depth as u64), TruncationSpec::default())
        .expect("finite dyadic shape");
    martingale_tree(shape)
}

/// Labels any dyadic or sprawling shape with a ℓ1 dyadic martingale.
///
/// Labels are uniform densities of mass one on subcubes of `{0,1}^bits`
/// (coordinates indexed by the cube's points). A binary node halves its
/// subcube along a fresh coordinate; a sprawling pair node at pair-depth `ℓ`
/// splits along coordinate `ℓ·fan_width + n` for its `n`-th pair, so
/// distinct `(0,·)` children differ by exactly one in ℓ1. Fans copy their
/// parent. The result is a 1-tree (dyadic) or 1-sprawling tree with every
/// label of norm one.
pub fn martingale_tree(shape: TreeShape) -> LabelledTree {
    assert!(matches!(shape.kind, TreeKind::Dyadic | TreeKind::Sprawling));
    let splits_per_level = match shape.kind {
        TreeKind::Sprawling => shape.trunc.fan_width as u32,
        _ => 1,
    };
    let levels = max_split_depth(&shape, &NodePath::root());
    let bits = levels * splits_per_level;
    assert!(bits <= 16, "martingale tree needs 2^{bits} coordinates");
    let dim = 1usize << bits;
    let mut labels = BTreeMap::new();
    // (path, split level, fixed bits as (bit index, value))
    let mut stack = vec![(NodePath::root(), 0u32, Vec::<(u32, u8)>::new())];
    while let Some((path, level, fixed)) = stack.pop() {
        let density = q(1 << fixed.len(), dim as i64);
        let label: Vector = (0..dim)
            .map(|pt| {
                let inside = fixed.iter().all(|&(b, v)| ((pt >> b) & 1) as u8 == v);
                if inside {
                    density.clone()
                } else {
                    Q::zero()
                }
            })
            .collect();
        labels.insert(path.clone(), label);
        let node = &shape.nodes[&path];
        for step in node.successors.children() {
            let (next_level, next_fixed) = match (node.successors, step) {
                (Successors::Binary, Step::Index(v)) => {
                    let mut f = fixed.clone();
                    f.push((level, v as u8));
                    (level + 1, f)
                }
                (Successors::SprawlPairs { .. }, Step::Pair(v, n)) => {
                    let mut f = fixed.clone();
                    f.push((level * splits_per_level + n as u32, v));
                    (level + 1, f)
                }
                _ => (level, fixed.clone()),
            };
            stack.push((path.child(step), next_level, next_fixed));
        }
    }
    LabelledTree::new(shape, NormedSpace::new(dim, Norm::L1), Q::one(), labels)
}

fn max_split_depth(shape: &TreeShape, path: &NodePath) -> u32 {
    let node = &shape.nodes[path];
    let own = matches!(node.successors, Successors::Binary | Successors::SprawlPairs { .. }) as u32;
    node.successors
        .children()
        .into_iter()
        .map(|s| max_split_depth(shape, &path.child(s)))
        .max()
        .map_or(0, |d| d + own)
}

/// Applies the signed coordinate permutation `x ↦ (sign_i · x_{perm_i})_i`
/// to every label. These maps are isometries of ℓ1, ℓ2 and ℓ∞, so all
/// verifier verdicts are preserved.
pub fn permute_signs(tree: &LabelledTree, perm: &[usize], signs: &[bool]) -> LabelledTree {
    assert_eq!(perm.len(), tree.space.dim);
    assert_eq!(signs.len(), tree.space.dim);
    tree.map_labels(tree.space, tree.delta.clone(), |x| {
        perm.iter()
            .zip(signs)
            .map(|(&j, &neg)| if neg { -x[j].clone() } else { x[j].clone() })
            .collect()
    })
}

/// Moves a tree from the unit ball into the shell `½ ≤ ‖·‖ ≤ 1` of a space
/// with one extra coordinate, as the embedding constructions require.
///
/// ℓ∞: `x ↦ (x, 1)`, separation unchanged. ℓ1: `x ↦ (x/2, 1/2)`, separation
/// halved. ℓ2: `x ↦ (3x/5, 4/5)`, separation scaled by `3/5`. All three
/// maps are affine, so midpoints and fans are preserved.
pub fn lift_to_shell(tree: &LabelledTree) -> LabelledTree {
    let (factor, extra) = match tree.space.norm {
        Norm::LInf => (Q::one(), Q::one()),
        Norm::L1 => (half(), half()),
        Norm::L2 => (q(3, 5), q(4, 5)),
    };
    let space = NormedSpace::new(tree.space.dim + 1, tree.space.norm);
    let delta = &tree.delta * &factor;
    tree.map_labels(space, delta, |x| {
        let mut v = space::scale(&factor, x);
        v.push(extra.clone());
        v
    })
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelledTreeJson {
    pub kind: TreeKind,
    pub alpha: Ordinal,
    #[serde(default)]
    pub trunc: TruncationSpec,
    pub space: NormedSpace,
    #[serde(with = "space::serde_q")]
    pub delta: Q,
    #[serde(default, with = "space::serde_q::opt", skip_serializing_if = "Option::is_none")]
    pub radius: Option<Q>,
    pub labels: Vec<(NodePath, LabelJson)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<(NodePath, LabelJson)>>,
    /// Bush nodes with countably many successors (all other inner bush
    /// nodes have finitely many).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fans: Option<Vec<NodePath>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelJson(#[serde(with = "space::serde_q::vec")] pub Vec<Q>);

impl From<&LabelledTree> for LabelledTreeJson {
    fn from(t: &LabelledTree) -> Self {
        let fans: Vec<NodePath> = t
            .shape
            .nodes
            .iter()
            .filter(|(_, n)| matches!(n.successors, Successors::Fan { .. }))
            .map(|(p, _)| p.clone())
            .collect();
        LabelledTreeJson {
            kind: t.shape.kind,
            alpha: t.shape.alpha.clone(),
            trunc: t.shape.trunc,
            space: t.space,
            delta: t.delta.clone(),
            radius: (!t.radius.is_one()).then(|| t.radius.clone()),
            labels: t.labels.iter().map(|(p, v)| (p.clone(), LabelJson(v.clone()))).collect(),
            weights: t
                .weights
                .as_ref()
                .map(|w| w.iter().map(|(p, v)| (p.clone(), LabelJson(v.clone()))).collect()),
            fans: (t.shape.kind == TreeKind::Bush).then_some(fans),
        }
    }
}

impl TryFrom<LabelledTreeJson> for LabelledTree {
    type Error = TreeError;

    fn try_from(j: LabelledTreeJson) -> Result<Self, TreeError> {
        let labels: BTreeMap<NodePath, Vector> = j.labels.into_iter().map(|(p, v)| (p, v.0)).collect();
        let shape = match j.kind {
            TreeKind::Bush => bush_shape_from_paths(&j.alpha, j.trunc, labels.keys(), j.fans.as_deref())?,
            kind => build_shape(kind, &j.alpha, j.trunc)?,
        };
        Ok(LabelledTree {
            shape,
            space: j.space,
            delta: j.delta,
            radius: j.radius.unwrap_or_else(Q::one),
            labels,
            weights: j
                .weights
                .map(|w| w.into_iter().map(|(p, v)| (p, v.0)).collect()),
        })
    }
}

/// Recovers a bush shape from its labelled node set. Heights follow the
/// canonical enumeration at limit stages.
fn bush_shape_from_paths<'a>(
    alpha: &Ordinal,
    trunc: TruncationSpec,
    paths: impl Iterator<Item = &'a NodePath>,
    fans: Option<&[NodePath]>,
) -> Result<TreeShape, TreeError> {
    let paths: Vec<&NodePath> = paths.collect();
    let mut children: BTreeMap<NodePath, Vec<u64>> = BTreeMap::new();
    for p in &paths {
        for s in &p.0 {
            if !matches!(s, Step::Index(_)) {
                return Err(TreeError::Invalid(format!("bush node {p} uses a pair step")));
            }
        }
        children.entry((*p).clone()).or_default();
        if let Some((Step::Index(last), parent)) = p.0.split_last() {
            children.entry(NodePath(parent.to_vec())).or_default().push(*last);
        }
    }
    let fan_set: Vec<&NodePath> = fans.map(|f| f.iter().collect()).unwrap_or_default();
    let mut nodes = BTreeMap::new();
    let mut stack = vec![(NodePath::root(), alpha.clone())];
    if !children.contains_key(&NodePath::root()) {
        return Err(TreeError::MissingLabel(NodePath::root()));
    }
    while let Some((path, height)) = stack.pop() {
        let mut kids = children.get(&path).cloned().unwrap_or_default();
        kids.sort_unstable();
        let count = kids.len() as u64;
        if kids.iter().enumerate().any(|(i, &k)| i as u64 != k) {
            return Err(TreeError::Invalid(format!("children of {path} are not numbered 0..{count}")));
        }
        let is_fan = fan_set.contains(&&path);
        let successors = match (height.classify(), count, is_fan) {
            (OrdinalKind::Zero, 0, false) => Successors::Leaf,
            (OrdinalKind::Successor(_), c, false) if c > 0 => Successors::Finite { count: c },
            (OrdinalKind::Limit, c, true) if c > 0 => Successors::Fan { kept: c },
            _ => {
                return Err(TreeError::Invalid(format!(
                    "node {path} of height {height} has {count} children (fan: {is_fan})"
                )))
            }
        };
        for &k in &kids {
            let h = match height.classify() {
                OrdinalKind::Successor(beta) => beta,
                OrdinalKind::Limit => enumerate_below(&height, k).expect("limit"),
                OrdinalKind::Zero => unreachable!(),
            };
            stack.push((path.child(Step::Index(k)), h));
        }
        nodes.insert(path, Node { height, successors });
    }
    if nodes.len() != paths.len() {
        return Err(TreeError::Invalid("labelled nodes do not form a tree below the root".into()));
    }
    Ok(TreeShape {
        kind: TreeKind::Bush,
        alpha: alpha.clone(),
        trunc,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordinal::parse_ordinal;

    fn o(s: &str) -> Ordinal {
        parse_ordinal(s).unwrap()
    }

    fn tree1d(labels: &[(&[u64], i64)], delta: Q) -> LabelledTree {
        let shape = build_shape(TreeKind::Dyadic, &o("1"), TruncationSpec::default()).unwrap();
        let labels = labels
            .iter()
            .map(|(p, x)| (NodePath::from_indices(p), vec![qi(*x)]))
            .collect();
        LabelledTree::new(shape, NormedSpace::new(1, Norm::L1), delta, labels)
    }

    #[test]
    fn dyadic_shape_counts() {
        let t0 = build_shape(TreeKind::Dyadic, &o("0"), TruncationSpec::default()).unwrap();
        assert_eq!(t0.len(), 1);
        let t2 = build_shape(TreeKind::Dyadic, &o("2"), TruncationSpec::default()).unwrap();
        assert_eq!(t2.len(), 7);
        for n in 0..=6u32 {
            let t = build_shape(TreeKind::Dyadic, &Ordinal::nat(n as u64), TruncationSpec::default()).unwrap();
            assert_eq!(t.len(), (1usize << (n + 1)) - 1);
            assert!(t.is_prefix_closed());
        }
    }

    #[test]
    fn sprawling_shape_counts() {
        let s1 = build_shape(TreeKind::Sprawling, &o("1"), TruncationSpec::new(2, 3)).unwrap();
        let expected: Vec<NodePath> = vec![
            NodePath::root(),
            NodePath::from_pairs(&[(0, 0)]),
            NodePath::from_pairs(&[(0, 1)]),
            NodePath::from_pairs(&[(1, 0)]),
            NodePath::from_pairs(&[(1, 1)]),
        ];
        assert_eq!(s1.nodes.keys().cloned().collect::<Vec<_>>(), expected);
        for f in 2..6u64 {
            let s = build_shape(TreeKind::Sprawling, &o("1"), TruncationSpec::new(f, 3)).unwrap();
            assert_eq!(s.len() as u64, 1 + 2 * f);
        }
    }

    #[test]
    fn limit_shape_counts() {
        // root + kept summands T_{β_0}, T_{β_1}, ... with β_n = n for ω
        for width in 1..=6u64 {
            let t = build_shape(TreeKind::Dyadic, &o("w"), TruncationSpec::new(2, width)).unwrap();
            let expected: usize = 1 + (0..width).map(|n| (1usize << (n + 1)) - 1).sum::<usize>();
            assert_eq!(t.len(), expected);
            assert!(t.is_prefix_closed());
        }
        let t = build_shape(TreeKind::Dyadic, &o("w*2"), TruncationSpec::new(2, 3)).unwrap();
        // summands β_0 = 0, β_1 = ω, β_2 = 1
        let omega = build_shape(TreeKind::Dyadic, &o("w"), TruncationSpec::new(2, 3)).unwrap();
        assert_eq!(t.len(), 1 + 1 + omega.len() + 3);
    }

    #[test]
    fn budget_is_enforced() {
        let err = build_shape_capped(TreeKind::Dyadic, &o("10"), TruncationSpec::default(), 100).unwrap_err();
        assert_eq!(err, TreeError::BudgetExceeded(100));
        let trunc = TruncationSpec {
            depth_budget: Some(2),
            ..TruncationSpec::default()
        };
        let t = build_shape(TreeKind::Dyadic, &o("5"), trunc).unwrap();
        assert_eq!(t.len(), 7);
        assert!(t.is_truncated());
    }

    #[test]
    fn bad_truncation_rejected() {
        assert!(build_shape(TreeKind::Dyadic, &o("1"), TruncationSpec::new(1, 3)).is_err());
        assert!(build_shape(TreeKind::Dyadic, &o("1"), TruncationSpec::new(2, 0)).is_err());
    }

    #[test]
    fn verify_dyadic_examples() {
        let ok = tree1d(&[(&[], 0), (&[0], -1), (&[1], 1)], qi(1));
        assert!(verify_dyadic(&ok).unwrap().passed);
        // midpoint fails first, ball check on the root passes
        let bad = tree1d(&[(&[], 0), (&[0], -1), (&[1], 2)], qi(1));
        let report = verify_dyadic(&bad).unwrap();
        assert!(!report.passed);
        // root x=0 is fine, so the witness is a child or the root midpoint
        let fixed_mid = tree1d(&[(&[], 1), (&[0], 0), (&[1], 2)], q(1, 2));
        let report = verify_dyadic(&fixed_mid).unwrap();
        assert!(!report.passed);
        assert_eq!(report.failure.unwrap().node, NodePath::from_indices(&[1]));
    }

    #[test]
    fn verify_dyadic_reports_ball_violation_at_child() {
        let t = tree1d(&[(&[], 0), (&[0], -1), (&[1], 2)], qi(1));
        let r = verify_dyadic(&t).unwrap();
        assert!(!r.passed);
        let reason = r.failure.unwrap().reason;
        assert!(reason.contains("midpoint") || reason.contains("ball"), "{reason}");
    }

    #[test]
    fn verify_dyadic_separation() {
        let t = tree1d(&[(&[], 0), (&[0], -1), (&[1], 1)], q(3, 2));
        let r = verify_dyadic(&t).unwrap();
        assert!(!r.passed);
        assert!(r.failure.unwrap().reason.contains("2δ"));
    }

    #[test]
    fn haar_trees() {
        let t1 = haar_tree(1);
        assert_eq!(t1.root(), &vec![q(1, 2), q(1, 2)]);
        assert_eq!(t1.labels[&NodePath::from_indices(&[0])], vec![qi(1), qi(0)]);
        assert_eq!(t1.labels[&NodePath::from_indices(&[1])], vec![qi(0), qi(1)]);
        let t0 = haar_tree(0);
        assert_eq!(t0.labels.len(), 1);
        assert_eq!(t0.root(), &vec![qi(1)]);
        for d in 0..=8 {
            let t = haar_tree(d);
            assert!(verify_dyadic(&t).unwrap().passed, "depth {d}");
            for v in t.labels.values() {
                assert_eq!(t.space.norm_pow(v), qi(1));
            }
        }
        assert_eq!(haar_tree(2).labels.len(), 7);
    }

    fn spider() -> LabelledTree {
        let shape = build_shape(TreeKind::Sprawling, &o("1"), TruncationSpec::new(2, 3)).unwrap();
        let mut labels = BTreeMap::new();
        labels.insert(NodePath::root(), vec![qi(0), qi(0)]);
        labels.insert(NodePath::from_pairs(&[(0, 0)]), vec![qi(1), qi(0)]);
        labels.insert(NodePath::from_pairs(&[(1, 0)]), vec![qi(-1), qi(0)]);
        labels.insert(NodePath::from_pairs(&[(0, 1)]), vec![qi(0), qi(1)]);
        labels.insert(NodePath::from_pairs(&[(1, 1)]), vec![qi(0), qi(-1)]);
        LabelledTree::new(shape, NormedSpace::new(2, Norm::LInf), qi(1), labels)
    }

    #[test]
    fn verify_sprawling_examples() {
        let t = spider();
        let r = verify_sprawling(&t).unwrap();
        assert!(r.passed);
        assert!(r.truncated);

        let mut collide = spider();
        collide.labels.insert(NodePath::from_pairs(&[(0, 1)]), vec![qi(1), qi(0)]);
        collide.labels.insert(NodePath::from_pairs(&[(1, 1)]), vec![qi(-1), qi(0)]);
        assert!(!verify_sprawling(&collide).unwrap().passed);

        let shape = build_shape(TreeKind::Sprawling, &o("0"), TruncationSpec::default()).unwrap();
        let single = LabelledTree::new(
            shape,
            NormedSpace::new(2, Norm::L2),
            qi(1),
            [(NodePath::root(), vec![q(1, 2), q(1, 2)])].into_iter().collect(),
        );
        assert!(verify_sprawling(&single).unwrap().passed);
    }

    #[test]
    fn sprawling_derived_half_separation() {
        let t = martingale_tree(build_shape(TreeKind::Sprawling, &o("1"), TruncationSpec::new(4, 3)).unwrap());
        assert!(verify_sprawling(&t).unwrap().passed);
        let half_delta = &t.delta * half();
        for n in 0..4 {
            for m in 0..4 {
                if n == m {
                    continue;
                }
                let mix = space::midpoint(
                    &t.labels[&NodePath::from_pairs(&[(0, n)])],
                    &t.labels[&NodePath::from_pairs(&[(1, m)])],
                );
                assert!(t.space.cmp_norm(&space::sub(t.root(), &mix), &half_delta).is_ge());
            }
        }
    }

    #[test]
    fn wrong_kind_is_an_error() {
        assert!(matches!(verify_sprawling(&haar_tree(1)), Err(TreeError::KindMismatch { .. })));
        let mut t = haar_tree(1);
        t.labels.remove(&NodePath::from_indices(&[1]));
        assert!(matches!(verify_dyadic(&t), Err(TreeError::MissingLabel(_))));
    }

    fn bush_1d(weights: Vec<Q>) -> LabelledTree {
        let shape = TreeShape {
            kind: TreeKind::Bush,
            alpha: o("1"),
            trunc: TruncationSpec::default(),
            nodes: [
                (NodePath::root(), Node { height: o("1"), successors: Successors::Finite { count: 2 } }),
                (NodePath::from_indices(&[0]), Node { height: o("0"), successors: Successors::Leaf }),
                (NodePath::from_indices(&[1]), Node { height: o("0"), successors: Successors::Leaf }),
            ]
            .into_iter()
            .collect(),
        };
        let mut t = LabelledTree::new(
            shape,
            NormedSpace::new(1, Norm::L1),
            qi(1),
            [
                (NodePath::root(), vec![qi(0)]),
                (NodePath::from_indices(&[0]), vec![qi(-2)]),
                (NodePath::from_indices(&[1]), vec![qi(1)]),
            ]
            .into_iter()
            .collect(),
        );
        t.radius = qi(2);
        t.weights = Some([(NodePath::root(), weights)].into_iter().collect());
        t
    }

    #[test]
    fn verify_bush_examples() {
        assert!(verify_bush(&bush_1d(vec![q(1, 3), q(2, 3)])).unwrap().passed);
        let r = verify_bush(&bush_1d(vec![q(3, 10), q(6, 10)])).unwrap();
        assert!(!r.passed);
        let mut no_weights = bush_1d(vec![]);
        no_weights.weights = None;
        assert!(matches!(verify_bush(&no_weights), Err(TreeError::MissingWeights(_))));
        let mut small_ball = bush_1d(vec![q(1, 3), q(2, 3)]);
        small_ball.radius = qi(1);
        assert!(!verify_bush(&small_ball).unwrap().passed);
    }

    #[test]
    fn dyadic_trees_are_bushes() {
        for d in 0..=5 {
            let t = haar_tree(d);
            let b = tree_as_bush(&t).unwrap();
            assert_eq!(b.delta, t.delta);
            assert!(verify_bush(&b).unwrap().passed);
        }
        let omega = martingale_tree(build_shape(TreeKind::Dyadic, &o("w+1"), TruncationSpec::new(2, 3)).unwrap());
        assert!(verify_dyadic(&omega).unwrap().passed);
        assert!(verify_bush(&tree_as_bush(&omega).unwrap()).unwrap().passed);
        let bad = tree1d(&[(&[], 0), (&[0], -1), (&[1], 2)], qi(1));
        assert!(matches!(tree_as_bush(&bad), Err(TreeError::Unverified(_))));
    }

    #[test]
    fn lifting_reaches_the_shell() {
        for t in [haar_tree(3), spider().map_labels(NormedSpace::new(2, Norm::L2), qi(1), |x| x.clone())] {
            let lifted = lift_to_shell(&t);
            for v in lifted.labels.values() {
                let p = lifted.space.norm_pow(v);
                assert!(p >= lifted.space.raise(&half()) && p <= qi(1));
            }
        }
        let lifted = lift_to_shell(&spider());
        assert_eq!(lifted.delta, qi(1));
        assert!(verify_sprawling(&lifted).unwrap().passed);
    }

    #[test]
    fn json_round_trip() {
        for t in [haar_tree(2), spider(), bush_1d(vec![q(1, 3), q(2, 3)])] {
            let json = serde_json::to_string(&LabelledTreeJson::from(&t)).unwrap();
            let back: LabelledTreeJson = serde_json::from_str(&json).unwrap();
            let back = LabelledTree::try_from(back).unwrap();
            assert_eq!(back, t);
        }
    }
}

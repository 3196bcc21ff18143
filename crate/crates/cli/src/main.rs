//! `diamonds`: command-line front end for ordinal diamonds, trees, their
//! embeddings, the ℓ1 cut oracle and planar peeling.
//!
//! Exit codes: 0 success, 1 verification failure (the report is still
//! written), 2 usage or input error, 3 budget exceeded.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use ordinal_diamonds::diamond::{self, vertex_dist, Branching, DiamondError, DiamondSpec, Vertex};
use ordinal_diamonds::dinfty::{dinf_dist, psi, DInfCode};
use ordinal_diamonds::embed::{
    self, check_distortion, extract_dyadic_tree, extract_sprawling_tree, Construction, EmbedError,
    EmbeddingDescriptor, PointMap,
};
use ordinal_diamonds::l1opt::{self, min_distortion_l1, verify_cut_sandwich, CertificateJson, FiniteMetric, L1Error};
use ordinal_diamonds::ordinal::{enumerate_below, parse_ordinal, Ordinal, OrdinalKind};
use ordinal_diamonds::peel::{peel_index, PointSet2D};
use ordinal_diamonds::space::{parse_q, q_to_string, Norm, Q};
use ordinal_diamonds::trees::{
    self, build_shape, haar_tree, martingale_tree, LabelledTree, LabelledTreeJson, TreeError, TreeKind,
    TruncationSpec,
};

#[derive(Parser)]
#[command(name = "diamonds", version, about = "Ordinal diamond graphs, trees and embeddings")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Human)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
    Dot,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an ordinal and show its classification and enumeration.
    Ordinal {
        expr: String,
        /// Print the first N elements of the canonical enumeration below a limit.
        #[arg(long, default_value_t = 0)]
        enumerate: u64,
    },
    #[command(subcommand)]
    Tree(TreeCmd),
    #[command(subcommand)]
    Diamond(DiamondCmd),
    #[command(subcommand)]
    Dinfty(DinftyCmd),
    #[command(subcommand)]
    Embed(EmbedCmd),
    #[command(subcommand)]
    L1(L1Cmd),
    /// Peel a planar point set by small open half-plane slices.
    Peel {
        #[arg(long, value_parser = rational)]
        eps: Q,
        #[arg(long)]
        input: PathBuf,
        /// Diameter norm (overrides the file).
        #[arg(long, value_parser = norm)]
        norm: Option<Norm>,
    },
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Args, Clone)]
struct Window {
    /// Members kept per countable fan.
    #[arg(long, default_value_t = 3)]
    fan_width: u64,
    /// Summands kept per limit stage.
    #[arg(long, default_value_t = 3)]
    limit_width: u64,
}

impl Window {
    fn trunc(&self) -> TruncationSpec {
        TruncationSpec::new(self.fan_width, self.limit_width)
    }
}

#[derive(Args, Clone)]
struct DiamondArgs {
    #[arg(long, value_parser = ordinal)]
    alpha: Ordinal,
    /// Finite branching b ≥ 2, or `w` for countable branching.
    #[arg(long, value_parser = branching, default_value = "2")]
    branching: Branching,
    #[command(flatten)]
    window: Window,
}

impl DiamondArgs {
    fn spec(&self) -> Result<DiamondSpec, CliError> {
        Ok(DiamondSpec::new(self.alpha.clone(), self.branching, self.window.trunc())?)
    }
}

#[derive(Subcommand)]
enum TreeCmd {
    /// Build a martingale-labelled tree (ℓ1, norms one, separation one).
    Build {
        #[arg(long, value_enum)]
        kind: BuildKind,
        #[arg(long, value_parser = ordinal, default_value = "2")]
        alpha: Ordinal,
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a labelled tree read from JSON against its declared kind.
    Verify {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BuildKind {
    Dyadic,
    Sprawling,
    Bush,
}

#[derive(Subcommand)]
enum DiamondCmd {
    /// Exact distance between two addresses.
    Dist {
        #[command(flatten)]
        d: DiamondArgs,
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
    },
    /// Materialize the window and print its size.
    Materialize {
        #[command(flatten)]
        d: DiamondArgs,
        #[arg(long, default_value_t = diamond::DEFAULT_VERTEX_CAP)]
        cap: u64,
    },
    /// List the active pairs of the window with their distances.
    ActivePairs {
        #[command(flatten)]
        d: DiamondArgs,
    },
    /// Export the materialized window as DOT or JSON.
    Export {
        #[command(flatten)]
        d: DiamondArgs,
        #[arg(long, default_value_t = diamond::DEFAULT_VERTEX_CAP)]
        cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DinftyCmd {
    /// Image of a vertex of D_α^ω in the limit diamond.
    Psi {
        #[arg(long, value_parser = ordinal)]
        alpha: Ordinal,
        #[arg(long)]
        vertex: String,
    },
    /// Distance between two codes such as `A=[0,1];r=3/8`.
    Dist {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Check that psi preserves distances on sampled (or all) pairs.
    PsiCheck {
        #[arg(long, value_parser = ordinal)]
        alpha: Ordinal,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        exhaustive: bool,
        #[command(flatten)]
        window: Window,
    },
}

#[derive(Subcommand)]
enum EmbedCmd {
    /// Turn a labelled tree into an embedding descriptor.
    Build {
        #[arg(long)]
        tree: PathBuf,
        /// Lift the labels into the norm shell first (and cap δ at ½ for dyadic trees).
        #[arg(long)]
        prepare: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract a labelled tree from an embedding.
    Extract {
        #[arg(long)]
        embedding: PathBuf,
        /// Lower distortion constant A of the embedding.
        #[arg(long, value_parser = rational)]
        a: Q,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check A·d ≤ ‖Δf‖ ≤ B·d on all active pairs of the window.
    Check {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long, value_parser = rational)]
        lower: Q,
        #[arg(long, value_parser = rational, default_value = "1")]
        upper: Q,
    },
}

#[derive(Subcommand)]
enum L1Cmd {
    /// Minimum ℓ1 distortion of a finite metric with an exact cut certificate.
    MinDistortion {
        #[command(flatten)]
        source: MetricSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a cut certificate against a metric.
    Certify {
        #[command(flatten)]
        source: MetricSource,
        #[arg(long)]
        certificate: PathBuf,
    },
}

#[derive(Args)]
struct MetricSource {
    /// Metric as JSON ({labels, d}) or CSV (labels on the first line).
    #[arg(long, conflicts_with = "alpha")]
    metric: Option<PathBuf>,
    /// Use the materialized diamond window instead of a file.
    #[arg(long, value_parser = ordinal)]
    alpha: Option<Ordinal>,
    #[arg(long, value_parser = branching, default_value = "2")]
    branching: Branching,
    #[command(flatten)]
    window: Window,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Compare recursive distances with Dijkstra on every materialized pair.
    Oracle {
        #[command(flatten)]
        d: DiamondArgs,
    },
    /// Run the built-in battery of exact checks.
    All {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2_000)]
        pairs: usize,
    },
}

// ---------------------------------------------------------------------------
// Errors and output
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    Usage(String),
    Budget(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Budget(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<DiamondError> for CliError {
    fn from(e: DiamondError) -> Self {
        match e {
            DiamondError::CapExceeded { .. } => CliError::Budget(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::BudgetExceeded(_) => CliError::Budget(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Diamond(d) => d.into(),
            EmbedError::Tree(t) => t.into(),
            EmbedError::BranchTestFailed { .. } => CliError::Failed(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<L1Error> for CliError {
    fn from(e: L1Error) -> Self {
        match e {
            L1Error::TooManyPoints(_) => CliError::Budget(e.to_string()),
            L1Error::Diamond(d) => d.into(),
            e => CliError::Usage(e.to_string()),
        }
    }
}

fn ordinal(s: &str) -> Result<Ordinal, String> {
    parse_ordinal(s).map_err(|e| e.to_string())
}

fn branching(s: &str) -> Result<Branching, String> {
    s.parse()
}

fn rational(s: &str) -> Result<Q, String> {
    parse_q(s)
}

fn norm(s: &str) -> Result<Norm, String> {
    s.parse()
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Prints a report in the requested format.
fn emit(format: Format, human: impl FnOnce() -> String, report: &Value) {
    match format {
        Format::Json => print!("{}", to_json(report)),
        _ => println!("{}", human()),
    }
}

fn verdict(passed: bool, what: &str) -> Result<(), CliError> {
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{what} failed")))
    }
}

struct Sampler(ChaCha8Rng);

impl Sampler {
    fn new(seed: u64) -> Self {
        Sampler(ChaCha8Rng::seed_from_u64(seed))
    }

    fn pick(&mut self) -> impl FnMut(u64) -> u64 + '_ {
        |n| self.0.gen_range(0..n)
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<(), CliError> {
    let fmt = cli.format;
    match cli.command {
        Command::Ordinal { expr, enumerate } => cmd_ordinal(fmt, &expr, enumerate),
        Command::Tree(c) => cmd_tree(fmt, c),
        Command::Diamond(c) => cmd_diamond(fmt, c),
        Command::Dinfty(c) => cmd_dinfty(fmt, c),
        Command::Embed(c) => cmd_embed(fmt, c),
        Command::L1(c) => cmd_l1(fmt, c),
        Command::Peel { eps, input, norm } => cmd_peel(fmt, &eps, &input, norm),
        Command::Verify(c) => cmd_verify(fmt, c),
    }
}

fn cmd_ordinal(fmt: Format, expr: &str, count: u64) -> Result<(), CliError> {
    let alpha = parse_ordinal(expr).map_err(|e| CliError::Usage(e.to_string()))?;
    let kind = match alpha.classify() {
        OrdinalKind::Zero => "zero".to_string(),
        OrdinalKind::Successor(p) => format!("successor of {p}"),
        OrdinalKind::Limit => "limit".to_string(),
    };
    let below: Vec<String> = if alpha.is_limit() {
        (0..count)
            .map(|n| enumerate_below(&alpha, n).expect("limit").to_string())
            .collect()
    } else {
        Vec::new()
    };
    let report = json!({ "ordinal": alpha.to_string(), "kind": kind, "enumeration": below });
    emit(
        fmt,
        || {
            let mut s = format!("{alpha}: {kind}");
            for (n, b) in below.iter().enumerate() {
                s += &format!("\n  β_{n} = {b}");
            }
            s
        },
        &report,
    );
    Ok(())
}

fn cmd_tree(fmt: Format, c: TreeCmd) -> Result<(), CliError> {
    match c {
        TreeCmd::Build { kind, alpha, window, out } => {
            let trunc = window.trunc();
            let tree = match kind {
                BuildKind::Dyadic => {
                    if let Some(d) = alpha.as_nat().filter(|&d| d <= 12) {
                        haar_tree(d as u32)
                    } else {
                        martingale_tree(build_shape(TreeKind::Dyadic, &alpha, trunc)?)
                    }
                }
                BuildKind::Sprawling => martingale_tree(build_shape(TreeKind::Sprawling, &alpha, trunc)?),
                BuildKind::Bush => {
                    trees::tree_as_bush(&martingale_tree(build_shape(TreeKind::Dyadic, &alpha, trunc)?))?
                }
            };
            write_or_print(out.as_deref(), &to_json(&LabelledTreeJson::from(&tree)))
        }
        TreeCmd::Verify { input } => {
            let tree = LabelledTree::try_from(read_json::<LabelledTreeJson>(&input)?)?;
            let report = match tree.shape.kind {
                TreeKind::Dyadic => trees::verify_dyadic(&tree)?,
                TreeKind::Sprawling => trees::verify_sprawling(&tree)?,
                TreeKind::Bush => trees::verify_bush(&tree)?,
            };
            emit(
                fmt,
                || match &report.failure {
                    None => format!(
                        "pass: {} nodes checked{}",
                        report.nodes_checked,
                        if report.truncated { " (window of an infinite tree)" } else { "" }
                    ),
                    Some(f) => format!("FAIL at node {}: {}", f.node, f.reason),
                },
                &serde_json::to_value(&report).unwrap(),
            );
            verdict(report.passed, "tree verification")
        }
    }
}

fn cmd_diamond(fmt: Format, c: DiamondCmd) -> Result<(), CliError> {
    match c {
        DiamondCmd::Dist { d, u, v } => {
            let spec = d.spec()?;
            let (u, v): (Vertex, Vertex) = (u.parse()?, v.parse()?);
            let dist = spec.dist(&u, &v)?;
            let report = json!({ "u": u, "v": v, "dist": dist });
            emit(fmt, || format!("d({u}, {v}) = {dist}"), &report);
            Ok(())
        }
        DiamondCmd::Materialize { d, cap } => {
            let m = d.spec()?.materialize_capped(cap)?;
            let report = json!({ "vertices": m.vertices.len(), "edges": m.edges.len() });
            emit(fmt, || format!("{} vertices, {} edges", m.vertices.len(), m.edges.len()), &report);
            Ok(())
        }
        DiamondCmd::ActivePairs { d } => {
            let pairs = d.spec()?.active_pairs();
            match fmt {
                Format::Csv => {
                    println!("u,v,dist,depth");
                    for p in &pairs {
                        println!("{},{},{},{}", p.u, p.v, vertex_dist(&p.u, &p.v), p.depth);
                    }
                }
                _ => {
                    let rows: Vec<Value> = pairs
                        .iter()
                        .map(|p| json!({ "u": p.u, "v": p.v, "dist": vertex_dist(&p.u, &p.v), "depth": p.depth }))
                        .collect();
                    emit(
                        fmt,
                        || {
                            let mut s = format!("{} active pairs", pairs.len());
                            for p in &pairs {
                                s += &format!("\n  {} {}  d = {}", p.u, p.v, vertex_dist(&p.u, &p.v));
                            }
                            s
                        },
                        &json!({ "count": pairs.len(), "pairs": rows }),
                    );
                }
            }
            Ok(())
        }
        DiamondCmd::Export { d, cap, out } => {
            let m = d.spec()?.materialize_capped(cap)?;
            let text = match fmt {
                Format::Json => to_json(&m.to_json()),
                Format::Dot | Format::Human => m.to_dot(),
                Format::Csv => {
                    let mut s = String::from("u,v,weight\n");
                    for &(a, b, w) in &m.edges {
                        s += &format!("{},{},{}\n", m.vertices[a], m.vertices[b], w.pow2_string());
                    }
                    s
                }
            };
            write_or_print(out.as_deref(), &text)
        }
    }
}

#[derive(Serialize)]
struct IsometryReport {
    alpha: String,
    pairs: usize,
    exhaustive: bool,
    mismatches: usize,
    poles_preserved: bool,
    first_mismatch: Option<(String, String, String, String)>,
}

fn psi_check(alpha: &Ordinal, trunc: TruncationSpec, pairs: usize, seed: u64, exhaustive: bool) -> Result<IsometryReport, CliError> {
    let spec = DiamondSpec::new(alpha.clone(), Branching::Omega, trunc)?;
    let poles_preserved = psi(alpha, &Vertex::Top).map_err(|e| CliError::Usage(e.to_string()))? == DInfCode::top()
        && psi(alpha, &Vertex::Bottom).map_err(|e| CliError::Usage(e.to_string()))? == DInfCode::bottom();
    let sample: Vec<(Vertex, Vertex)> = if exhaustive {
        let m = spec.materialize()?;
        m.vertices
            .iter()
            .flat_map(|u| m.vertices.iter().map(move |v| (u.clone(), v.clone())))
            .collect()
    } else {
        let mut s = Sampler::new(seed);
        let mut pick = s.pick();
        (0..pairs)
            .map(|_| (Vertex::sample(&spec, &mut pick), Vertex::sample(&spec, &mut pick)))
            .collect()
    };
    let mut mismatches = 0;
    let mut first = None;
    for (u, v) in &sample {
        let (pu, pv) = (
            psi(alpha, u).map_err(|e| CliError::Usage(e.to_string()))?,
            psi(alpha, v).map_err(|e| CliError::Usage(e.to_string()))?,
        );
        let (lhs, rhs) = (dinf_dist(&pu, &pv), vertex_dist(u, v));
        if lhs != rhs {
            mismatches += 1;
            first.get_or_insert((u.to_string(), v.to_string(), lhs.to_string(), rhs.to_string()));
        }
    }
    Ok(IsometryReport {
        alpha: alpha.to_string(),
        pairs: sample.len(),
        exhaustive,
        mismatches,
        poles_preserved,
        first_mismatch: first,
    })
}

fn cmd_dinfty(fmt: Format, c: DinftyCmd) -> Result<(), CliError> {
    match c {
        DinftyCmd::Psi { alpha, vertex } => {
            let spec = DiamondSpec::new(alpha.clone(), Branching::Omega, TruncationSpec::default())?;
            let v = spec.normalize(&vertex.parse()?)?;
            let code = psi(&alpha, &v).map_err(|e| CliError::Usage(e.to_string()))?;
            emit(fmt, || code.to_string(), &json!({ "vertex": v, "code": code }));
            Ok(())
        }
        DinftyCmd::Dist { x, y } => {
            let parse = |s: &str| s.parse::<DInfCode>().map_err(|e| CliError::Usage(e.to_string()));
            let (x, y) = (parse(&x)?, parse(&y)?);
            let d = dinf_dist(&x, &y);
            emit(fmt, || format!("d({x}, {y}) = {d}"), &json!({ "x": x, "y": y, "dist": d }));
            Ok(())
        }
        DinftyCmd::PsiCheck { alpha, pairs, seed, exhaustive, window } => {
            let r = psi_check(&alpha, window.trunc(), pairs, seed, exhaustive)?;
            emit(
                fmt,
                || {
                    format!(
                        "alpha {}: {} pairs, mismatches: {}, poles preserved: {}",
                        r.alpha, r.pairs, r.mismatches, r.poles_preserved
                    )
                },
                &serde_json::to_value(&r).unwrap(),
            );
            verdict(r.mismatches == 0 && r.poles_preserved, "isometry check")
        }
    }
}

fn load_map(path: &Path) -> Result<Box<dyn PointMap>, CliError> {
    Ok(read_json::<EmbeddingDescriptor>(path)?.instantiate()?)
}

fn cmd_embed(fmt: Format, c: EmbedCmd) -> Result<(), CliError> {
    match c {
        EmbedCmd::Build { tree, prepare, out } => {
            let mut t = LabelledTree::try_from(read_json::<LabelledTreeJson>(&tree)?)?;
            if prepare {
                t = embed::prepare_tree(&t);
            }
            let construction = match t.shape.kind {
                TreeKind::Dyadic => Construction::Dyadic,
                TreeKind::Sprawling => Construction::Sprawling,
                TreeKind::Bush => return Err(CliError::Usage("bushes have no embedding construction".into())),
            };
            // instantiating validates the preconditions
            let descriptor = EmbeddingDescriptor::of_tree(construction, &t);
            descriptor.clone().instantiate()?;
            write_or_print(out.as_deref(), &to_json(&descriptor))
        }
        EmbedCmd::Extract { embedding, a, out } => {
            let f = load_map(&embedding)?;
            let tree = if f.spec().branching == Branching::Omega {
                extract_sprawling_tree(f.as_ref(), &a, f.spec().trunc)?
            } else {
                extract_dyadic_tree(f.as_ref(), &a)?
            };
            write_or_print(out.as_deref(), &to_json(&LabelledTreeJson::from(&tree)))
        }
        EmbedCmd::Check { embedding, lower, upper } => {
            let f = load_map(&embedding)?;
            let r = check_distortion(f.as_ref(), &lower, &upper)?;
            emit(
                fmt,
                || {
                    let power = if r.ratio_power == 2 { " (squared ratios)" } else { "" };
                    format!(
                        "{}: {} active pairs, ratio range [{}, {}]{}; minimum at {} {}, maximum at {} {}",
                        if r.passed { "pass" } else { "FAIL" },
                        r.pairs,
                        q_to_string(&r.min_ratio),
                        q_to_string(&r.max_ratio),
                        power,
                        r.witnesses[0].u,
                        r.witnesses[0].v,
                        r.witnesses[1].u,
                        r.witnesses[1].v
                    )
                },
                &serde_json::to_value(&r).unwrap(),
            );
            verdict(r.passed, "distortion check")
        }
    }
}

fn load_metric(source: &MetricSource) -> Result<FiniteMetric, CliError> {
    match (&source.metric, &source.alpha) {
        (Some(path), _) => {
            let text = read(path)?;
            if text.trim_start().starts_with('{') {
                let raw: FiniteMetric =
                    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                Ok(FiniteMetric::new(raw.labels, raw.d)?)
            } else {
                Ok(FiniteMetric::from_csv(&text)?)
            }
        }
        (None, Some(alpha)) => {
            let spec = DiamondSpec::new(alpha.clone(), source.branching, source.window.trunc())?;
            Ok(FiniteMetric::from_diamond(&spec)?)
        }
        (None, None) => Err(CliError::Usage("give --metric or --alpha".into())),
    }
}

fn cmd_l1(fmt: Format, c: L1Cmd) -> Result<(), CliError> {
    match c {
        L1Cmd::MinDistortion { source, out } => {
            let m = load_metric(&source)?;
            let r = min_distortion_l1(&m)?;
            let check = verify_cut_sandwich(&m, &r.cuts, &r.c);
            let cert = CertificateJson::new(&m, &r.c, &r.cuts);
            if let Some(p) = &out {
                write_or_print(Some(p), &to_json(&cert))?;
            }
            let report = json!({
                "points": m.len(),
                "c": q_to_string(&r.c),
                "status": r.status,
                "certified": check.passed,
                "certificate": cert,
            });
            emit(
                fmt,
                || {
                    format!(
                        "{} points: minimum distortion {} (≈ {:.6}), {:?}, certificate {}",
                        m.len(),
                        q_to_string(&r.c),
                        ordinal_diamonds::space::q_to_f64(&r.c),
                        r.status,
                        if check.passed { "verified" } else { "REJECTED" }
                    )
                },
                &report,
            );
            verdict(check.passed, "certificate check")
        }
        L1Cmd::Certify { source, certificate } => {
            let m = load_metric(&source)?;
            let cert: CertificateJson = read_json(&certificate)?;
            let cuts = cert.to_cuts(&m)?;
            let r = verify_cut_sandwich(&m, &cuts, &cert.c);
            emit(
                fmt,
                || match &r.witness {
                    None => format!("pass: {} pairs within [d, {}·d]", r.pairs, q_to_string(&cert.c)),
                    Some((a, b, side)) => format!("FAIL at pair {a} {b}: {side}"),
                },
                &serde_json::to_value(&r).unwrap(),
            );
            verdict(r.passed, "certificate check")
        }
    }
}

#[derive(serde::Deserialize)]
struct PointsJson {
    #[serde(default)]
    norm: Option<Norm>,
    points: Vec<[String; 2]>,
}

fn cmd_peel(fmt: Format, eps: &Q, input: &Path, norm: Option<Norm>) -> Result<(), CliError> {
    let raw: PointsJson = read_json(input)?;
    let points = raw
        .points
        .iter()
        .map(|[x, y]| Ok((parse_q(x)?, parse_q(y)?)))
        .collect::<Result<Vec<_>, String>>()
        .map_err(CliError::Usage)?;
    let set = PointSet2D::new(points, norm.or(raw.norm).unwrap_or(Norm::L2)).map_err(|e| CliError::Usage(e.to_string()))?;
    let r = peel_index(&set, eps).map_err(|e| CliError::Usage(e.to_string()))?;
    emit(
        fmt,
        || {
            let mut s = match r.index {
                Some(i) => format!("index {i} at ε = {}", q_to_string(eps)),
                None => "stationary nonempty stage".to_string(),
            };
            for (k, st) in r.stages.iter().enumerate() {
                let pts: Vec<String> = st.iter().map(|[x, y]| format!("({x},{y})")).collect();
                s += &format!("\n  stage {k}: {}", pts.join(" "));
            }
            s
        },
        &serde_json::to_value(&r).unwrap(),
    );
    verdict(r.index.is_some(), "peeling")
}

#[derive(Serialize)]
struct OracleReport {
    alpha: String,
    branching: String,
    vertices: usize,
    pairs: usize,
    mismatches: usize,
    first_mismatch: Option<(String, String)>,
}

fn oracle_check(spec: &DiamondSpec) -> Result<OracleReport, CliError> {
    let m = spec.materialize()?;
    let all = m.oracle_all_pairs();
    let mut mismatches = 0;
    let mut first = None;
    for (i, u) in m.vertices.iter().enumerate() {
        for (j, v) in m.vertices.iter().enumerate() {
            if all[i][j].as_ref() != Some(&vertex_dist(u, v).to_q()) {
                mismatches += 1;
                first.get_or_insert((u.to_string(), v.to_string()));
            }
        }
    }
    Ok(OracleReport {
        alpha: spec.alpha.to_string(),
        branching: spec.branching.to_string(),
        vertices: m.vertices.len(),
        pairs: m.vertices.len() * m.vertices.len(),
        mismatches,
        first_mismatch: first,
    })
}

fn cmd_verify(fmt: Format, c: VerifyCmd) -> Result<(), CliError> {
    match c {
        VerifyCmd::Oracle { d } => {
            let r = oracle_check(&d.spec()?)?;
            emit(
                fmt,
                || format!("pairs: all, mismatches: {}\nvertices: {}, ordered pairs: {}", r.mismatches, r.vertices, r.pairs),
                &serde_json::to_value(&r).unwrap(),
            );
            verdict(r.mismatches == 0, "oracle comparison")
        }
        VerifyCmd::All { seed, pairs } => {
            let checks = run_battery(seed, pairs)?;
            let all_ok = checks.iter().all(|(_, ok)| *ok);
            let report: Vec<Value> = checks.iter().map(|(n, ok)| json!({ "check": n, "passed": ok })).collect();
            emit(
                fmt,
                || {
                    checks
                        .iter()
                        .map(|(n, ok)| format!("{} {n}", if *ok { "PASS" } else { "FAIL" }))
                        .collect::<Vec<_>>()
                        .join("\n")
                },
                &json!({ "checks": report, "passed": all_ok }),
            );
            verdict(all_ok, "verification battery")
        }
    }
}

fn run_battery(seed: u64, pairs: usize) -> Result<Vec<(String, bool)>, CliError> {
    let mut out = Vec::new();
    let trunc = TruncationSpec::new(3, 3);
    for (a, b) in [("2", Branching::Finite(2)), ("3", Branching::Finite(3)), ("w+1", Branching::Finite(3))] {
        let spec = DiamondSpec::new(ordinal(a).unwrap(), b, trunc)?;
        let r = oracle_check(&spec)?;
        out.push((format!("distance oracle alpha={a} b={b}"), r.mismatches == 0));
    }
    for a in ["3", "w*2", "w^2"] {
        let r = psi_check(&ordinal(a).unwrap(), trunc, pairs, seed, false)?;
        out.push((format!("psi isometry alpha={a}"), r.mismatches == 0 && r.poles_preserved));
    }
    for depth in [2u32, 4] {
        let t = haar_tree(depth);
        let t = t.map_labels(t.space, ordinal_diamonds::space::half(), |x| x.clone());
        let f = embed::build_dyadic_embedding(&t)?;
        let ok = check_distortion(&f, &t.delta, &Q::from_integer(1.into()))?.passed
            && trees::verify_dyadic(&extract_dyadic_tree(&f, &t.delta)?)?.passed;
        out.push((format!("dyadic round trip depth={depth}"), ok));
    }
    let shape = build_shape(TreeKind::Sprawling, &Ordinal::nat(2), TruncationSpec::new(3, 3))?;
    let t = embed::prepare_tree(&martingale_tree(shape));
    let f = embed::build_sprawling_embedding(&t)?;
    let a = &t.delta * ordinal_diamonds::space::half();
    let ok = check_distortion(&f, &a, &Q::from_integer(1.into()))?.passed
        && trees::verify_sprawling(&extract_sprawling_tree(&f, &a, t.shape.trunc)?)?.passed;
    out.push(("sprawling round trip alpha=2".into(), ok));
    let m = FiniteMetric::from_diamond(&DiamondSpec::new(Ordinal::nat(1), Branching::Finite(3), trunc)?)?;
    let r = l1opt::min_distortion_l1(&m)?;
    out.push((
        "l1 distortion of D_1^3 at most 2".into(),
        r.c <= Q::from_integer(2.into()) && verify_cut_sandwich(&m, &r.cuts, &r.c).passed,
    ));
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

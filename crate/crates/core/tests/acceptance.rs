//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! line per criterion and exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use ordinal_diamonds::diamond::{vertex_dist, Branching, DiamondSpec, Sign, Vertex};
use ordinal_diamonds::dinfty::{dinf_dist, g_map, psi, DInfCode};
use ordinal_diamonds::embed::{
    build_dyadic_embedding, build_sprawling_embedding, check_distortion, extract_dyadic_tree, extract_sprawling_tree,
    prepare_tree,
};
use ordinal_diamonds::l1opt::{min_distortion_l1, verify_cut_sandwich, FiniteMetric};
use ordinal_diamonds::ordinal::{parse_ordinal, Ordinal};
use ordinal_diamonds::peel::{derive_once, peel_index, PointSet2D};
use ordinal_diamonds::space::{half, q, qi, Norm, Q};
use ordinal_diamonds::trees::{
    build_shape, haar_tree, martingale_tree, permute_signs, verify_dyadic, verify_sprawling, TreeKind,
    TruncationSpec,
};
use rand::seq::SliceRandom;
use rand::Rng;

use common::{derive_once_oracle, picker, rng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ord(s: &str) -> Ordinal {
    parse_ordinal(s).unwrap()
}

fn window() -> TruncationSpec {
    TruncationSpec::new(3, 3)
}

/// Finite specs with α ≤ 3 and branching ≤ 4, then the truncated limit ones.
fn oracle_specs() -> Vec<DiamondSpec> {
    let mut specs = Vec::new();
    for a in 0..=3 {
        for b in 2..=4 {
            specs.push(DiamondSpec::new(Ordinal::nat(a), Branching::Finite(b), window()).unwrap());
        }
    }
    for a in ["w", "w+1", "w*2"] {
        specs.push(DiamondSpec::new(ord(a), Branching::Finite(3), window()).unwrap());
    }
    specs
}

const ISOMETRY_ALPHAS: [&str; 7] = ["1", "2", "3", "w", "w+1", "w*2", "w^2"];

fn omega_spec(a: &str) -> DiamondSpec {
    DiamondSpec::new(ord(a), Branching::Omega, window()).unwrap()
}

fn distance_oracle() -> Outcome {
    let mut pairs = 0usize;
    for spec in oracle_specs() {
        let m = spec.materialize().map_err(|e| e.to_string())?;
        let dijkstra = m.oracle_all_pairs();
        for (i, u) in m.vertices.iter().enumerate() {
            for (j, v) in m.vertices.iter().enumerate() {
                let d = spec.dist(u, v).map_err(|e| e.to_string())?.to_q();
                if dijkstra[i][j].as_ref() != Some(&d) {
                    return Err(format!("α={} b={}: d({u},{v}) = {d}, Dijkstra {:?}", spec.alpha, spec.branching, dijkstra[i][j]));
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} ordered pairs over {} specs", oracle_specs().len()))
}

fn isometry() -> Outcome {
    const PAIRS: usize = 10_000;
    for (k, a) in ISOMETRY_ALPHAS.iter().enumerate() {
        let alpha = ord(a);
        let spec = omega_spec(a);
        if psi(&alpha, &Vertex::Top).ok() != Some(DInfCode::top())
            || psi(&alpha, &Vertex::Bottom).ok() != Some(DInfCode::bottom())
        {
            return Err(format!("α={a}: poles not preserved"));
        }
        let mut r = rng(100 + k as u64);
        let mut pick = picker(&mut r);
        for _ in 0..PAIRS {
            let u = Vertex::sample(&spec, &mut pick);
            let v = Vertex::sample(&spec, &mut pick);
            let (pu, pv) = (psi(&alpha, &u).map_err(|e| e.to_string())?, psi(&alpha, &v).map_err(|e| e.to_string())?);
            if dinf_dist(&pu, &pv) != vertex_dist(&u, &v) {
                return Err(format!("α={a}: {u} {v} ↦ {pu} {pv}"));
            }
        }
    }
    Ok(format!("{PAIRS} pairs for each of {} ordinals", ISOMETRY_ALPHAS.len()))
}

fn scaling_law() -> Outcome {
    let mut r = rng(7);
    let mut pick = picker(&mut r);
    let pairs: Vec<(DInfCode, DInfCode)> =
        (0..1000).map(|_| (DInfCode::sample(8, 4, &mut pick), DInfCode::sample(8, 4, &mut pick))).collect();
    for i in 0..3 {
        for sign in [Sign::Minus, Sign::Plus] {
            for (x, y) in &pairs {
                let scaled = dinf_dist(&g_map(i, sign, x), &g_map(i, sign, y));
                if scaled != dinf_dist(x, y).half() {
                    return Err(format!("g({i},{}) on {x}, {y}", sign.symbol()));
                }
            }
        }
    }
    Ok("1000 pairs × 6 maps".into())
}

fn round_trips() -> Outcome {
    let one = qi(1);
    let mut r = rng(11);
    let mut runs = 0;
    for depth in 1..=5u32 {
        let base = haar_tree(depth);
        let base = base.map_labels(base.space, half(), |x| x.clone());
        let mut trees = vec![base.clone()];
        for _ in 0..3 {
            let dim = base.space.dim;
            let mut perm: Vec<usize> = (0..dim).collect();
            perm.shuffle(&mut r);
            let signs: Vec<bool> = (0..dim).map(|_| r.gen()).collect();
            trees.push(permute_signs(&base, &perm, &signs));
        }
        for t in trees {
            let f = build_dyadic_embedding(&t).map_err(|e| format!("depth {depth}: {e}"))?;
            let report = check_distortion(&f, &t.delta, &one).map_err(|e| e.to_string())?;
            if !report.passed {
                return Err(format!("dyadic depth {depth}: ratios [{}, {}]", report.min_ratio, report.max_ratio));
            }
            let back = extract_dyadic_tree(&f, &t.delta).map_err(|e| format!("depth {depth}: {e}"))?;
            if !verify_dyadic(&back).map_err(|e| e.to_string())?.passed {
                return Err(format!("extracted dyadic tree of depth {depth} fails"));
            }
            runs += 1;
        }
    }
    let sprawling: Vec<(&str, u64)> = vec![
        ("1", 2), ("1", 3), ("1", 4),
        ("2", 2), ("2", 3), ("2", 4),
        ("3", 2), ("3", 3), ("w", 2), ("w+1", 2), ("w*2", 2),
    ];
    for (a, fan) in sprawling {
        let shape = build_shape(TreeKind::Sprawling, &ord(a), TruncationSpec::new(fan, 3)).map_err(|e| e.to_string())?;
        let t = prepare_tree(&martingale_tree(shape));
        let f = build_sprawling_embedding(&t).map_err(|e| format!("α={a} fan {fan}: {e}"))?;
        let lower = &t.delta * half();
        let report = check_distortion(&f, &lower, &one).map_err(|e| e.to_string())?;
        if !report.passed {
            return Err(format!("sprawling α={a} fan {fan}: ratios [{}, {}]", report.min_ratio, report.max_ratio));
        }
        let back = extract_sprawling_tree(&f, &lower, t.shape.trunc).map_err(|e| format!("α={a} fan {fan}: {e}"))?;
        if back.delta != &lower * qi(2) || !verify_sprawling(&back).map_err(|e| e.to_string())?.passed {
            return Err(format!("extracted sprawling tree α={a} fan {fan} fails"));
        }
        runs += 1;
    }
    Ok(format!("{runs} round trips"))
}

fn distortion_two() -> Outcome {
    let bound = qi(2) + q(1, 1_000_000);
    let mut cases: Vec<(String, FiniteMetric)> = (2..=5)
        .map(|b| {
            let spec = DiamondSpec::new(Ordinal::nat(1), Branching::Finite(b), window()).unwrap();
            (format!("D_1^{b}"), FiniteMetric::from_diamond(&spec).unwrap())
        })
        .collect();
    let d22 = DiamondSpec::new(Ordinal::nat(2), Branching::Finite(2), window()).unwrap();
    cases.push(("D_2^2".into(), FiniteMetric::from_diamond(&d22).unwrap()));
    let mut summary = Vec::new();
    for (name, m) in &cases {
        let r = min_distortion_l1(m).map_err(|e| format!("{name}: {e}"))?;
        if r.c > bound || !verify_cut_sandwich(m, &r.cuts, &r.c).passed {
            return Err(format!("{name}: c = {}", r.c));
        }
        summary.push(format!("{name} {}", r.c));
    }
    let cycle = FiniteMetric::cycle(4);
    let r = min_distortion_l1(&cycle).map_err(|e| e.to_string())?;
    if r.c < qi(1) || r.c > qi(1) + q(1, 1_000_000) || !verify_cut_sandwich(&cycle, &r.cuts, &r.c).passed {
        return Err(format!("4-cycle: c = {}", r.c));
    }
    summary.push(format!("C_4 {}", r.c));
    Ok(summary.join(", "))
}

fn peeling() -> Outcome {
    let mut r = rng(23);
    let scales = [q(1, 2), qi(1), q(3, 2), qi(2), qi(3)];
    let norms = [Norm::L1, Norm::L2, Norm::LInf];
    for trial in 0..100 {
        let n = r.gen_range(1..=10);
        let mut pts: Vec<(Q, Q)> = Vec::new();
        while pts.len() < n {
            let p = (q(r.gen_range(0..9), 2), q(r.gen_range(0..9), 2));
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        let eps = scales.choose(&mut r).unwrap().clone();
        let norm = *norms.choose(&mut r).unwrap();
        let set = PointSet2D::new(pts.clone(), norm).unwrap();
        let got = derive_once(&set, &eps).unwrap();
        let want = derive_once_oracle(&pts, &eps, norm);
        if got != want {
            return Err(format!("trial {trial}: {got:?} vs oracle {want:?}"));
        }
    }
    let square: Vec<(Q, Q)> = [(0, 0), (1, 0), (0, 1), (1, 1)].iter().map(|&(x, y)| (qi(x), qi(y))).collect();
    let index = peel_index(&PointSet2D::new(square, Norm::L2).unwrap(), &half()).unwrap().index;
    if index != Some(1) {
        return Err(format!("unit square index {index:?}"));
    }
    for k in 0..=5i64 {
        let line = (0..=2 * k).map(|x| (qi(x), qi(0))).collect();
        let index = peel_index(&PointSet2D::new(line, Norm::L2).unwrap(), &half()).unwrap().index;
        if index != Some(k as usize + 1) {
            return Err(format!("{} collinear points: index {index:?}", 2 * k + 1));
        }
    }
    Ok("100 random sets match the oracle; documented indices reproduced".into())
}

fn counts() -> Outcome {
    for n in 0..=6u64 {
        let len = build_shape(TreeKind::Dyadic, &Ordinal::nat(n), window()).map_err(|e| e.to_string())?.len();
        if len != (1 << (n + 1)) - 1 {
            return Err(format!("|T_{n}| = {len}"));
        }
    }
    for b in 2..=6u64 {
        let m = DiamondSpec::new(Ordinal::nat(1), Branching::Finite(b), window()).unwrap().materialize().unwrap();
        if m.vertices.len() as u64 != b + 2 {
            return Err(format!("|V(D_1^{b})| = {}", m.vertices.len()));
        }
    }
    let d22 = DiamondSpec::new(Ordinal::nat(2), Branching::Finite(2), window()).unwrap().materialize().unwrap();
    if d22.vertices.len() != 12 {
        return Err(format!("|V(D_2^2)| = {}", d22.vertices.len()));
    }
    let windows = [Branching::Finite(2), Branching::Finite(3), Branching::Finite(4), Branching::Omega];
    for b in windows {
        let spec = DiamondSpec::new(Ordinal::nat(1), b, window()).unwrap();
        let m = spec.materialize().unwrap();
        let active: BTreeSet<(Vertex, Vertex)> = spec.active_pairs().into_iter().map(|p| (p.u, p.v)).collect();
        let mut all = BTreeSet::new();
        for u in &m.vertices {
            for v in &m.vertices {
                if u < v {
                    all.insert((u.clone(), v.clone()));
                }
            }
        }
        if active != all {
            return Err(format!("AP(D_1^{b}) has {} pairs, window has {}", active.len(), all.len()));
        }
    }
    Ok("trees n ≤ 6, D_1^b for b ≤ 6, D_2^2, active pairs of D_1 windows".into())
}

fn metric_axioms() -> Outcome {
    const TRIPLES: usize = 10_000;
    let mut specs = oracle_specs();
    specs.extend(ISOMETRY_ALPHAS.iter().map(|a| omega_spec(a)));
    for (k, spec) in specs.iter().enumerate() {
        let mut r = rng(500 + k as u64);
        let mut pick = picker(&mut r);
        for _ in 0..TRIPLES {
            let [x, y, z] = [0; 3].map(|_| Vertex::sample(spec, &mut pick));
            let (dxy, dyz, dxz) = (vertex_dist(&x, &y), vertex_dist(&y, &z), vertex_dist(&x, &z));
            if dxy != vertex_dist(&y, &x) || !vertex_dist(&x, &x).is_zero() {
                return Err(format!("α={} b={}: symmetry at {x}, {y}", spec.alpha, spec.branching));
            }
            if dxz > dxy + dyz {
                return Err(format!("α={} b={}: triangle at {x}, {y}, {z}", spec.alpha, spec.branching));
            }
        }
    }
    let mut r = rng(999);
    let mut pick = picker(&mut r);
    for _ in 0..TRIPLES {
        let [x, y, z] = [0; 3].map(|_| DInfCode::sample(6, 3, &mut pick));
        if dinf_dist(&x, &y) != dinf_dist(&y, &x) || dinf_dist(&x, &z) > dinf_dist(&x, &y) + dinf_dist(&y, &z) {
            return Err(format!("D_∞: {x}, {y}, {z}"));
        }
    }
    Ok(format!("{TRIPLES} triples on each of {} specs and on D_∞", specs.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("distance oracle equivalence", distance_oracle),
        ("isometry into D_∞", isometry),
        ("scaling law", scaling_law),
        ("construction/extraction round trips", round_trips),
        ("ℓ1 distortion at most 2", distortion_two),
        ("peeling oracle equivalence", peeling),
        ("structural counts", counts),
        ("metric axioms", metric_axioms),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}; {secs:.1}s)", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} ({secs:.1}s)", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

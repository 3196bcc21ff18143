use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn diamonds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diamonds")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_reports_no_mismatches() {
    let o = diamonds(&["verify", "oracle", "--alpha", "2", "--branching", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("pairs: all, mismatches: 0"), "{}", stdout(&o));
}

#[test]
fn exit_codes() {
    assert_eq!(diamonds(&["ordinal", "w^^2"]).status.code(), Some(2));
    assert_eq!(diamonds(&["diamond", "dist", "--alpha", "2", "--u", "(5+)H0", "--v", "T"]).status.code(), Some(2));
    assert_eq!(diamonds(&["nonsense"]).status.code(), Some(2));
    let o = diamonds(&["diamond", "materialize", "--alpha", "6", "--branching", "4", "--cap", "100"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn distances_and_codes() {
    let o = diamonds(&["diamond", "dist", "--alpha", "2", "--u", "(0+)H1", "--v", "(1-)H0"]);
    assert_eq!(stdout(&o).trim(), "d((0+)H1, (1-)H0) = 1");
    let o = diamonds(&["dinfty", "dist", "--x", "A=[0];r=1/2", "--y", "A=[1];r=1/2"]);
    assert!(stdout(&o).ends_with("= 1\n"), "{}", stdout(&o));
    let o = diamonds(&["dinfty", "psi", "--alpha", "1", "--vertex", "H2"]);
    assert_eq!(stdout(&o).trim(), "A=[2];r=1/2");
}

#[test]
fn seeded_json_is_reproducible() {
    let args = ["--format", "json", "dinfty", "psi-check", "--alpha", "w*2", "--pairs", "500", "--seed", "9"];
    let (a, b) = (diamonds(&args), diamonds(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report["mismatches"], 0);
    assert_eq!(report["pairs"], 500);
}

#[test]
fn tree_embed_extract_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    let emb = dir.path().join("emb.json");
    let back = dir.path().join("back.json");
    let ok = |args: &[&str]| {
        let o = diamonds(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    ok(&["tree", "build", "--kind", "dyadic", "--alpha", "2", "--out", path(&tree)]);
    ok(&["tree", "verify", "--input", path(&tree)]);
    ok(&["embed", "build", "--tree", path(&tree), "--prepare", "--out", path(&emb)]);
    let check = ok(&["embed", "check", "--embedding", path(&emb), "--lower", "1/2"]);
    assert!(stdout(&check).starts_with("pass"));
    ok(&["embed", "extract", "--embedding", path(&emb), "--a", "1/2", "--out", path(&back)]);
    ok(&["tree", "verify", "--input", path(&back)]);

    // a lower constant above the true one is a verification failure
    let o = diamonds(&["embed", "check", "--embedding", path(&emb), "--lower", "3/4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tampered_tree_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    diamonds(&["tree", "build", "--kind", "dyadic", "--alpha", "1", "--out", path(&tree)]);
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&tree).unwrap()).unwrap();
    json["labels"][0][1] = serde_json::json!(["0", "0"]);
    fs::write(&tree, json.to_string()).unwrap();
    assert_eq!(diamonds(&["tree", "verify", "--input", path(&tree)]).status.code(), Some(1));
}

#[test]
fn cut_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let o = diamonds(&["l1", "min-distortion", "--alpha", "1", "--branching", "3", "--out", path(&cert)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("minimum distortion 4/3"), "{}", stdout(&o));
    let certify = |file: &Path| diamonds(&["l1", "certify", "--alpha", "1", "--branching", "3", "--certificate", path(file)]);
    assert_eq!(certify(&cert).status.code(), Some(0));

    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    json["c"] = serde_json::json!("1");
    fs::write(&cert, json.to_string()).unwrap();
    assert_eq!(certify(&cert).status.code(), Some(1));
}

#[test]
fn metric_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c4.csv");
    fs::write(&csv, "a,b,c,d\n0,1,2,1\n1,0,1,2\n2,1,0,1\n1,2,1,0\n").unwrap();
    let o = diamonds(&["--format", "json", "l1", "min-distortion", "--metric", path(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["c"], "1");
}

#[test]
fn peeling_collinear_points() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.json");
    fs::write(&pts, r#"{"points": [["0","0"],["1","0"],["2","0"],["3","0"],["4","0"]]}"#).unwrap();
    let o = diamonds(&["--format", "json", "peel", "--eps", "1/2", "--input", path(&pts)]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["index"], 3);
}

#[test]
fn exports() {
    let o = diamonds(&["--format", "dot", "diamond", "export", "--alpha", "1", "--branching", "2"]);
    assert!(stdout(&o).starts_with("graph"), "{}", stdout(&o));
    let o = diamonds(&["--format", "json", "diamond", "active-pairs", "--alpha", "1", "--branching", "3"]);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["count"], 10);
}

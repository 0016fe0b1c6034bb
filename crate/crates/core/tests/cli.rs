use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gqe::fsutil::DirLock;
use gqe::kgraph::load_graph_dir;
use gqe::querydag::{query_to_json, QueryDag, Structure};

const SPEC: &str = "random:40,3,2,0.15";

fn gqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gqe"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run gqe")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = gqe(args);
    assert_eq!(o.status.code(), Some(0), "gqe {args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ingest(root: &Path) -> PathBuf {
    let graph = root.join("graph");
    ok(&["ingest", "--synthetic", SPEC, "--seed", "1", "--out", s(&graph)]);
    graph
}

fn sample(graph: &Path, out: &Path) {
    ok(&[
        "sample", "--graph", s(graph), "--out", s(out), "--seed", "2", "--train", "40", "--valid", "10",
        "--test", "20", "--pool-size", "30",
    ]);
}

const TRAIN_FLAGS: &[&str] = &[
    "--dim", "8", "--batch-size", "16", "--validation-interval", "5", "--max-stage1-batches", "10",
    "--max-stage2-batches", "10", "--seed", "3",
];

fn train(graph: &Path, data: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["train", "--graph", s(graph), "--data", s(data), "--out", s(out)];
    args.extend_from_slice(TRAIN_FLAGS);
    args.extend_from_slice(extra);
    ok(&args)
}

/// A chain1 query anchored at the head of the first base edge, with the
/// names of its true answers.
fn edge_query(graph: &Path) -> (String, BTreeSet<String>) {
    let g = load_graph_dir(graph).unwrap();
    let e = g.base_edges().next().unwrap();
    let q = QueryDag::from_structure(
        Structure::Chain1,
        &[e.head],
        &[e.relation],
        &[g.type_of(e.head), g.type_of(e.tail)],
    );
    let names = g
        .neighbors(e.head, e.relation)
        .unwrap()
        .iter()
        .map(|&v| g.node_name(v).to_string())
        .collect();
    (query_to_json(&q, &g), names)
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn full_pipeline_runs_and_is_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let graph = ingest(root.path());
    let data = root.path().join("data");
    sample(&graph, &data);

    let a = root.path().join("model_a");
    let b = root.path().join("model_b");
    let first = train(&graph, &data, &a, &[]);
    assert!(first.contains("checkpoint\t"));
    assert!(a.join("train_log.ndjson").exists());
    assert!(a.join("train_summary.json").exists());
    train(&graph, &data, &b, &[]);
    assert_eq!(
        std::fs::read(a.join("model.ckpt")).unwrap(),
        std::fs::read(b.join("model.ckpt")).unwrap()
    );

    let again = train(&graph, &data, &a, &[]);
    assert!(again.starts_with("up to date"), "{again}");
    let forced = train(&graph, &data, &a, &["--force"]);
    assert!(forced.contains("checkpoint\t"));
    let changed = train(&graph, &data, &a, &["--margin", "0.5"]);
    assert!(!changed.starts_with("up to date"));

    let report = root.path().join("report.json");
    let ranks = root.path().join("ranks.csv");
    let table = ok(&[
        "eval", "--graph", s(&graph), "--data", s(&data), "--checkpoint", s(&a), "--out", s(&report),
        "--ranks", s(&ranks),
    ]);
    assert!(table.contains("chain1"), "{table}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert!(json.is_object());
    assert!(std::fs::read_to_string(&ranks).unwrap().lines().count() > 1);

    let (query, _) = edge_query(&graph);
    let answers = ok(&["answer", "--graph", s(&graph), "--checkpoint", s(&a), "--query", &query, "--top-k", "5"]);
    assert_eq!(answers.lines().next(), Some("rank\tnode\tscore"));
    assert_eq!(rows(&answers).len(), 5);
    let scores: Vec<f64> = rows(&answers).iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn sampling_twice_leaves_files_unchanged() {
    let root = tempfile::tempdir().unwrap();
    let graph = ingest(root.path());
    let data = root.path().join("data");
    sample(&graph, &data);
    let read_all = |dir: &Path| {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| (p.clone(), std::fs::read(&p).unwrap()))
            .collect::<Vec<_>>()
    };
    let before = read_all(&data);
    sample(&graph, &data);
    assert_eq!(read_all(&data), before);
    assert!(!data.join(DirLock::FILE).exists());
}

#[test]
fn exact_answers_are_the_true_neighbors() {
    let root = tempfile::tempdir().unwrap();
    let graph = ingest(root.path());
    let model = root.path().join("exact");
    let out = ok(&["train", "--graph", s(&graph), "--out", s(&model), "--mode", "exact"]);
    assert!(out.contains("mode\texact"));

    let (query, expected) = edge_query(&graph);
    let answers = ok(&["answer", "--graph", s(&graph), "--checkpoint", s(&model), "--query", &query, "--top-k", "40"]);
    let got: BTreeSet<String> = rows(&answers).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(got, expected);

    let qfile = root.path().join("query.json");
    std::fs::write(&qfile, &query).unwrap();
    let header = ok(&["answer", "--graph", s(&graph), "--checkpoint", s(&model), "--query", s(&qfile), "--top-k", "0"]);
    assert_eq!(header, "rank\tnode\tscore\n");

    let check = ok(&["oracle-check", "--graph", s(&graph), "--checkpoint", s(&model), "--queries", "20"]);
    assert!(check.contains("mismatches\t0"), "{check}");
}

#[test]
fn exit_codes_distinguish_usage_data_and_violations() {
    let root = tempfile::tempdir().unwrap();
    let graph = ingest(root.path());

    assert_eq!(gqe(&["sample", "--out", s(&root.path().join("x"))]).status.code(), Some(1));
    assert_eq!(gqe(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gqe(&["--help"]).status.code(), Some(0));
    let missing = gqe(&["answer", "--graph", s(&graph), "--checkpoint", "/nonexistent/model.ckpt", "--query", "{}"]);
    assert_eq!(missing.status.code(), Some(1));

    let model = root.path().join("exact");
    ok(&["train", "--graph", s(&graph), "--out", s(&model), "--mode", "exact"]);
    let bad = gqe(&["answer", "--graph", s(&graph), "--checkpoint", s(&model), "--query", "{\"nodes\": ["]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).starts_with("error:"));

    let ckpt = model.join("model.ckpt");
    let mut bytes = std::fs::read(&ckpt).unwrap();
    let newline = bytes.iter().position(|&b| b == b'\n').unwrap();
    let manifest: serde_json::Value = serde_json::from_slice(&bytes[..newline]).unwrap();
    for t in manifest["tensors"].as_array().unwrap() {
        if t["name"].as_str().unwrap().starts_with("R/") {
            let start = newline + 1 + t["offset"].as_u64().unwrap() as usize;
            let len = 8 * (t["rows"].as_u64().unwrap() * t["cols"].as_u64().unwrap()) as usize;
            bytes[start..start + len].fill(0);
        }
    }
    std::fs::write(&ckpt, &bytes).unwrap();
    let violated = gqe(&["oracle-check", "--graph", s(&graph), "--checkpoint", s(&model), "--queries", "20"]);
    assert_eq!(violated.status.code(), Some(3), "{}", stderr(&violated));
    assert!(!stdout(&violated).contains("mismatches\t0\n"));

    let text = String::from_utf8_lossy(&bytes).replacen("\"version\":1", "\"version\":9", 1);
    std::fs::write(&ckpt, text.as_bytes()).unwrap();
    let refused = gqe(&["oracle-check", "--graph", s(&graph), "--checkpoint", s(&model)]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(stderr(&refused).contains("version"), "{}", stderr(&refused));
}

#[test]
fn oracle_check_on_an_edgeless_graph_warns_and_succeeds() {
    let root = tempfile::tempdir().unwrap();
    let edges = root.path().join("edges.tsv");
    let types = root.path().join("types.tsv");
    std::fs::write(&edges, "").unwrap();
    std::fs::write(&types, "a\tperson\nb\tperson\n").unwrap();
    let graph = root.path().join("graph");
    ok(&["ingest", "--edges", s(&edges), "--node-types", s(&types), "--out", s(&graph)]);
    let o = gqe(&["oracle-check", "--graph", s(&graph)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("checked\t0"));
    assert!(stderr(&o).contains("no edges"), "{}", stderr(&o));
}

#[test]
fn config_file_values_apply_and_flags_override_them() {
    let root = tempfile::tempdir().unwrap();
    let graph = ingest(root.path());
    let data = root.path().join("data");
    let cfg = root.path().join("gqe.ini");
    std::fs::write(
        &cfg,
        format!(
            "seed = 4\n\n[sample]\ngraph = {}\ntrain = 7\nvalid = 2\ntest = 3\npool-size = 10\n",
            graph.display()
        ),
    )
    .unwrap();
    let table = ok(&["sample", "--config", s(&cfg), "--out", s(&data)]);
    assert!(table.lines().any(|l| l == "chain2\t7\t2\t3"), "{table}");
    let table = ok(&["sample", "--config", s(&cfg), "--out", s(&data), "--train", "5"]);
    assert!(table.lines().any(|l| l == "chain2\t5\t2\t3"), "{table}");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(data.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["seed"], 4);

    std::fs::write(&cfg, "[sample]\nbogus = 1\n").unwrap();
    let o = gqe(&["sample", "--config", s(&cfg), "--graph", s(&graph), "--out", s(&data)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn a_locked_output_directory_is_refused() {
    let root = tempfile::tempdir().unwrap();
    let graph = ingest(root.path());
    let data = root.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(data.join(DirLock::FILE), "1\n").unwrap();
    let o = gqe(&["sample", "--graph", s(&graph), "--out", s(&data), "--train", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lock"), "{}", stderr(&o));
    assert!(!data.join("manifest.json").exists());
}

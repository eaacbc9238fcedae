//! Drives the compiled binary end to end over the bundled fixture: every
//! subcommand, the exit-code contract, and the golden report for the pinned
//! small run.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sqlsynth")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fixture_dir() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fixture", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let root = dir.path().to_path_buf();
    (dir, root)
}

fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

#[test]
fn fixture_and_ingest() {
    let (_d, root) = fixture_dir();
    assert!(root.join("cars.db").exists());
    assert!(root.join("seeds.jsonl").exists());
    assert!(root.join("pipeline.conf").exists());

    let pool = root.join("pool.jsonl");
    let out = run(&[
        "ingest",
        "--seeds",
        &p(&root.join("seeds.jsonl")),
        "--pool",
        &p(&pool),
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "5");
    assert!(pool.exists());
}

#[test]
fn graph_subcommand_reports_counts() {
    let (_d, root) = fixture_dir();
    let out_file = root.join("graph.json");
    let out = run(&[
        "graph",
        "--db",
        &p(&root.join("cars.db")),
        "--seeds",
        &p(&root.join("seeds.jsonl")),
        "--out",
        &p(&out_file),
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "8 nodes, 9 edges");
    let graph: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(graph["node_count"], 8);
    assert_eq!(graph["edge_count"], 9);
}

#[test]
fn sample_then_mine_chain() {
    let (_d, root) = fixture_dir();
    let subs = root.join("subgraphs.jsonl");
    let out = run(&[
        "sample",
        "--db",
        &p(&root.join("cars.db")),
        "--seeds",
        &p(&root.join("seeds.jsonl")),
        "--strategy",
        "weighted",
        "--samples",
        "8",
        "--seed",
        "7",
        "--out",
        &p(&subs),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout(&out).trim(), "8");

    let drafts = root.join("drafts.jsonl");
    let out = run(&[
        "mine",
        "--db",
        &p(&root.join("cars.db")),
        "--subgraphs",
        &p(&subs),
        "--seed",
        "7",
        "--out",
        &p(&drafts),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&drafts).unwrap();
    assert_eq!(text.lines().count(), 8);
    for line in text.lines() {
        let draft: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(draft["sql"].as_str().unwrap().starts_with("SELECT"));
    }
}

#[test]
fn verify_classifies_three_probes() {
    let (_d, root) = fixture_dir();
    let queries = root.join("queries.sql");
    std::fs::write(
        &queries,
        "SELECT id FROM price\nSELECT * FORM price\nSELECT missing FROM price\n",
    )
    .unwrap();
    let verdicts = root.join("verdicts.jsonl");
    let out = run(&[
        "verify",
        "--db",
        &p(&root.join("cars.db")),
        "--file",
        &p(&queries),
        "--out",
        &p(&verdicts),
    ]);
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&verdicts)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["status"], "pass");
    assert_eq!(lines[1]["status"], "syntax_error");
    assert_eq!(lines[2]["status"], "invalid_reference");
}

#[test]
fn retrieve_recovers_misspelled_value() {
    let (_d, root) = fixture_dir();
    let out = run(&[
        "retrieve",
        "--db",
        &p(&root.join("cars.db")),
        "--question",
        "which makers come from Cnada",
        "--top-n",
        "3",
    ]);
    assert!(out.status.success());
    let first: serde_json::Value =
        serde_json::from_str(stdout(&out).lines().next().unwrap()).unwrap();
    assert_eq!(first["value"], "Canada");

    // persisted index round trip through the magic-header file
    let idx = root.join("values.idx");
    let out = run(&[
        "retrieve",
        "--db",
        &p(&root.join("cars.db")),
        "--question",
        "Cnada",
        "--index",
        &p(&idx),
    ]);
    assert!(out.status.success());
    assert!(idx.exists());
    let out = run(&[
        "retrieve",
        "--db",
        &p(&root.join("cars.db")),
        "--question",
        "Cnada",
        "--index",
        &p(&idx),
    ]);
    let first: serde_json::Value =
        serde_json::from_str(stdout(&out).lines().next().unwrap()).unwrap();
    assert_eq!(first["value"], "Canada");
}

#[test]
fn evolve_and_extract_subcommands() {
    let (_d, root) = fixture_dir();
    let sql_file = root.join("bases.sql");
    std::fs::write(
        &sql_file,
        "SELECT price.id FROM price WHERE price.price < 20000\n",
    )
    .unwrap();
    let evolved = root.join("evolved.jsonl");
    let out = run(&[
        "evolve",
        "--db",
        &p(&root.join("cars.db")),
        "--sql-file",
        &p(&sql_file),
        "--seeds",
        &p(&root.join("seeds.jsonl")),
        "--depth",
        "2",
        "--seed",
        "3",
        "--out",
        &p(&evolved),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let line: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(&evolved)
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(line["leaves_added"], 2);

    let pairs = root.join("pairs.jsonl");
    let out = run(&[
        "extract",
        "--db",
        &p(&root.join("cars.db")),
        "--seeds",
        &p(&root.join("seeds.jsonl")),
        "--samples",
        "5",
        "--seed",
        "3",
        "--out",
        &p(&pairs),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&pairs)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l["status"] == "pass"));
}

#[test]
fn run_pipeline_then_emit_from_pool() {
    let (_d, root) = fixture_dir();
    let out_dir = root.join("run_out");
    let out = run(&[
        "run",
        "--config",
        &p(&root.join("pipeline.conf")),
        "--out",
        &p(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("records.jsonl").exists());
    assert!(out_dir.join("manifest.json").exists());

    let emitted = root.join("gen_structural_only.jsonl");
    let out = run(&[
        "emit",
        "--pool",
        &p(&out_dir.join("records.jsonl")),
        "--task",
        "sql-generation",
        "--sources",
        "structural",
        "--out",
        &p(&emitted),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let n: usize = stdout(&out).trim().parse().unwrap();
    assert!(n > 0);
}

#[test]
fn dry_run_has_no_side_effects() {
    let (_d, root) = fixture_dir();
    let out_dir = root.join("never_created");
    let out = run(&[
        "run",
        "--config",
        &p(&root.join("pipeline.conf")),
        "--out",
        &p(&out_dir),
        "--dry-run",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("plan"));
    assert!(stdout(&out).contains("semantic x40"));
    assert!(
        !out_dir.exists(),
        "--dry-run must not create the output dir"
    );
}

#[test]
fn exit_codes_follow_the_contract() {
    let (_d, root) = fixture_dir();
    // config error → 2
    let conf = root.join("bad.conf");
    std::fs::write(
        &conf,
        "[database]\npath = nope.db\n[seeds]\npath = seeds.jsonl\n[output]\ndir = out\n",
    )
    .unwrap();
    let out = run(&["run", "--config", &p(&conf)]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // unreadable config → 2
    let out = run(&["run", "--config", &p(&root.join("missing.conf"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn golden_report_for_pinned_small_run() {
    let (_d, root) = fixture_dir();
    // 1 round, 20 samples total, pinned seed
    let conf = root.join("small.conf");
    std::fs::write(
        &conf,
        "[database]\npath = cars.db\ndescriptions = descriptions.tsv\n\
         [seeds]\npath = seeds.jsonl\n\
         [synthesis]\nrounds = 1\nsemantic_per_round = 5\nstructural_per_round = 10\nevolve_per_round = 5\n\
         [output]\ndir = out\nseed = 42\n",
    )
    .unwrap();
    let out_dir = root.join("small_out");
    let out = run(&["run", "--config", &p(&conf), "--out", &p(&out_dir)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    // the config hash covers absolute paths, which differ per checkout
    report["config_hash"] = serde_json::Value::String("<path-dependent>".into());
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report_small.json");
    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&golden_path).unwrap()).unwrap();
    assert_eq!(
        report, golden,
        "pinned-seed report drifted from the golden file"
    );

    let accepted: u64 = report["accepted_by_source"]
        .as_object()
        .unwrap()
        .iter()
        .filter(|(k, _)| k.as_str() != "seed")
        .map(|(_, v)| v.as_u64().unwrap())
        .sum();
    assert!(accepted >= 1);
}

use std::path::Path;
use std::process::{Command, Output};

fn dpbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpbench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_run_aggregate_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let meta = dir.path().join("d.json");
    let plan = dir.path().join("plan.json");
    let records = dir.path().join("r.jsonl");
    let summaries = dir.path().join("s.jsonl");
    let grid = dir.path().join("grid.csv");

    let out = dpbench(&["synth", "--rows", "400", "--seed", "3", "--data", p(&data), "--meta", p(&meta)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(
        &plan,
        r#"{
          "epsilons": [0.5, 2.0],
          "sizes": [100, 300, 1000],
          "tasks": [
            {"type": "query", "kind": "count", "column": "age"},
            {"type": "query", "kind": "histogram", "column": "group"},
            {"type": "regression"}
          ],
          "repetitions": 4,
          "ml": {"epochs": 2, "batch_size": 16},
          "probes": {"measure": false}
        }"#,
    )
    .unwrap();
    let out = dpbench(&[
        "run", "--plan", p(&plan), "--data", p(&data), "--meta", p(&meta), "--out", p(&records), "--seed", "9",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&records).unwrap().lines().count(), 3 * 2 * 3 * 4);

    let out = dpbench(&["aggregate", "--in", p(&records), "--out", p(&summaries)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = dpbench(&[
        "report", "--in", p(&summaries), "--metric", "utility", "--shape", "grid", "--out", p(&grid),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&grid).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 3);
    // size 1000 exceeds the 400-row dataset
    assert!(text.lines().filter(|l| l.contains(",1000,")).all(|l| l.ends_with(",unusable")));
}

#[test]
fn calibrate_prints_sigma() {
    let out = dpbench(&["calibrate", "--epsilon", "1", "--delta", "1e-5", "--q", "0.01", "--steps", "1000"]);
    assert!(out.status.success());
    let sigma: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!(sigma > 0.3 && sigma < 100.0);
}

#[test]
fn errors_are_one_line_and_nonzero() {
    for args in [
        vec!["aggregate", "--in", "/nonexistent/records.jsonl", "--out", "/tmp/x"],
        vec!["calibrate", "--epsilon", "-1", "--delta", "1e-5", "--q", "0.01", "--steps", "10"],
        vec!["report", "--in", "x", "--metric", "bogus", "--shape", "grid", "--out", "y"],
        vec!["frobnicate"],
    ] {
        let out = dpbench(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("dpbench: "));
    }
}

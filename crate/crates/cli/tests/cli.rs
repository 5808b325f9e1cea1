use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn lvsk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvsk"))
        .current_dir(dir)
        .env_remove("LVSK_MEM_CAP")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = lvsk(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    lvsk(dir, args).status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Metadata with every timing field removed.
fn untimed(mut v: Value) -> Value {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(map) => {
                map.retain(|k, _| !k.ends_with("seconds"));
                map.values_mut().for_each(strip);
            }
            Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    strip(&mut v);
    v
}

fn score_lines(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn gen_then_exact_scores_have_one_row_per_input_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "1", "gen", "--n", "300", "--d", "6", "--out", "a.bin"]);
    ok(d, &["leverage", "--in", "a.bin", "--method", "exact", "--out", "l.csv"]);
    let scores = score_lines(&d.join("l.csv"));
    assert_eq!(scores.len(), 300);
    assert!((scores.iter().sum::<f64>() - 6.0).abs() < 1e-9);
    let meta = json(&d.join("l.csv.json"));
    assert_eq!(meta["command"], "leverage");
    assert_eq!(meta["seed"], 0);
    assert_eq!(meta["result"]["effective_rank"], 6);
    assert_eq!(meta["flags"]["command"]["leverage"]["method"], "exact");
    assert!(meta["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert!(meta["version"].is_string() && meta["generator"].is_string());
}

#[test]
fn csv_input_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.csv"), "x,y\n1,0\n0,1\n0,0\n").unwrap();
    ok(d, &["leverage", "--in", "a.csv", "--header", "--method", "oracle", "--out", "l.csv"]);
    assert_eq!(score_lines(&d.join("l.csv")), vec![1.0, 1.0, 0.0]);
    // Without --header the first line is a parse error.
    assert_eq!(code(d, &["leverage", "--in", "a.csv", "--method", "exact", "--out", "m.csv"]), 1);
}

#[test]
fn distributed_run_matches_serial_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "4", "gen", "--n", "800", "--d", "12", "--rank", "6", "--noise", "1e-3", "--out", "a.bin"]);
    let common = ["leverage", "--in", "a.bin", "--method", "sketch-trunc", "--sketch", "osnap", "--eps", "0.5", "--sv-tol", "1e-3"];
    let mut serial = common.to_vec();
    serial.extend(["--out", "s.csv"]);
    ok(d, &serial);
    let mut dist = common.to_vec();
    dist.extend(["--workers", "4", "--out", "w.csv"]);
    ok(d, &dist);
    assert_eq!(fs::read(d.join("s.csv")).unwrap(), fs::read(d.join("w.csv")).unwrap());
    let meta = json(&d.join("w.csv.json"));
    let report = &meta["result"]["distributed"];
    assert_eq!(report["workers"], 4);
    assert_eq!(report["effective_rank"], 6);
    let k = report["k"].as_u64().unwrap();
    assert_eq!(report["bytes_communicated"].as_u64().unwrap(), 4 * k * 12 * 8);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--n", "50", "--d", "3", "--out", "a.bin"]);
    let out = lvsk(d, &["leverage", "--in", "a.bin", "--method", "nope", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("possible values"));
    for args in [
        vec!["leverage", "--in", "a.bin", "--method", "sketch", "--sv-tol", "1e-3", "--out", "x.csv"],
        vec!["leverage", "--in", "a.bin", "--method", "sketch-trunc", "--out", "x.csv"],
        vec!["leverage", "--in", "a.bin", "--method", "exact", "--workers", "2", "--out", "x.csv"],
        vec!["leverage", "--in", "a.bin", "--method", "sketch-trunc", "--sv-tol", "1e-3", "--sketch", "srht", "--workers", "2", "--out", "x.csv"],
        vec!["leverage", "--in", "a.bin", "--method", "sketch", "--eps", "1.5", "--out", "x.csv"],
        vec!["--threads", "0", "gen", "--n", "5", "--d", "2", "--out", "b.bin"],
        vec!["--mem-cap", "lots", "gen", "--n", "5", "--d", "2", "--out", "b.bin"],
        vec!["gen", "--n", "5", "--d", "2", "--rank", "3", "--out", "b.bin"],
        vec!["gen", "--n", "5", "--out", "b.bin"],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(d, &args), 2, "{args:?}");
    }
    assert!(!d.join("x.csv").exists());
    assert_eq!(code(d, &["--help"]), 0);
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["leverage", "--in", "missing.bin", "--method", "exact", "--out", "x.csv"]), 1);
    fs::write(d.join("ragged.csv"), "1,2\n3\n").unwrap();
    let out = lvsk(d, &["leverage", "--in", "ragged.csv", "--method", "exact", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
    fs::write(d.join("zero.csv"), "0,0\n0,0\n").unwrap();
    assert_eq!(code(d, &["leverage", "--in", "zero.csv", "--method", "exact", "--out", "x.csv"]), 1);
    assert_eq!(code(d, &["--mem-cap", "1K", "gen", "--n", "100", "--d", "10", "--out", "big.bin"]), 1);
    let env_capped = Command::new(env!("CARGO_BIN_EXE_lvsk"))
        .current_dir(d)
        .env("LVSK_MEM_CAP", "1K")
        .args(["gen", "--n", "100", "--d", "10", "--out", "big.bin"])
        .output()
        .unwrap();
    assert_eq!(env_capped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&env_capped.stderr).contains("memory cap"));
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--n", "400", "--d", "5", "--out", "a.bin"]);
    fs::write(
        d.join("run.cfg"),
        "# shared settings\nseed = 7\neps = 0.25\nsketch = \"osnap\"\npolicy = \"dec\"  # used by order only\n",
    )
    .unwrap();
    ok(d, &["--config", "run.cfg", "leverage", "--in", "a.bin", "--method", "sketch", "--eps", "0.5", "--out", "l.csv"]);
    let meta = json(&d.join("l.csv.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["result"]["eps"], 0.5);
    assert_eq!(meta["result"]["sketch"]["spec"]["family"], "osnap");

    fs::write(d.join("bad.cfg"), "colour = blue\n").unwrap();
    assert_eq!(code(d, &["--config", "bad.cfg", "gen", "--n", "5", "--d", "2", "--out", "b.bin"]), 2);
    assert_eq!(code(d, &["--config", "nowhere.cfg", "gen", "--n", "5", "--d", "2", "--out", "b.bin"]), 2);
}

#[test]
fn order_writes_epoch_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scores: String = (0..100).map(|i| format!("{}\n", (i % 7) as f64 + 0.5)).collect();
    fs::write(d.join("s.txt"), scores).unwrap();
    for policy in ["shuffle", "dec", "dec-swr", "dec_swor"] {
        let out_dir = format!("o_{policy}");
        ok(d, &["--seed", "3", "order", "--scores", "s.txt", "--policy", policy, "--epochs", "2", "--batch", "32", "--out-dir", &out_dir]);
        let manifest = json(&d.join(&out_dir).join("manifest.json"));
        assert_eq!(manifest["result"]["batches_per_epoch"], 4);
        assert_eq!(manifest["result"]["files"].as_array().unwrap().len(), 2);
        for epoch in 0..2 {
            let text = fs::read_to_string(d.join(&out_dir).join(format!("epoch_{epoch:04}.txt"))).unwrap();
            let mut idx: Vec<usize> = text.lines().map(|l| l.parse().unwrap()).collect();
            assert_eq!(idx.len(), 100);
            if policy != "dec-swr" {
                idx.sort_unstable();
                assert_eq!(idx, (0..100).collect::<Vec<_>>(), "{policy}");
            }
        }
    }
    assert_eq!(code(d, &["order", "--scores", "s.txt", "--policy", "dec", "--batch", "0", "--out-dir", "z"]), 2);
    assert_eq!(code(d, &["order", "--scores", "s.txt", "--policy", "best", "--out-dir", "z"]), 2);
}

#[test]
fn smoke_bench_is_fast_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let start = Instant::now();
    ok(d, &["bench", "--scenario", "smoke", "--out", "runs.csv"]);
    assert!(start.elapsed().as_secs_f64() < 5.0);
    let runs = fs::read_to_string(d.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().next(), Some("n,d,method,eps,repeat,seconds,note"));
    assert_eq!(runs.lines().count(), 1 + 4 * 3);
    let summary = fs::read_to_string(d.join("runs_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);

    ok(d, &["--mem-cap", "64M", "bench", "--n", "1024,16777216", "--d", "256", "--methods", "exact,osnap", "--repeats", "1", "--out", "big.csv"]);
    let big = fs::read_to_string(d.join("big.csv")).unwrap();
    assert!(big.lines().filter(|l| l.starts_with("16777216,")).all(|l| l.contains("skipped")));
    assert_eq!(code(d, &["bench", "--scenario", "table9", "--out", "x.csv"]), 2);
}

#[test]
fn figure_exports_scatter_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "2", "figure", "--kind", "rank_full", "--n", "1024", "--d", "6", "--out", "f.csv"]);
    let text = fs::read_to_string(d.join("f.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("series,index,exact,approx"));
    assert_eq!(text.lines().count(), 1 + 2 * 1024);
    let meta = json(&d.join("f.csv.json"));
    assert_eq!(meta["result"]["series"].as_array().unwrap().len(), 2);
    ok(d, &["figure", "--kind", "spectrum", "--n", "512", "--d", "6", "--noisy-n", "600", "--noisy-d", "12", "--noisy-rank", "4", "--out", "s.csv"]);
    assert!(fs::read_to_string(d.join("s.csv")).unwrap().starts_with("series,j,sigma_a,sigma_sa"));
}

#[test]
fn every_command_is_deterministic() {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let steps: Vec<Vec<&str>> = vec![
        vec!["--seed", "11", "gen", "--n", "600", "--d", "10", "--rank", "5", "--noise", "1e-4", "--out", "a.bin"],
        vec!["--seed", "11", "gen", "--n", "50", "--d", "4", "--out", "a.csv"],
        vec!["--seed", "11", "leverage", "--in", "a.bin", "--method", "exact", "--out", "exact.csv"],
        vec!["--seed", "11", "leverage", "--in", "a.bin", "--method", "oracle", "--out", "oracle.csv"],
        vec!["--seed", "11", "leverage", "--in", "a.bin", "--method", "sketch", "--sketch", "srht", "--out", "srht.csv"],
        vec!["--seed", "11", "leverage", "--in", "a.bin", "--method", "sketch-trunc", "--sketch", "countsketch", "--sv-tol", "1e-2", "--out", "cs.csv"],
        vec!["--seed", "11", "--threads", "1", "leverage", "--in", "a.bin", "--method", "sketch-trunc", "--sketch", "osnap", "--sv-tol", "1e-2", "--workers", "3", "--out", "dist.csv"],
        vec!["--seed", "11", "order", "--scores", "exact.csv", "--policy", "dec-swor", "--epochs", "2", "--out-dir", "ord"],
        vec!["--seed", "11", "order", "--scores", "exact.csv", "--policy", "dec-swr", "--epochs", "2", "--out-dir", "swr"],
        vec!["--seed", "11", "figure", "--kind", "trunc_fix", "--n", "512", "--d", "6", "--noisy-n", "800", "--noisy-d", "20", "--noisy-rank", "5", "--out", "fig.csv"],
        vec!["--seed", "11", "bench", "--n", "256", "--d", "8", "--repeats", "1", "--out", "bench.csv"],
    ];
    for dir in &runs {
        for args in &steps {
            ok(dir.path(), args);
        }
    }
    let files = [
        "a.bin", "a.csv", "exact.csv", "oracle.csv", "srht.csv", "cs.csv", "dist.csv",
        "ord/epoch_0000.txt", "ord/epoch_0001.txt", "swr/epoch_0001.txt", "fig.csv",
    ];
    for f in files {
        let (x, y) = (runs[0].path().join(f), runs[1].path().join(f));
        assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap(), "{f}");
    }
    let metas = [
        "a.bin.json", "exact.csv.json", "srht.csv.json", "dist.csv.json", "ord/manifest.json", "fig.csv.json", "bench.csv.json",
    ];
    for m in metas {
        let (x, y) = (json(&runs[0].path().join(m)), json(&runs[1].path().join(m)));
        assert_eq!(untimed(x), untimed(y), "{m}");
    }
    // Timings aside, bench rows agree too.
    let strip = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != 5).map(|(_, v)| v).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(strip(&runs[0].path().join("bench.csv")), strip(&runs[1].path().join("bench.csv")));
}

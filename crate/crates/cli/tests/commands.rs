use std::process::Command;

use sgnn_cli::bench::bench_clocks;
use sgnn_cli::cli::run;
use sgnn_cli::commands::{cmd_compare, cmd_sweep, cmd_train};
use sgnn_cli::{CliError, Settings};

fn settings(pairs: &[(&str, &str)]) -> Settings {
    let mut s = Settings::default();
    s.apply("data", "sbm:3x60").unwrap();
    s.apply("train.epochs", "30").unwrap();
    for (k, v) in pairs {
        s.apply(k, v).unwrap();
    }
    s
}

#[test]
fn sweep_has_one_row_per_point_and_seed() {
    let s = settings(&[
        ("reg.kind", "sgnn"),
        ("seeds", "1,2"),
        ("grid", "lambda=0.5,1,2;tcut=0.3,0.7,1.0"),
    ]);
    let out = cmd_sweep(&s, None).unwrap();
    assert_eq!(out.rows.len(), 18);
    assert_eq!(out.csv.lines().count(), 19);
    assert!(out
        .csv
        .starts_with("reg.lambda,reg.t_cut,seed,val_acc,test_acc,active_frac\n"));
    assert!(out.summary.starts_with("best reg.lambda="));
}

#[test]
fn ln2_grid_point_keeps_half_the_nodes() {
    let ln2 = std::f64::consts::LN_2.to_string();
    let s = settings(&[
        ("reg.kind", "sgnn"),
        ("data", "sbm:4x250"),
        ("seeds", "1,2,3"),
        ("grid", &format!("lambda=1;tcut={ln2}")),
    ]);
    let out = cmd_sweep(&s, None).unwrap();
    let fracs: Vec<f64> = out.rows.iter().map(|r| r.run.active_frac).collect();
    let mean = fracs.iter().sum::<f64>() / fracs.len() as f64;
    // 3 seeds × 30 epochs × 1000 nodes: σ ≈ 0.003
    assert!((mean - 0.5).abs() < 0.015, "{mean}");
}

#[test]
fn single_point_sweep_matches_train() {
    let s = settings(&[("reg.kind", "sgnn"), ("seeds", "3"), ("grid", "lambda=2")]);
    let sweep = cmd_sweep(&s, None).unwrap();
    let mut t = settings(&[("reg.kind", "sgnn"), ("reg.lambda", "2"), ("seed", "3")]);
    t.grid.clear();
    let run = cmd_train(&t, None).unwrap();
    assert_eq!(sweep.rows.len(), 1);
    let r = &sweep.rows[0].run;
    assert_eq!((r.val_acc, r.test_acc), run.record.reported);
    assert_eq!(r.active_frac, run.record.mean_active_frac);
}

#[test]
fn compare_table_layout_and_repeatability() {
    let s = settings(&[("seeds", "1,2,3,4,5")]);
    let a = cmd_compare(&s, None).unwrap();
    let lines: Vec<&str> = a.table.lines().collect();
    // header, four methods, seed count
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("method"));
    for (line, name) in lines[1..5]
        .iter()
        .zip(["dropout", "drop_edge", "drop_node", "sgnn"])
    {
        assert!(line.starts_with(name));
        assert_eq!(line.matches('±').count(), 2);
    }
    assert_eq!(a.csv.lines().count(), 1 + 4 * 5);
    let b = cmd_compare(&s, None).unwrap();
    assert_eq!(a.table, b.table);
    assert_eq!(a.csv, b.csv);
}

#[test]
fn train_writes_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = settings(&[("reg.kind", "drop_edge")]);
    let out = cmd_train(&s, Some(dir.path())).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert_eq!(csv, out.csv);
    assert_eq!(csv.lines().count(), 31);
    assert!(manifest.starts_with("csv_schema=1\ncommand=train\n"));
    assert!(manifest.contains("\nreg.kind=drop_edge\n"));
}

#[test]
fn manifest_checksum_guards_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_train(&settings(&[]), Some(dir.path())).unwrap();
    let mut s = Settings::default();
    s.apply_text(&out.manifest).unwrap();
    s.apply("sbm.seed", "2").unwrap();
    assert!(matches!(cmd_train(&s, None), Err(CliError::Data(_))));
}

#[test]
fn errors_map_to_kinds() {
    let no_data = Settings::default();
    assert!(matches!(cmd_train(&no_data, None), Err(CliError::Usage(_))));
    let missing = settings(&[("data", "/nonexistent/graph.txt")]);
    assert!(matches!(cmd_train(&missing, None), Err(CliError::Data(_))));
    let bad_p = settings(&[("reg.kind", "dropout"), ("reg.p", "1.0")]);
    assert!(matches!(cmd_train(&bad_p, None), Err(CliError::Usage(_))));
    let no_grid = settings(&[]);
    assert!(matches!(cmd_sweep(&no_grid, None), Err(CliError::Usage(_))));
    assert!(matches!(
        run(["sgnn", "train", "--synthetic", "sbm:3x60", "--epochs", "0"]),
        Err(CliError::Usage(_))
    ));
    assert!(run(["sgnn", "--help"]).unwrap().contains("bench-clocks"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_sgnn");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(
        code(&["validate-data", "--data", "/nonexistent/g.txt"]),
        Some(2)
    );
    assert_eq!(
        code(&["train", "--synthetic", "sbm:3x60", "--reg", "bogus"]),
        Some(1)
    );
    assert_eq!(code(&["no-such-command"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let path = path.to_str().unwrap();
    assert_eq!(
        code(&["gen-sbm", "--spec", "sbm:2x40", "--out", path]),
        Some(0)
    );
    assert_eq!(code(&["validate-data", "--data", path]), Some(0));
    let bad_threads = Command::new(bin)
        .args([
            "compare",
            "--synthetic",
            "sbm:3x60",
            "--seeds",
            "1",
            "--epochs",
            "2",
        ])
        .env("SGNN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(1));
}

#[test]
fn doubling_clock_count_roughly_doubles_time() {
    let report = bench_clocks(&[1_000_000, 2_000_000], 5, 1.0, 0.5).unwrap();
    let ratio = report.points[1].seconds / report.points[0].seconds;
    assert!((1.6..=2.6).contains(&ratio), "ratio {ratio}");
    let empty = bench_clocks(&[0], 1, 1.0, 0.5).unwrap();
    assert_eq!(empty.points[0].n, 0);
}

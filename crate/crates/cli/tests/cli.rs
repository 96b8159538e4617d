use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bphf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bphf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn field<'a>(out: &'a str, key: &str) -> &'a str {
    out.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|t| t.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no field {key} in {out}"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn build_verify_round_trip() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f.bphf");
    let o = bphf(&["build", "--n", "10", "--k", "3", "--delta", "2", "--method", "derand", "--out", &f]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "M"), "570");
    assert_eq!(field(&out, "T"), "380/3");
    assert_eq!(field(&out, "method"), "derand");
    assert_eq!(field(&out, "verified"), "exact");
    let o = bphf(&["verify", "--family", &f]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().any(|l| l == "PASS"));
    assert_eq!(field(&stdout(&o), "subsets"), "120");

    // rewriting what was read gives the same bytes
    let bytes = fs::read(&f).unwrap();
    let (family, cert) = bphf_core::format::read_family(&bytes[..]).unwrap();
    let mut again = Vec::new();
    bphf_core::format::write_family(&mut again, &family, &cert).unwrap();
    assert_eq!(again, bytes);
}

#[test]
fn tampered_and_truncated_files() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f.bphf");
    assert_eq!(code(&bphf(&["build", "--n", "8", "--k", "2", "--delta", "2", "--method", "derand", "--out", &f])), 0);
    let text = fs::read_to_string(&f).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let tampered = "T=100000/1 delta=2/1";
    lines[2] = tampered;
    let bad = write(&dir, "bad.bphf", &(lines.join("\n") + "\n"));
    let o = bphf(&["verify", "--family", &bad]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).lines().any(|l| l == "FAIL"));

    let short = write(&dir, "short.bphf", &(text.lines().take(5).collect::<Vec<_>>().join("\n") + "\n"));
    let o = bphf(&["verify", "--family", &short]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "x.bphf");
    for args in [
        vec!["build", "--n", "10", "--k", "3", "--delta", "1", "--method", "derand", "--out", &f],
        vec!["build", "--n", "10", "--k", "3", "--delta", "2", "--method", "code", "--l", "4", "--out", &f],
        vec!["build", "--n", "10", "--k", "3", "--delta", "2", "--method", "pipeline", "--l", "2", "--out", &f],
        vec!["build", "--n", "10", "--k", "3", "--delta", "abc", "--method", "derand", "--out", &f],
        vec!["build", "--n", "10", "--k", "3", "--delta", "2", "--method", "nope", "--out", &f],
        vec!["build", "--n", "10", "--k", "3", "--delta", "2", "--method", "derand"],
        vec!["frobnicate"],
    ] {
        let o = bphf(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
    assert!(!Path::new(&f).exists());
    assert_eq!(code(&bphf(&["--help"])), 0);
}

#[test]
fn every_method_builds() {
    let dir = TempDir::new().unwrap();
    for (method, extra, n, k) in [
        ("random", vec!["--seed", "5"], "9", "3"),
        ("random", vec!["--l", "2"], "9", "3"),
        ("derand", vec!["--l", "5"], "9", "3"),
        ("code", vec![], "100", "2"),
        ("lowsplit", vec!["--l", "2"], "8", "3"),
        ("pipeline", vec![], "8", "2"),
    ] {
        let f = path(&dir, &format!("{method}.bphf"));
        let mut args = vec!["build", "--n", n, "--k", k, "--delta", "2", "--method", method, "--out", &f];
        args.extend(extra);
        let o = bphf(&args);
        assert_eq!(code(&o), 0, "{method}: {}", stderr(&o));
        assert_eq!(field(&stdout(&o), "verified"), "exact", "{method}");
        let o = bphf(&["verify", "--family", &f]);
        assert_eq!(code(&o), 0, "{method}: {}", stdout(&o));
    }
}

#[test]
fn oversized_output_is_a_budget_error() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "p.bphf");
    let o = bphf(&[
        "build", "--n", "8", "--k", "2", "--delta", "2", "--method", "pipeline", "--max-write", "10", "--out", &f,
    ]);
    assert_eq!(code(&o), 4);
    assert_eq!(field(&stdout(&o), "verified"), "exact");
    assert_eq!(field(&stdout(&o), "written"), "no");
    assert!(!Path::new(&f).exists());
}

#[test]
fn small_bias_provider_reports_budget() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "p.bphf");
    let o = bphf(&[
        "build", "--n", "30", "--k", "3", "--delta", "2", "--method", "pipeline", "--provider", "eps-bias", "--out", &f,
    ]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("greedy"));
}

#[test]
fn counts_with_oracle() {
    let dir = TempDir::new().unwrap();
    let k3 = write(&dir, "k3.txt", "undirected 3 3\n0 1\n1 2\n2 0\n");
    let o = bphf(&["count", "cycles", "--graph", &k3, "--k", "3", "--delta", "2", "--exact"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "exact"), "1");
    let v: f64 = field(&out, "value_decimal").parse().unwrap();
    assert!((0.5..=2.0).contains(&v));
    // second run reads the cached family
    let cached: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".bphf"))
        .collect();
    assert_eq!(cached.len(), 1);
    let o = bphf(&["count", "cycles", "--graph", &k3, "--k", "3", "--delta", "2"]);
    assert!(stderr(&o).contains("using cached family"));
    assert_eq!(field(&stdout(&o), "raw"), field(&out, "raw"));

    let c3 = write(&dir, "c3.txt", "directed 3 3\n0 1\n1 2\n2 0\n");
    let o = bphf(&["count", "paths", "--graph", &c3, "--k", "3", "--delta", "2", "--exact"]);
    assert_eq!(code(&o), 0);
    assert_eq!(field(&stdout(&o), "exact"), "3");
    let r: f64 = field(&stdout(&o), "ratio").parse().unwrap();
    assert!((0.5..=2.0).contains(&r));

    let empty = write(&dir, "e.txt", "undirected 4 0\n");
    let o = bphf(&["count", "paths", "--graph", &empty, "--k", "3", "--delta", "2"]);
    assert_eq!(field(&stdout(&o), "value"), "0/1");
}

#[test]
fn count_with_given_family() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f.bphf");
    assert_eq!(code(&bphf(&["build", "--n", "4", "--k", "3", "--delta", "1.5", "--method", "derand", "--out", &f])), 0);
    let k4 = write(&dir, "k4.txt", "undirected 4 6\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n");
    let o = bphf(&["count", "paths", "--graph", &k4, "--k", "3", "--delta", "1.5", "--family", &f, "--exact"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "exact"), "12");
    // a family for the wrong k is refused
    let o = bphf(&["count", "paths", "--graph", &k4, "--k", "2", "--delta", "1.5", "--family", &f]);
    assert_eq!(code(&o), 1);
}

#[test]
fn exact_counts() {
    let dir = TempDir::new().unwrap();
    let k4 = write(&dir, "k4.txt", "undirected 4 6\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n");
    let run = |kind: &str, k: &str| bphf(&["exact", kind, "--graph", &k4, "--k", k]);
    assert_eq!(stdout(&run("paths", "3")).trim(), "12");
    assert_eq!(stdout(&run("cycles", "3")).trim(), "4");
    assert_eq!(stdout(&run("paths", "5")).trim(), "0");
    assert_eq!(code(&run("paths", "7")), 4);
    assert_eq!(code(&run("cycles", "2")), 1);
    let bad = write(&dir, "bad.txt", "undirected 3 2\n0 1\n1 0\n");
    let o = bphf(&["exact", "paths", "--graph", &bad, "--k", "2"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "g.txt", "directed 5 7\n0 1\n1 2\n2 3\n3 4\n4 0\n1 3\n2 0\n");
    let f = path(&dir, "f.bphf");
    assert_eq!(code(&bphf(&["build", "--n", "5", "--k", "3", "--delta", "2", "--method", "derand", "--out", &f])), 0);
    let one = bphf(&["--threads", "1", "count", "cycles", "--graph", &g, "--k", "3", "--delta", "2", "--family", &f]);
    let four = bphf(&["--threads", "4", "count", "cycles", "--graph", &g, "--k", "3", "--delta", "2", "--family", &f]);
    assert_eq!(code(&one), 0);
    assert_eq!(stdout(&one), stdout(&four));
    assert_eq!(code(&bphf(&["--threads", "0", "exact", "paths", "--graph", &g, "--k", "2"])), 1);
}

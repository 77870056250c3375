use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use condfix_core::minilang::{Location, RepairKind};
use condfix_core::trace::{Column, Scalar, Sort, TraceMatrix, TraceRow};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn condfix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condfix")).args(args).output().expect("spawn condfix")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn repair_patches_a_corpus_bundle() {
    let dir = root().join("corpus/CM2");
    let report = tempfile::NamedTempFile::new().unwrap();
    let o = condfix(&[
        "repair",
        "--program",
        path(&dir.join("program.ml")),
        "--suite",
        path(&dir.join("suite.txt")),
        "--report",
        path(report.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("patched"), "{stderr}");
    let json = std::fs::read_to_string(report.path()).unwrap();
    assert!(json.contains("n < ZS"), "{json}");
}

#[test]
fn repair_reports_a_limitation_with_exit_one() {
    let dir = root().join("corpus/PM1");
    let o = condfix(&["repair", "--program", path(&dir.join("program.ml")), "--suite", path(&dir.join("suite.txt"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NoAngelicValue"));
}

#[test]
fn localize_prints_a_ranking() {
    let dir = root().join("corpus/CM5");
    let o = condfix(&["localize", "--program", path(&dir.join("program.ml")), "--suite", path(&dir.join("suite.txt"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,location,kind,score"));
    assert!(lines.next().unwrap().starts_with("1,"));

    let o = condfix(&[
        "localize",
        "--program",
        path(&dir.join("program.ml")),
        "--suite",
        path(&dir.join("suite.txt")),
        "--csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().lines().count() > 1);
}

fn trace_file() -> tempfile::NamedTempFile {
    let rows = [([1, 2], true), ([2, 1], false), ([3, 3], false), ([-1, 4], true)];
    let m = TraceMatrix {
        location: Location(3),
        kind: RepairKind::ConditionUpdate,
        columns: ["a", "b"].iter().map(|n| Column { name: n.to_string(), sort: Sort::Int, constant: false }).collect(),
        rows: rows
            .iter()
            .map(|(v, e)| TraceRow { test: "t".into(), eval: 0, inputs: v.iter().map(|x| Scalar::Int(*x)).collect(), expected: *e })
            .collect(),
        conflicting: false,
    };
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), m.to_text()).unwrap();
    f
}

#[test]
fn synth_solves_and_emits() {
    let f = trace_file();
    let o = condfix(&["synth", "--trace", path(f.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "a < b");

    let o = condfix(&["synth", "--trace", path(f.path()), "--emit"]);
    assert_eq!(o.status.code(), Some(0));
    let script = String::from_utf8(o.stdout).unwrap();
    assert!(script.contains("check-sat"), "{script}");

    let o = condfix(&["synth", "--trace", path(f.path()), "--level", "99"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_writes_loadable_bundles() {
    let base = root().join("seeds/sign");
    let out = tempfile::tempdir().unwrap();
    let o = condfix(&[
        "seed",
        "--program",
        path(&base.join("program.ml")),
        "--suite",
        path(&base.join("suite.txt")),
        "--grid",
        path(&base.join("grid.toml")),
        "--out",
        path(out.path()),
        "--prefix",
        "T",
        "--limit",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let loaded = condfix_core::corpus::load_corpus(out.path()).unwrap();
    assert_eq!(loaded.len(), 2);
    assert!(out.path().join("T01/meta.txt").exists());
}

#[test]
fn usage_errors_exit_two() {
    let o = condfix(&["repair", "--program", "/nonexistent.ml", "--suite", "/nonexistent.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert_eq!(condfix(&["frobnicate"]).status.code(), Some(2));
}

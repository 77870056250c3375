use std::path::Path;

use condfix_core::corpus::{load_corpus, BugBundle};
use condfix_core::pipeline::validate;
use condfix_core::{repair, Mode, Program, RepairConfig, RepairKind, RepairOutcome, Suite};

const LARGER: &str = "\
fn larger(a: int, b: int) -> int {
    if (b < a) {
        return b;
    }
    return a;
}
";

const LARGER_TESTS: &str = "\
test up larger(1, 2) expect 2
test down larger(5, 3) expect 5
test tie larger(4, 4) expect 4
test negative larger(-1, 0) expect 0
test mixed larger(0, -7) expect 0
";

fn corpus_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus"))
}

#[test]
fn every_bundle_loads_and_self_checks() {
    let loaded = load_corpus(corpus_dir()).unwrap();
    assert_eq!(loaded.len(), 48);
    for (dir, bundle) in loaded {
        let bundle = bundle.unwrap_or_else(|e| panic!("{dir}: {e}"));
        assert!(dir.ends_with(&bundle.id), "{dir} holds {}", bundle.id);
        bundle.self_check().unwrap_or_else(|e| panic!("{dir}: {e}"));
    }
}

#[test]
fn saved_bundle_reloads_identically() {
    let original = BugBundle::load(&corpus_dir().join("CM2")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    original.save(tmp.path()).unwrap();
    let again = BugBundle::load(tmp.path()).unwrap();
    assert_eq!(again.id, original.id);
    assert_eq!(again.human, original.human);
    assert_eq!(again.expected, original.expected);
    assert_eq!(again.grid, original.grid);
    assert_eq!(again.suite.to_string(), original.suite.to_string());
    assert_eq!(again.program, original.program);
}

#[test]
fn inline_program_is_repaired_at_its_condition() {
    let program = Program::parse(LARGER).unwrap();
    let suite = Suite::parse(LARGER_TESTS).unwrap();
    let report = repair(&program, &suite, &RepairConfig::default()).unwrap();
    match &report.outcome {
        RepairOutcome::Patched { kind, level, .. } => {
            assert_eq!(*kind, RepairKind::ConditionUpdate);
            assert_eq!(*level, 1);
        }
        other => panic!("{other:?}"),
    }
    assert!(validate(&program, &report.patch().unwrap(), &suite));
    assert!(!report.failing_tests.is_empty());
}

#[test]
fn report_json_round_trips() {
    let program = Program::parse(LARGER).unwrap();
    let suite = Suite::parse(LARGER_TESTS).unwrap();
    let config = RepairConfig { mode: Mode::Condition, ..RepairConfig::default() };
    let report = repair(&program, &suite, &config).unwrap();
    let back: condfix_core::RepairReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn passing_program_needs_no_repair() {
    let program = Program::parse(&LARGER.replace("b < a", "a < b")).unwrap();
    let suite = Suite::parse(LARGER_TESTS).unwrap();
    let err = repair(&program, &suite, &RepairConfig::default()).unwrap_err();
    assert!(matches!(err, condfix_core::pipeline::RepairError::NoFailingTest), "{err}");
}

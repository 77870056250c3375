//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use condfix_core::corpus::{load_corpus, run_loaded, BugBundle, HarnessConfig, HarnessReport};
use condfix_core::faultloc::{scores, scores_tied, suspiciousness, wasted_effort_from_scores, Counts, Metric, Spectrum};
use condfix_core::minilang::{
    execute, parse_expr, Call, ExecutionControls, Location, Outcome, Patch, Program, RepairKind, Value,
};
use condfix_core::pipeline::repair;
use condfix_core::synth::{
    check_structure, decode, encode, enumerate_oracle, solve, Backend, ComponentSpec, Model, Op, SmtLevel,
    SolveOutcome,
};
use condfix_core::testkit::{run_suite, run_test};
use condfix_core::trace::{deduplicate, Column, Scalar, Sort, TraceMatrix, TraceRow};

const SOLVE_TIMEOUT: Duration = Duration::from_secs(20);

type Verdict = Result<String, String>;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load_bundles() -> Vec<BugBundle> {
    load_corpus(&corpus_dir())
        .expect("corpus directory")
        .into_iter()
        .map(|(name, b)| b.unwrap_or_else(|e| panic!("bundle {name}: {e}")))
        .collect()
}

fn run_corpus() -> HarnessReport {
    let loaded = load_corpus(&corpus_dir()).expect("corpus directory");
    run_loaded(loaded, &HarnessConfig::default())
}

fn synthesized_patch(report: &HarnessReport, id: &str) -> Result<Patch, String> {
    let row = report.row(id).ok_or_else(|| format!("{id}: missing from report"))?;
    let (Some(kind), Some(loc), Some(expr)) = (&row.kind, row.location, &row.expression) else {
        return Err(format!("{id}: {} ({})", row.outcome, row.reason.clone().unwrap_or_default()));
    };
    Ok(Patch {
        kind: RepairKind::from_name(kind).ok_or_else(|| format!("{id}: unknown kind {kind}"))?,
        location: Location(loc),
        expr: parse_expr(expr).map_err(|e| format!("{id}: {e}"))?,
    })
}

fn bundle<'a>(bundles: &'a [BugBundle], id: &str) -> &'a BugBundle {
    bundles.iter().find(|b| b.id == id).unwrap_or_else(|| panic!("bundle {id} missing"))
}

fn criterion_repairability(report: &HarnessReport, bundles: &[BugBundle]) -> Verdict {
    let mut notes = Vec::new();
    for id in ["CM1", "CM2", "CM5", "CL4", "PL4", "PM2"] {
        let patch = synthesized_patch(report, id)?;
        let b = bundle(bundles, id);
        let fixed = b.program.apply_patch(&patch).map_err(|e| format!("{id}: {e}"))?;
        let result = run_suite(&fixed, &b.suite, &ExecutionControls::default()).map_err(|e| format!("{id}: {e}"))?;
        if !result.all_pass() {
            return Err(format!("{id}: patched program still fails {:?}", result.failing()));
        }
        let millis = report.row(id).map_or(u64::MAX, |r| r.millis);
        if millis >= 60_000 {
            return Err(format!("{id}: took {millis} ms"));
        }
        notes.push(format!("{id} {millis}ms"));
    }
    Ok(notes.join(", "))
}

fn criterion_limitations(report: &HarnessReport) -> Verdict {
    let reason = |id: &str| report.row(id).and_then(|r| r.reason.clone()).unwrap_or_else(|| "patched".into());
    let (pm1, pl3) = (reason("PM1"), reason("PL3"));
    if pm1 != "NoAngelicValue" {
        return Err(format!("PM1 gave {pm1}"));
    }
    if pl3 != "ConflictingTrace" && pl3 != "SynthesisTimeout" {
        return Err(format!("PL3 gave {pl3}"));
    }
    Ok(format!("PM1 {pm1}, PL3 {pl3}"))
}

fn same_value(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Real(x), Value::Real(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0),
        _ => a == b,
    }
}

fn same_outcome(a: &Outcome, b: &Outcome) -> bool {
    match (a, b) {
        (Outcome::Returned(x), Outcome::Returned(y)) => same_value(x, y),
        (Outcome::Failed(x), Outcome::Failed(y)) => x.kind == y.kind,
        (Outcome::BudgetExhausted, Outcome::BudgetExhausted) => true,
        _ => false,
    }
}

fn criterion_grid_equivalence(report: &HarnessReport, bundles: &[BugBundle]) -> Verdict {
    let mut notes = Vec::new();
    for id in ["CM5", "CL4", "PL4", "PM2"] {
        let b = bundle(bundles, id);
        let synthesized = b.program.apply_patch(&synthesized_patch(report, id)?).map_err(|e| format!("{id}: {e}"))?;
        let human = b.program.apply_patch(&b.human).map_err(|e| format!("{id}: {e}"))?;
        let calls = b.grid.as_ref().ok_or_else(|| format!("{id}: no grid"))?.calls().map_err(|e| format!("{id}: {e}"))?;
        if calls.len() < 500 {
            return Err(format!("{id}: grid has only {} points", calls.len()));
        }
        let controls = ExecutionControls::default();
        for call in &calls {
            let a = execute(&synthesized, call, &controls).map_err(|e| format!("{id}: {e}"))?;
            let h = execute(&human, call, &controls).map_err(|e| format!("{id}: {e}"))?;
            if !same_outcome(&a.outcome, &h.outcome) {
                return Err(format!("{id}: {call} gives {:?} against {:?}", a.outcome, h.outcome));
            }
        }
        notes.push(format!("{id} {} points", calls.len()));
    }
    Ok(notes.join(", "))
}

/// Hidden shapes the random matrices are labelled with.
enum Target {
    Cmp(usize, Op, usize),
    Both(usize, Op, usize, usize, Op, usize, bool),
    Noise,
}

fn scalar_num(s: &Scalar) -> f64 {
    match s {
        Scalar::Int(i) => *i as f64,
        Scalar::Real(r) => *r,
        Scalar::Bool(_) => unreachable!("numeric column expected"),
    }
}

fn compare(op: Op, a: f64, b: f64) -> bool {
    match op {
        Op::Lt => a < b,
        Op::Le => a <= b,
        Op::Eq => a == b,
        _ => a != b,
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, max_level: u8) -> TraceMatrix {
    let width = rng.gen_range(1..=6);
    let mut columns = Vec::new();
    for i in 0..width {
        let constant = i == width - 1 && width > 1 && rng.gen_bool(0.3);
        let column = if constant {
            let name = *["0", "-1", "1"].choose(rng).unwrap();
            Column { name: name.into(), sort: Sort::Int, constant: true }
        } else {
            let sort = match rng.gen_range(0..10) {
                0..=5 => Sort::Int,
                6..=7 => Sort::Bool,
                _ => Sort::Real,
            };
            Column { name: format!("c{i}"), sort, constant: false }
        };
        columns.push(column);
    }
    let numeric: Vec<usize> = (0..width).filter(|&i| columns[i].sort != Sort::Bool).collect();
    let cmp_ops = [Op::Lt, Op::Le, Op::Eq, Op::Ne];
    let pick_cmp = |rng: &mut ChaCha8Rng| {
        (*numeric.choose(rng).unwrap(), *cmp_ops.choose(rng).unwrap(), *numeric.choose(rng).unwrap())
    };
    let target = match (numeric.is_empty(), rng.gen_range(0..10)) {
        (true, _) | (false, 0..=1) => Target::Noise,
        (false, 2..=6) => {
            let (a, op, b) = pick_cmp(rng);
            Target::Cmp(a, op, b)
        }
        _ if max_level >= 2 => {
            let (a, op, b) = pick_cmp(rng);
            let (c, op2, d) = pick_cmp(rng);
            Target::Both(a, op, b, c, op2, d, rng.gen_bool(0.5))
        }
        _ => {
            let (a, op, b) = pick_cmp(rng);
            Target::Cmp(a, op, b)
        }
    };
    let height = rng.gen_range(1..=20);
    let mut rows = Vec::new();
    for r in 0..height {
        let inputs: Vec<Scalar> = columns
            .iter()
            .map(|c| match (c.constant, c.sort) {
                (true, _) => Scalar::Int(c.name.parse().unwrap()),
                (false, Sort::Int) => Scalar::Int(rng.gen_range(-3..=3)),
                (false, Sort::Bool) => Scalar::Bool(rng.gen_bool(0.5)),
                (false, _) => Scalar::Real(*[-1.5, -0.5, 0.0, 0.5, 1.0, 2.5].choose(rng).unwrap()),
            })
            .collect();
        let test = |a: usize, op: Op, b: usize| compare(op, scalar_num(&inputs[a]), scalar_num(&inputs[b]));
        let expected = match target {
            Target::Cmp(a, op, b) => test(a, op, b),
            Target::Both(a, op, b, c, op2, d, conj) => {
                if conj {
                    test(a, op, b) && test(c, op2, d)
                } else {
                    test(a, op, b) || test(c, op2, d)
                }
            }
            Target::Noise => rng.gen_bool(0.5),
        };
        rows.push(TraceRow { test: format!("t{r}"), eval: 0, inputs, expected });
    }
    TraceMatrix { location: Location(1), kind: RepairKind::ConditionUpdate, columns, rows, conflicting: false }
}

/// Evaluates a decoded expression on every row by compiling it into a MiniLang function.
fn rows_violated(matrix: &TraceMatrix, expr: &str) -> Result<usize, String> {
    let params: Vec<(usize, &Column)> = matrix.columns.iter().enumerate().filter(|(_, c)| !c.constant).collect();
    let signature = params
        .iter()
        .map(|(_, c)| {
            let ty = match c.sort {
                Sort::Bool => "bool",
                Sort::Int => "int",
                _ => "real",
            };
            format!("{}: {ty}", c.name)
        })
        .collect::<Vec<_>>()
        .join(", ");
    let source = format!("fn probe({signature}) -> bool {{\n    return {expr};\n}}\n");
    let program = Program::parse(&source).map_err(|e| format!("`{expr}` does not parse: {e}"))?;
    let mut bad = 0;
    for row in &matrix.rows {
        let args = params
            .iter()
            .map(|(i, _)| match row.inputs[*i] {
                Scalar::Bool(b) => Value::Bool(b),
                Scalar::Int(v) => Value::Int(v),
                Scalar::Real(r) => Value::Real(r),
            })
            .collect();
        let result = execute(&program, &Call::new("probe", args), &ExecutionControls::default()).map_err(|e| e.to_string())?;
        if !matches!(result.outcome, Outcome::Returned(Value::Bool(b)) if b == row.expected) {
            bad += 1;
        }
    }
    Ok(bad)
}

struct RandomRun {
    sat: usize,
    unsat: usize,
    skipped: usize,
    soundness: Vec<String>,
    structure: Vec<String>,
}

fn random_solves() -> RandomRun {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let mut run = RandomRun { sat: 0, unsat: 0, skipped: 0, soundness: Vec::new(), structure: Vec::new() };
    for i in 0..200 {
        let level = if i % 2 == 0 { 1 } else { 2 };
        let matrix = deduplicate(&random_matrix(&mut rng, level));
        if matrix.conflicting {
            run.skipped += 1;
            continue;
        }
        let problem = encode(&matrix, &SmtLevel::level(level)).expect("encodable matrix");
        match solve(&problem, &Backend::Internal, SOLVE_TIMEOUT).expect("internal backend") {
            SolveOutcome::Sat(model) => {
                run.sat += 1;
                if let Err(e) = check_structure(&problem, &model) {
                    run.structure.push(format!("matrix {i}: {e}"));
                    continue;
                }
                let expr = decode(&problem, &model).expect("decodable model").to_string();
                match rows_violated(&matrix, &expr) {
                    Ok(0) => {}
                    Ok(n) => run.soundness.push(format!("matrix {i}: `{expr}` misses {n} rows")),
                    Err(e) => run.soundness.push(format!("matrix {i}: {e}")),
                }
            }
            SolveOutcome::Unsat | SolveOutcome::Timeout => run.unsat += 1,
        }
    }
    run
}

fn criterion_soundness(run: &RandomRun) -> Verdict {
    if run.sat == 0 {
        return Err("no satisfiable matrix generated".into());
    }
    if !run.soundness.is_empty() {
        return Err(format!("{} violations, first: {}", run.soundness.len(), run.soundness[0]));
    }
    Ok(format!("{} sat, {} unsat, {} conflicting of 200; 0 violations", run.sat, run.unsat, run.skipped))
}

fn criterion_structure(run: &RandomRun) -> Verdict {
    if !run.structure.is_empty() {
        return Err(format!("{} malformed models, first: {}", run.structure.len(), run.structure[0]));
    }
    Ok(format!("{} sat models well formed", run.sat))
}

fn criterion_oracle_agreement() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let level = SmtLevel::level(1);
    let (mut found, mut tried) = (0, 0);
    while found < 100 {
        tried += 1;
        if tried > 5_000 {
            return Err(format!("only {found} oracle-positive matrices in {tried} draws"));
        }
        let matrix = deduplicate(&random_matrix(&mut rng, 1));
        if matrix.conflicting {
            continue;
        }
        let Some(expected) = enumerate_oracle(&matrix, &level, 5) else { continue };
        found += 1;
        let problem = encode(&matrix, &level).expect("encodable matrix");
        match solve(&problem, &Backend::Internal, SOLVE_TIMEOUT).expect("internal backend") {
            SolveOutcome::Sat(_) => {}
            other => return Err(format!("oracle found `{expected}` but solve gave {other:?}")),
        }
    }
    Ok(format!("{found} oracle-positive matrices, 0 disagreements ({tried} draws)"))
}

fn spectrum(counts: &[(u32, u32)], total_failed: u32, total_passed: u32) -> Spectrum {
    Spectrum {
        counts: counts.iter().map(|&(failed, passed)| Counts { failed, passed }).collect(),
        total_failed,
        total_passed,
    }
}

fn random_spectrum(rng: &mut ChaCha8Rng) -> Spectrum {
    let total_failed = rng.gen_range(1..=5);
    let total_passed = rng.gen_range(0..=10);
    let n = rng.gen_range(3..=15);
    let counts: Vec<(u32, u32)> =
        (0..n).map(|_| (rng.gen_range(0..=total_failed), rng.gen_range(0..=total_passed))).collect();
    spectrum(&counts, total_failed, total_passed)
}

fn criterion_metrics() -> Verdict {
    let unit = [
        (spectrum(&[(3, 0)], 3, 5), 1.0),
        (spectrum(&[(0, 4)], 3, 5), 0.0),
        (spectrum(&[(1, 3)], 1, 3), 0.5),
    ];
    for (s, want) in &unit {
        let got = suspiciousness(Metric::Ochiai, s, Location(1));
        if (got - want).abs() > 1e-12 {
            return Err(format!("ochiai {:?} gave {got}, want {want}", s.counts[0]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut unique_max = 0;
    for _ in 0..50 {
        let s = random_spectrum(&mut rng);
        for metric in Metric::ALL {
            let base = scores(metric, &s);
            let shifted: Vec<(Location, f64)> = base.iter().map(|&(l, x)| (l, 2.0 * x + 1.0)).collect();
            for &(loc, score) in &base {
                let before = wasted_effort_from_scores(&base, loc);
                let after = wasted_effort_from_scores(&shifted, loc);
                if before != after {
                    return Err(format!("{} effort of {loc} moved from {before} to {after}", metric.name()));
                }
                let unique = base.iter().all(|&(other, x)| other == loc || (x < score && !scores_tied(x, score)));
                if unique {
                    unique_max += 1;
                    if before != 1 {
                        return Err(format!("{} unique maximum {loc} has effort {before}", metric.name()));
                    }
                }
            }
        }
    }
    Ok(format!("unit values hold; 50 spectra x 6 metrics invariant; {unique_max} unique maxima at effort 1"))
}

fn criterion_running_example() -> Verdict {
    let columns = vec![
        Column { name: "i0".into(), sort: Sort::Int, constant: false },
        Column { name: "false".into(), sort: Sort::Bool, constant: true },
        Column { name: "3".into(), sort: Sort::Int, constant: true },
    ];
    let rows = [1, 5, -2]
        .iter()
        .enumerate()
        .map(|(r, v)| TraceRow {
            test: format!("t{r}"),
            eval: 0,
            inputs: vec![Scalar::Int(*v), Scalar::Bool(false), Scalar::Int(3)],
            expected: true,
        })
        .collect();
    let matrix = TraceMatrix { location: Location(1), kind: RepairKind::ConditionUpdate, columns, rows, conflicting: false };
    let level = SmtLevel::custom(vec![
        ComponentSpec { op: Op::Not, label: Some("f1".into()), inputs: Some(vec![Sort::Bool]) },
        ComponentSpec { op: Op::Le, label: Some("f2".into()), inputs: None },
    ]);
    let problem = encode(&matrix, &level).map_err(|e| e.to_string())?;
    let SolveOutcome::Sat(model) = solve(&problem, &Backend::Internal, SOLVE_TIMEOUT).map_err(|e| e.to_string())? else {
        return Err("running example is not sat".into());
    };
    let expr = decode(&problem, &model).map_err(|e| e.to_string())?;
    let reference = Model { inputs: vec![1, 2, 3], result: 5, outputs: vec![4, 5], args: vec![vec![2], vec![1, 1]] };
    let printed = decode(&problem, &reference).map_err(|e| e.to_string())?.to_string();
    if printed != "f2(i0, i0)" {
        return Err(format!("reference model prints `{printed}`"));
    }
    // f2 is `<=`, so the reference expression is true on every row.
    if !problem.rows.iter().all(|r| expr.eval(&r.inputs).and_then(|v| v.as_bool()) == Some(true)) {
        return Err(format!("`{expr}` is not row-equivalent to f2(i0, i0)"));
    }
    if model == reference && expr.to_string() != "f2(i0, i0)" {
        return Err(format!("reference model from solver printed `{expr}`"));
    }
    Ok(format!("sat, decoded `{expr}`; reference model prints `{printed}`"))
}

fn criterion_angelic(bundles: &[BugBundle]) -> Verdict {
    let config = HarnessConfig::default().repair;
    let (mut tuples, mut violations) = (0, Vec::new());
    for b in bundles {
        let report = repair(&b.program, &b.suite, &config).map_err(|e| format!("{}: {e}", b.id))?;
        for log in &report.locations {
            let Some(kind) = log.kind else { continue };
            for tuple in &log.angelic {
                tuples += 1;
                let test = b.suite.get(&tuple.test).ok_or_else(|| format!("{}: unknown test {}", b.id, tuple.test))?;
                let (_, passed) =
                    run_test(&b.program, test, &tuple.controls(kind, config.step_budget)).map_err(|e| e.to_string())?;
                if !passed {
                    violations.push(format!("{} {:?}", b.id, tuple));
                }
            }
        }
    }
    if tuples == 0 {
        return Err("no angelic tuples logged".into());
    }
    if !violations.is_empty() {
        return Err(format!("{} violations, first: {}", violations.len(), violations[0]));
    }
    Ok(format!("{tuples} tuples across {} bundles, 0 violations", bundles.len()))
}

fn criterion_determinism(first: &HarnessReport) -> Verdict {
    let second = run_corpus();
    let (a, b) = (first.to_csv(), second.to_csv());
    if a != b {
        let line = a.lines().zip(b.lines()).find(|(x, y)| x != y).map(|(x, _)| x.to_string()).unwrap_or_default();
        return Err(format!("reports differ, first at `{line}`"));
    }
    Ok(format!("{} bytes identical across two runs", a.len()))
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() -> ExitCode {
    let bundles = load_bundles();
    let report = run_corpus();
    let random = catch_unwind(random_solves).map_err(|_| "random solving panicked".to_string());

    let mut results: BTreeMap<u8, (&str, Verdict)> = BTreeMap::new();
    results.insert(1, ("corpus repairability", guarded(|| criterion_repairability(&report, &bundles))));
    results.insert(2, ("limitation fidelity", guarded(|| criterion_limitations(&report))));
    results.insert(3, ("grid equivalence", guarded(|| criterion_grid_equivalence(&report, &bundles))));
    let (soundness, structure) = match &random {
        Ok(run) => (guarded(|| criterion_soundness(run)), guarded(|| criterion_structure(run))),
        Err(e) => (Err(e.clone()), Err(e.clone())),
    };
    results.insert(4, ("synthesis soundness", soundness));
    results.insert(5, ("oracle agreement", guarded(criterion_oracle_agreement)));
    results.insert(6, ("model structure", structure));
    results.insert(7, ("metric values and effort", guarded(criterion_metrics)));
    results.insert(8, ("running example", guarded(criterion_running_example)));
    results.insert(9, ("angelic soundness", guarded(|| criterion_angelic(&bundles))));
    results.insert(10, ("determinism", guarded(|| criterion_determinism(&report))));

    let mut failed = 0;
    for (n, (name, verdict)) in &results {
        match verdict {
            Ok(detail) => println!("criterion {n:>2} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

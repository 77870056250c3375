use std::path::Path;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use condfix_core::angelic::{angelic_search, AngelicOutcome};
use condfix_core::corpus::{run_harness, BugBundle, HarnessConfig};
use condfix_core::faultloc::{build_spectrum, rank};
use condfix_core::minilang::ExecutionControls;
use condfix_core::synth::{encode, solve, SmtLevel};
use condfix_core::testkit::run_suite;
use condfix_core::trace::{collect, deduplicate};
use condfix_core::{repair, Backend, Metric, RepairConfig};

fn bundle(id: &str) -> BugBundle {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus")).join(id);
    BugBundle::load(&dir).expect("bundle loads")
}

fn end_to_end(c: &mut Criterion) {
    let mut group = c.benchmark_group("repair");
    group.sample_size(10);
    for id in ["CM2", "CM5", "PL4", "PM2"] {
        let b = bundle(id);
        group.bench_with_input(BenchmarkId::from_parameter(id), &b, |bench, b| {
            bench.iter(|| repair(&b.program, &b.suite, &RepairConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn localization(c: &mut Criterion) {
    let b = bundle("CL4");
    c.bench_function("localize/CL4", |bench| {
        bench.iter(|| {
            let result = run_suite(&b.program, &b.suite, &ExecutionControls::default()).unwrap();
            rank(&build_spectrum(&result).unwrap(), Metric::Ochiai)
        })
    });
}

fn synthesis(c: &mut Criterion) {
    let b = bundle("CM5");
    let report = repair(&b.program, &b.suite, &RepairConfig::default()).unwrap();
    let patch = report.patch().expect("bundle is fixable");
    let failing: Vec<&str> = report.failing_tests.iter().map(String::as_str).collect();
    let budget = RepairConfig::default().step_budget;
    let search = angelic_search(&b.program, &b.suite, &failing, patch.location, patch.kind, budget).unwrap();
    let AngelicOutcome::Found(tuples) = search.outcome else { panic!("no angelic values") };
    let matrix = deduplicate(&collect(&b.program, &b.suite, &failing, patch.location, patch.kind, &tuples, budget).unwrap());
    let mut group = c.benchmark_group("solve_internal");
    for level in 1..=2u8 {
        let problem = encode(&matrix, &SmtLevel::level(level)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(level), &problem, |bench, p| {
            bench.iter(|| solve(p, &Backend::Internal, Duration::from_secs(60)).unwrap())
        });
    }
    group.finish();
}

fn harness(c: &mut Criterion) {
    let bundles: Vec<BugBundle> = ["CM1", "CL4", "SEED01", "SEED10"].into_iter().map(bundle).collect();
    let mut group = c.benchmark_group("harness");
    group.sample_size(10);
    group.bench_function("four_bundles", |bench| bench.iter(|| run_harness(&bundles, &HarnessConfig::default())));
    group.finish();
}

criterion_group!(benches, end_to_end, localization, synthesis, harness);
criterion_main!(benches);

//! Bug bundles, grid-based equivalence checking, the evaluation harness and
//! a mutation seeder for synthetic conditional bugs.
//!
//! A bundle is a directory holding `program.ml`, `suite.txt`,
//! `human_patch.txt` and `meta.txt` (the last two in TOML).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faultloc::{build_spectrum, effort_table, wasted_effort, EffortRow, EffortSample, Metric};
use crate::minilang::{
    eval_constant, execute, parse_expr, printer::expr_to_string, BinaryOp, Call, ExecutionControls, Expr, Literal,
    Location, Outcome, Patch, Program, ProgramError, RepairKind, StmtKind, DEFAULT_STEP_BUDGET,
};
use crate::pipeline::{repair, validate_with_budget, NoPatchReason, RepairConfig, RepairOutcome};
use crate::testkit::{run_suite, run_test, values_match, Suite, SuiteError};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}: {message}")]
    Format { file: String, message: String },
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error("bundle {0}: buggy program has no failing test")]
    NoFailingTest(String),
    #[error("bundle {0}: human patch does not pass the suite")]
    HumanPatchInvalid(String),
}

/// One axis of an input grid: an inclusive integer range or a list of
/// constant MiniLang expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridAxis {
    Range { from: i64, to: i64 },
    Values { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub function: String,
    pub axes: Vec<GridAxis>,
    /// Extra points beyond the cartesian product, one expression per argument.
    #[serde(default)]
    pub extra: Vec<Vec<String>>,
}

impl GridSpec {
    /// Every grid point as a call, product points first, in odometer order.
    pub fn calls(&self) -> Result<Vec<Call>, String> {
        let constant = |s: &str| -> Result<crate::minilang::Value, String> {
            let e = parse_expr(s).map_err(|e| format!("`{s}`: {e}"))?;
            eval_constant(&e).map_err(|e| format!("`{s}`: {e}"))
        };
        let mut axes = Vec::new();
        for axis in &self.axes {
            axes.push(match axis {
                GridAxis::Range { from, to } => (*from..=*to).map(crate::minilang::Value::Int).collect::<Vec<_>>(),
                GridAxis::Values { values } => values.iter().map(|v| constant(v)).collect::<Result<_, _>>()?,
            });
        }
        let total: usize = if axes.is_empty() { 0 } else { axes.iter().map(Vec::len).product() };
        let mut calls = Vec::with_capacity(total + self.extra.len());
        for mut n in 0..total {
            let mut args = Vec::with_capacity(axes.len());
            for axis in axes.iter().rev() {
                args.push(axis[n % axis.len()].clone());
                n /= axis.len();
            }
            args.reverse();
            calls.push(Call::new(&self.function, args));
        }
        for point in &self.extra {
            calls.push(Call::new(&self.function, point.iter().map(|v| constant(v)).collect::<Result<_, _>>()?));
        }
        Ok(calls)
    }
}

/// Reads a standalone grid file.
pub fn parse_grid(text: &str) -> Result<GridSpec, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Port,
    Seeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectedTag {
    Fixable,
    Limitation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub id: String,
    pub origin: Origin,
    #[serde(default)]
    pub description: String,
    pub expected: ExpectedTag,
    /// Acceptable reasons for a limitation bundle.
    #[serde(default)]
    pub reasons: Vec<String>,
    pub grid: Option<GridSpec>,
}

/// Expected result of running the pipeline on a bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    Fixable,
    KnownLimitation(Vec<NoPatchReason>),
}

impl Expected {
    pub fn label(&self) -> String {
        match self {
            Expected::Fixable => "fixable".into(),
            Expected::KnownLimitation(r) => {
                format!("limitation({})", r.iter().map(|r| r.name()).collect::<Vec<_>>().join("|"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HumanPatchFile {
    kind: String,
    location: u32,
    expression: String,
}

#[derive(Debug, Clone)]
pub struct BugBundle {
    pub id: String,
    pub origin: Origin,
    pub description: String,
    pub source: String,
    pub program: Program,
    pub suite: Suite,
    pub human: Patch,
    pub expected: Expected,
    pub grid: Option<GridSpec>,
}

fn read(dir: &Path, name: &str) -> Result<String, BundleError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|source| BundleError::Io { path, source })
}

fn format_err(file: &str, message: impl ToString) -> BundleError {
    BundleError::Format { file: file.into(), message: message.to_string() }
}

impl BugBundle {
    /// Builds a bundle from file contents.
    pub fn from_texts(program: &str, suite: &str, human_patch: &str, meta: &str) -> Result<BugBundle, BundleError> {
        let meta: BundleMeta = toml::from_str(meta).map_err(|e| format_err("meta.txt", e))?;
        let human: HumanPatchFile = toml::from_str(human_patch).map_err(|e| format_err("human_patch.txt", e))?;
        let kind = RepairKind::from_name(&human.kind)
            .ok_or_else(|| format_err("human_patch.txt", format!("unknown kind `{}`", human.kind)))?;
        let expr = parse_expr(&human.expression).map_err(|e| format_err("human_patch.txt", e))?;
        let expected = match meta.expected {
            ExpectedTag::Fixable => Expected::Fixable,
            ExpectedTag::Limitation => Expected::KnownLimitation(
                meta.reasons
                    .iter()
                    .map(|r| NoPatchReason::from_name(r).ok_or_else(|| format_err("meta.txt", format!("unknown reason `{r}`"))))
                    .collect::<Result<_, _>>()?,
            ),
        };
        Ok(BugBundle {
            id: meta.id,
            origin: meta.origin,
            description: meta.description,
            source: program.to_string(),
            program: Program::parse(program)?,
            suite: Suite::parse(suite)?,
            human: Patch { kind, location: Location(human.location), expr },
            expected,
            grid: meta.grid,
        })
    }

    pub fn load(dir: &Path) -> Result<BugBundle, BundleError> {
        BugBundle::from_texts(
            &read(dir, "program.ml")?,
            &read(dir, "suite.txt")?,
            &read(dir, "human_patch.txt")?,
            &read(dir, "meta.txt")?,
        )
    }

    /// Writes the bundle's four files into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), BundleError> {
        let io = |path: PathBuf| move |source| BundleError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let human = HumanPatchFile {
            kind: self.human.kind.name().into(),
            location: self.human.location.0,
            expression: expr_to_string(&self.human.expr),
        };
        let (expected, reasons) = match &self.expected {
            Expected::Fixable => (ExpectedTag::Fixable, vec![]),
            Expected::KnownLimitation(r) => (ExpectedTag::Limitation, r.iter().map(|r| r.name().to_string()).collect()),
        };
        let meta = BundleMeta {
            id: self.id.clone(),
            origin: self.origin,
            description: self.description.clone(),
            expected,
            reasons,
            grid: self.grid.clone(),
        };
        let files = [
            ("program.ml", self.source.clone()),
            ("suite.txt", self.suite.to_string()),
            ("human_patch.txt", toml::to_string(&human).map_err(|e| format_err("human_patch.txt", e))?),
            ("meta.txt", toml::to_string(&meta).map_err(|e| format_err("meta.txt", e))?),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io(path.clone()))?;
        }
        Ok(())
    }

    /// The buggy program must fail at least one test and the human patch
    /// must pass them all.
    pub fn self_check(&self) -> Result<(), BundleError> {
        let base = run_suite(&self.program, &self.suite, &ExecutionControls::default())?;
        if base.failing().is_empty() {
            return Err(BundleError::NoFailingTest(self.id.clone()));
        }
        if !validate_with_budget(&self.program, &self.human, &self.suite, DEFAULT_STEP_BUDGET) {
            return Err(BundleError::HumanPatchInvalid(self.id.clone()));
        }
        Ok(())
    }
}

/// Loads every bundle directory under `root`, sorted by directory name.
/// Directories without a `meta.txt` are ignored.
pub fn load_corpus(root: &Path) -> Result<Vec<(String, Result<BugBundle, BundleError>)>, BundleError> {
    let entries = fs::read_dir(root).map_err(|source| BundleError::Io { path: root.to_path_buf(), source })?;
    let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join("meta.txt").is_file()).collect();
    dirs.sort();
    Ok(dirs
        .into_iter()
        .map(|d| (d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(), BugBundle::load(&d)))
        .collect())
}

fn outcomes_agree(a: &Outcome, b: &Outcome) -> bool {
    match (a, b) {
        (Outcome::Returned(x), Outcome::Returned(y)) => values_match(x, y),
        (Outcome::Failed(x), Outcome::Failed(y)) => x.kind == y.kind,
        (Outcome::BudgetExhausted, Outcome::BudgetExhausted) => true,
        _ => false,
    }
}

/// Number of grid points on which the two programs disagree. A point
/// exhausting the step budget on one side only counts as a disagreement.
pub fn grid_disagreements(a: &Program, b: &Program, calls: &[Call], step_budget: u64) -> Result<usize, ProgramError> {
    let controls = ExecutionControls::with_budget(step_budget);
    let mut bad = 0;
    for call in calls {
        let x = execute(a, call, &controls)?;
        let y = execute(b, call, &controls)?;
        if !outcomes_agree(&x.outcome, &y.outcome) {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Whether the two programs return the same value or error class on every
/// grid point.
pub fn check_equivalence(a: &Program, b: &Program, calls: &[Call]) -> Result<bool, ProgramError> {
    Ok(grid_disagreements(a, b, calls, DEFAULT_STEP_BUDGET)? == 0)
}

#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub repair: RepairConfig,
    pub effort_metrics: Vec<Metric>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig { repair: RepairConfig::default(), effort_metrics: Metric::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRow {
    pub id: String,
    pub origin: String,
    pub expected: String,
    /// `patched`, `no_patch` or `error`.
    pub outcome: String,
    pub reason: Option<String>,
    pub as_expected: bool,
    pub kind: Option<String>,
    pub location: Option<u32>,
    pub human_kind: String,
    pub human_location: u32,
    pub same_location: Option<bool>,
    pub rank: Option<usize>,
    pub level: Option<u8>,
    pub expression: Option<String>,
    pub grid_points: usize,
    pub grid_equivalent: Option<bool>,
    pub angelic_tuples: usize,
    pub angelic_violations: usize,
    pub effort: Vec<(Metric, usize)>,
    pub error: Option<String>,
    pub millis: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub rows: Vec<BundleRow>,
}

fn error_row(id: &str, message: String) -> BundleRow {
    BundleRow {
        id: id.into(),
        origin: String::new(),
        expected: String::new(),
        outcome: "error".into(),
        reason: None,
        as_expected: false,
        kind: None,
        location: None,
        human_kind: String::new(),
        human_location: 0,
        same_location: None,
        rank: None,
        level: None,
        expression: None,
        grid_points: 0,
        grid_equivalent: None,
        angelic_tuples: 0,
        angelic_violations: 0,
        effort: vec![],
        error: Some(message),
        millis: 0,
    }
}

/// Runs the pipeline on one bundle and checks its result.
pub fn run_bundle(bundle: &BugBundle, config: &HarnessConfig) -> BundleRow {
    let start = Instant::now();
    let mut row = error_row(&bundle.id, String::new());
    row.error = None;
    row.origin = match bundle.origin {
        Origin::Port => "port".into(),
        Origin::Seeded => "seeded".into(),
    };
    row.expected = bundle.expected.label();
    row.human_kind = bundle.human.kind.name().into();
    row.human_location = bundle.human.location.0;
    if let Err(e) = bundle.self_check() {
        row.error = Some(e.to_string());
        return row;
    }
    let budget = config.repair.step_budget;
    if let Ok(base) = run_suite(&bundle.program, &bundle.suite, &ExecutionControls::with_budget(budget)) {
        if let Ok(spectrum) = build_spectrum(&base) {
            row.effort = config.effort_metrics.iter().map(|m| (*m, wasted_effort(&spectrum, *m, bundle.human.location))).collect();
        }
    }
    let report = match repair(&bundle.program, &bundle.suite, &config.repair) {
        Ok(r) => r,
        Err(e) => {
            row.outcome = "error".into();
            row.error = Some(e.to_string());
            row.millis = start.elapsed().as_millis() as u64;
            return row;
        }
    };
    for log in &report.locations {
        let Some(kind) = log.kind else { continue };
        for tuple in &log.angelic {
            row.angelic_tuples += 1;
            let passes = bundle
                .suite
                .get(&tuple.test)
                .and_then(|t| run_test(&bundle.program, t, &tuple.controls(kind, budget)).ok())
                .is_some_and(|(_, ok)| ok);
            if !passes {
                row.angelic_violations += 1;
            }
        }
    }
    match &report.outcome {
        RepairOutcome::Patched { location, kind, expression, level, rank } => {
            row.outcome = "patched".into();
            row.kind = Some(kind.name().into());
            row.location = Some(location.0);
            row.same_location = Some(*location == bundle.human.location);
            row.rank = Some(*rank);
            row.level = Some(*level);
            row.expression = Some(expression.clone());
            row.as_expected = bundle.expected == Expected::Fixable;
            if let (Some(grid), Some(patch)) = (&bundle.grid, report.patch()) {
                match grid.calls() {
                    Ok(calls) => {
                        row.grid_points = calls.len();
                        let ours = bundle.program.apply_patch(&patch);
                        let theirs = bundle.program.apply_patch(&bundle.human);
                        match (ours, theirs) {
                            (Ok(a), Ok(b)) => match grid_disagreements(&a, &b, &calls, budget) {
                                Ok(n) => row.grid_equivalent = Some(n == 0),
                                Err(e) => row.error = Some(e.to_string()),
                            },
                            (Err(e), _) | (_, Err(e)) => row.error = Some(e.to_string()),
                        }
                    }
                    Err(e) => row.error = Some(format!("grid: {e}")),
                }
            }
        }
        RepairOutcome::NoPatch { reason } => {
            row.outcome = "no_patch".into();
            row.reason = Some(reason.name().into());
            row.as_expected = matches!(&bundle.expected, Expected::KnownLimitation(r) if r.contains(reason));
        }
    }
    row.millis = start.elapsed().as_millis() as u64;
    row
}

/// Runs every bundle; rows come out sorted by bundle id.
pub fn run_harness(bundles: &[BugBundle], config: &HarnessConfig) -> HarnessReport {
    let mut rows: Vec<BundleRow> = bundles.iter().map(|b| run_bundle(b, config)).collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    HarnessReport { rows }
}

/// Like [`run_harness`], with load failures reported as error rows.
pub fn run_loaded(loaded: Vec<(String, Result<BugBundle, BundleError>)>, config: &HarnessConfig) -> HarnessReport {
    let mut rows: Vec<BundleRow> = loaded
        .into_iter()
        .map(|(name, b)| match b {
            Ok(b) => run_bundle(&b, config),
            Err(e) => error_row(&name, e.to_string()),
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    HarnessReport { rows }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

impl HarnessReport {
    pub fn fixed(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome == "patched").count()
    }

    pub fn row(&self, id: &str) -> Option<&BundleRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    /// Per-bundle results without timings, so that repeated runs compare
    /// byte for byte.
    pub fn to_csv(&self) -> String {
        let metrics: Vec<Metric> = self.rows.iter().find(|r| !r.effort.is_empty()).map(|r| r.effort.iter().map(|e| e.0).collect()).unwrap_or_default();
        let mut out = String::from(
            "id,origin,expected,outcome,reason,as_expected,kind,location,human_kind,human_location,same_location,rank,level,expression,grid_points,grid_equivalent,angelic_tuples,angelic_violations",
        );
        for m in &metrics {
            let _ = write!(out, ",effort_{}", m.name().to_ascii_lowercase());
        }
        out.push_str(",error\n");
        for r in &self.rows {
            let fields = [
                r.id.clone(),
                r.origin.clone(),
                r.expected.clone(),
                r.outcome.clone(),
                opt(&r.reason),
                r.as_expected.to_string(),
                opt(&r.kind),
                opt(&r.location),
                r.human_kind.clone(),
                r.human_location.to_string(),
                opt(&r.same_location),
                opt(&r.rank),
                opt(&r.level),
                opt(&r.expression),
                r.grid_points.to_string(),
                opt(&r.grid_equivalent),
                r.angelic_tuples.to_string(),
                r.angelic_violations.to_string(),
            ];
            out.push_str(&fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
            for m in &metrics {
                let v = r.effort.iter().find(|e| e.0 == *m).map(|e| e.1.to_string()).unwrap_or_default();
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", csv_field(&opt(&r.error)));
        }
        out
    }

    /// Wall time per bundle in milliseconds.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("id,millis\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{}", csv_field(&r.id), r.millis);
        }
        out
    }

    /// Wasted effort aggregated per metric and bug type.
    pub fn effort_rows(&self) -> Vec<EffortRow> {
        let samples: Vec<EffortSample> = self
            .rows
            .iter()
            .flat_map(|r| {
                r.effort.iter().map(move |(m, e)| EffortSample { metric: *m, bug_type: r.human_kind.clone(), effort: *e })
            })
            .collect();
        effort_table(&samples)
    }
}

/// A seeded change to one if-condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutant {
    pub location: Location,
    pub operator: &'static str,
    pub original: Expr,
    pub mutated: Expr,
}

fn mutations(e: &Expr) -> Vec<(&'static str, Expr)> {
    let mut out = Vec::new();
    if let Expr::Binary(op, a, b) = e {
        let swap = |new: BinaryOp| Expr::Binary(new, a.clone(), b.clone());
        match op {
            BinaryOp::Lt => out.push(("relational", swap(BinaryOp::Le))),
            BinaryOp::Le => out.push(("relational", swap(BinaryOp::Lt))),
            BinaryOp::Gt => out.push(("relational", swap(BinaryOp::Ge))),
            BinaryOp::Ge => out.push(("relational", swap(BinaryOp::Gt))),
            BinaryOp::Eq => out.push(("equality", swap(BinaryOp::Ne))),
            BinaryOp::Ne => out.push(("equality", swap(BinaryOp::Eq))),
            BinaryOp::And => out.push(("logical", swap(BinaryOp::Or))),
            BinaryOp::Or => out.push(("logical", swap(BinaryOp::And))),
            _ => {}
        }
        let comparison = matches!(op, BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne);
        if comparison {
            for (side, lit) in [(0, a), (1, b)] {
                if let Expr::Lit(Literal::Int(c)) = **lit {
                    for d in [1, -1] {
                        let shifted = Box::new(Expr::Lit(Literal::Int(c + d)));
                        let m = if side == 0 { Expr::Binary(*op, shifted, b.clone()) } else { Expr::Binary(*op, a.clone(), shifted) };
                        out.push(("boundary", m));
                    }
                }
            }
        }
        for (x, y) in mutations(a) {
            out.push((x, Expr::Binary(*op, Box::new(y), b.clone())));
        }
        for (x, y) in mutations(b) {
            out.push((x, Expr::Binary(*op, a.clone(), Box::new(y))));
        }
    } else if let Expr::Unary(op, a) = e {
        for (x, y) in mutations(a) {
            out.push((x, Expr::Unary(*op, Box::new(y))));
        }
    }
    out
}

/// Every single-point mutation of every if-condition, in location order.
pub fn seed_mutants(program: &Program) -> Vec<Mutant> {
    let mut out = Vec::new();
    for loc in program.locations() {
        let Ok(stmt) = program.statement(loc) else { continue };
        if let StmtKind::If { cond, .. } = &stmt.kind {
            for (operator, mutated) in mutations(cond) {
                out.push(Mutant { location: loc, operator, original: cond.clone(), mutated });
            }
        }
    }
    out
}

/// Turns a mutant of a correct program into a bundle whose human patch
/// restores the original condition. `None` when no test detects the
/// mutant.
pub fn seed_bundle(id: &str, correct: &Program, suite: &Suite, mutant: &Mutant, grid: Option<GridSpec>) -> Option<BugBundle> {
    let buggy = correct
        .apply_patch(&Patch { kind: RepairKind::ConditionUpdate, location: mutant.location, expr: mutant.mutated.clone() })
        .ok()?;
    let base = run_suite(&buggy, suite, &ExecutionControls::default()).ok()?;
    if base.failing().is_empty() {
        return None;
    }
    let bundle = BugBundle {
        id: id.into(),
        origin: Origin::Seeded,
        description: format!(
            "{} mutation at {}: `{}` became `{}`",
            mutant.operator,
            mutant.location,
            expr_to_string(&mutant.original),
            expr_to_string(&mutant.mutated)
        ),
        source: buggy.to_string(),
        program: buggy,
        suite: suite.clone(),
        human: Patch { kind: RepairKind::ConditionUpdate, location: mutant.location, expr: mutant.original.clone() },
        expected: Expected::Fixable,
        grid,
    };
    bundle.self_check().ok()?;
    Some(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAX: &str = "fn max(a: int, b: int) -> int {
    if (a > b) {
        return a;
    }
    return b;
}
";

    #[test]
    fn grid_product_order_and_extras() {
        let grid = GridSpec {
            function: "f".into(),
            axes: vec![GridAxis::Range { from: 0, to: 1 }, GridAxis::Values { values: vec!["null".into(), "\"a\"".into()] }],
            extra: vec![vec!["7".into(), "null".into()]],
        };
        let calls = grid.calls().unwrap();
        assert_eq!(calls.len(), 5);
        assert_eq!(calls[1].to_string(), "f(0, \"a\")");
        assert_eq!(calls[2].to_string(), "f(1, null)");
        assert_eq!(calls[4].to_string(), "f(7, null)");
    }

    #[test]
    fn identical_programs_are_equivalent() {
        let p = Program::parse(MAX).unwrap();
        let grid = GridSpec { function: "max".into(), axes: vec![GridAxis::Range { from: -3, to: 3 }; 2], extra: vec![] };
        assert!(check_equivalence(&p, &p, &grid.calls().unwrap()).unwrap());
    }

    #[test]
    fn boundary_mutant_differs_only_where_it_matters() {
        let p = Program::parse(MAX).unwrap();
        let q = p
            .apply_patch(&Patch { kind: RepairKind::ConditionUpdate, location: Location(1), expr: parse_expr("a >= b").unwrap() })
            .unwrap();
        let grid = GridSpec { function: "max".into(), axes: vec![GridAxis::Range { from: -3, to: 3 }; 2], extra: vec![] };
        assert!(check_equivalence(&p, &q, &grid.calls().unwrap()).unwrap());
        let r = p
            .apply_patch(&Patch { kind: RepairKind::ConditionUpdate, location: Location(1), expr: parse_expr("a < b").unwrap() })
            .unwrap();
        assert_eq!(grid_disagreements(&p, &r, &grid.calls().unwrap(), 1000).unwrap(), 42);
    }

    #[test]
    fn mutants_cover_operator_classes() {
        let p = Program::parse("fn f(x: int, y: int) -> bool {\n    if (x < 3 && y != 0) {\n        return true;\n    }\n    return false;\n}\n").unwrap();
        let ms = seed_mutants(&p);
        let shown: Vec<String> = ms.iter().map(|m| format!("{}:{}", m.operator, expr_to_string(&m.mutated))).collect();
        assert_eq!(
            shown,
            vec![
                "logical:x < 3 || y != 0",
                "relational:x <= 3 && y != 0",
                "boundary:x < 4 && y != 0",
                "boundary:x < 2 && y != 0",
                "equality:x < 3 && y == 0",
                "boundary:x < 3 && y != 1",
                "boundary:x < 3 && y != -1",
            ]
        );
    }

    #[test]
    fn seeded_bundle_restores_original() {
        let p = Program::parse(MAX).unwrap();
        let suite = Suite::parse("test t1 max(1, 2) expect 2\ntest t2 max(5, 3) expect 5\ntest t3 max(4, 4) expect 4\n").unwrap();
        let ms = seed_mutants(&p);
        let b = seed_bundle("S1", &p, &suite, &ms[0], None);
        assert!(b.is_none(), "a >= b is not detected by the suite");
        let suite = Suite::parse("test t1 max(1, 2) expect 2\ntest t2 max(5, 3) expect 5\n").unwrap();
        let flip = Mutant { location: Location(1), operator: "relational", original: parse_expr("a > b").unwrap(), mutated: parse_expr("a < b").unwrap() };
        let b = seed_bundle("S2", &p, &suite, &flip, None).unwrap();
        b.self_check().unwrap();
        assert_eq!(expr_to_string(&b.human.expr), "a > b");
    }

    #[test]
    fn bundle_round_trips_through_files() {
        let p = Program::parse(MAX).unwrap();
        let suite = Suite::parse("test t1 max(1, 2) expect 2\ntest t2 max(5, 3) expect 5\n").unwrap();
        let flip = Mutant { location: Location(1), operator: "relational", original: parse_expr("a > b").unwrap(), mutated: parse_expr("a < b").unwrap() };
        let grid = GridSpec { function: "max".into(), axes: vec![GridAxis::Range { from: -2, to: 2 }; 2], extra: vec![] };
        let b = seed_bundle("S2", &p, &suite, &flip, Some(grid)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let back = BugBundle::load(dir.path()).unwrap();
        assert_eq!(back.id, "S2");
        assert_eq!(back.human, b.human);
        assert_eq!(back.program, b.program);
        assert_eq!(back.grid, b.grid);
        assert_eq!(back.expected, Expected::Fixable);
    }

    #[test]
    fn harness_on_empty_list_is_empty() {
        let r = run_harness(&[], &HarnessConfig::default());
        assert!(r.rows.is_empty());
        assert_eq!(r.to_csv().lines().count(), 1);
    }
}

//! End-to-end repair: localize, search angelic values, collect traces,
//! climb the synthesis ladder, apply and validate.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use similar::TextDiff;
use thiserror::Error;

use crate::angelic::{angelic_search, AngelicOutcome, AngelicTuple, NotFoundReason, Trial};
use crate::faultloc::{build_spectrum, rank, Metric};
use crate::minilang::{parse_expr, ExecutionControls, Location, Patch, Program, ProgramError, RepairKind, StatementKind, DEFAULT_STEP_BUDGET};
use crate::synth::{decode, encode, solve, Backend, SmtLevel, SolveOutcome, SynthError};
use crate::testkit::{run_suite, Suite, SuiteError};
use crate::trace::{collect, deduplicate, TraceError};

/// Which repair shapes to attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Condition,
    Precondition,
    /// Condition repair at if statements, precondition repair elsewhere.
    Both,
}

impl Mode {
    /// Repair kind tried at a statement of the given kind, if any.
    pub fn kind_for(self, statement: StatementKind) -> Option<RepairKind> {
        match (self, statement) {
            (Mode::Condition | Mode::Both, StatementKind::IfStatement) => Some(RepairKind::ConditionUpdate),
            (Mode::Precondition | Mode::Both, StatementKind::Plain) => Some(RepairKind::PreconditionAddition),
            _ => None,
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "condition" => Ok(Mode::Condition),
            "precondition" => Ok(Mode::Precondition),
            "both" => Ok(Mode::Both),
            other => Err(format!("unknown mode `{other}` (expected condition, precondition or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairConfig {
    pub mode: Mode,
    pub metric: Metric,
    pub level_timeout: Duration,
    pub global_timeout: Duration,
    pub step_budget: u64,
    pub max_level: u8,
    pub backend: Backend,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            mode: Mode::Both,
            metric: Metric::Ochiai,
            level_timeout: Duration::from_secs(60),
            global_timeout: Duration::from_secs(300),
            step_budget: DEFAULT_STEP_BUDGET,
            max_level: 3,
            backend: Backend::Internal,
        }
    }
}

impl RepairConfig {
    pub fn check(&self) -> Result<(), RepairError> {
        if self.level_timeout.is_zero() || self.global_timeout.is_zero() {
            return Err(RepairError::Config("timeouts must be positive".into()));
        }
        if !(1..=crate::synth::MAX_LEVEL).contains(&self.max_level) {
            return Err(RepairError::Config(format!("max level must be within 1..={}", crate::synth::MAX_LEVEL)));
        }
        if self.step_budget == 0 {
            return Err(RepairError::Config("step budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("no failing test: nothing to repair")]
    NoFailingTest,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error("solver: {0}")]
    Solver(String),
}

/// Why no patch was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NoPatchReason {
    NoAngelicValue,
    ExecutionTimeout,
    ConflictingTrace,
    SynthesisTimeout,
    Exhausted,
}

impl NoPatchReason {
    pub fn name(self) -> &'static str {
        match self {
            NoPatchReason::NoAngelicValue => "NoAngelicValue",
            NoPatchReason::ExecutionTimeout => "ExecutionTimeout",
            NoPatchReason::ConflictingTrace => "ConflictingTrace",
            NoPatchReason::SynthesisTimeout => "SynthesisTimeout",
            NoPatchReason::Exhausted => "Exhausted",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            NoPatchReason::NoAngelicValue,
            NoPatchReason::ExecutionTimeout,
            NoPatchReason::ConflictingTrace,
            NoPatchReason::SynthesisTimeout,
            NoPatchReason::Exhausted,
        ]
        .into_iter()
        .find(|r| r.name() == s)
    }
}

impl fmt::Display for NoPatchReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How far work at one location got.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    NotApplicable,
    NoAngelicValue,
    ExecutionTimeout,
    ConflictingTrace,
    SynthesisFailed,
    Patched,
    OutOfTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelResult {
    Sat,
    Unsat,
    Timeout,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelAttempt {
    pub level: u8,
    pub result: LevelResult,
    pub expression: Option<String>,
    pub validated: Option<bool>,
    pub detail: Option<String>,
    pub millis: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationLog {
    pub location: Location,
    /// 1-based position in the suspiciousness ranking.
    pub rank: usize,
    pub kind: Option<RepairKind>,
    pub stage: Stage,
    pub angelic: Vec<AngelicTuple>,
    pub trials: Vec<Trial>,
    pub trace_rows: usize,
    pub trace_columns: usize,
    pub levels: Vec<LevelAttempt>,
    pub millis: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RepairOutcome {
    Patched { location: Location, kind: RepairKind, expression: String, level: u8, rank: usize },
    NoPatch { reason: NoPatchReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub outcome: RepairOutcome,
    pub metric: Metric,
    pub failing_tests: Vec<String>,
    pub wall_millis: u64,
    pub locations: Vec<LocationLog>,
}

impl RepairReport {
    /// The patch recorded in the report, rebuilt from its printed form.
    pub fn patch(&self) -> Option<Patch> {
        match &self.outcome {
            RepairOutcome::Patched { location, kind, expression, .. } => {
                Some(Patch { kind: *kind, location: *location, expr: parse_expr(expression).ok()? })
            }
            RepairOutcome::NoPatch { .. } => None,
        }
    }

    pub fn reason(&self) -> Option<NoPatchReason> {
        match self.outcome {
            RepairOutcome::NoPatch { reason } => Some(reason),
            RepairOutcome::Patched { .. } => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Whether the patched program passes every test.
pub fn validate(program: &Program, patch: &Patch, suite: &Suite) -> bool {
    validate_with_budget(program, patch, suite, DEFAULT_STEP_BUDGET)
}

pub fn validate_with_budget(program: &Program, patch: &Patch, suite: &Suite, step_budget: u64) -> bool {
    let Ok(patched) = program.apply_patch(patch) else { return false };
    run_suite(&patched, suite, &ExecutionControls::with_budget(step_budget)).is_ok_and(|r| r.all_pass())
}

/// Unified diff between the printed forms of two programs.
pub fn render_diff(before: &Program, after: &Program, path: &str) -> String {
    let (a, b) = (before.to_string(), after.to_string());
    TextDiff::from_lines(&a, &b).unified_diff().context_radius(3).header(&format!("a/{path}"), &format!("b/{path}")).to_string()
}

fn millis(d: Duration) -> u64 {
    d.as_millis().min(u64::MAX as u128) as u64
}

fn stage_reason(stage: Stage) -> Option<NoPatchReason> {
    match stage {
        Stage::NoAngelicValue => Some(NoPatchReason::NoAngelicValue),
        Stage::ExecutionTimeout => Some(NoPatchReason::ExecutionTimeout),
        Stage::ConflictingTrace => Some(NoPatchReason::ConflictingTrace),
        Stage::SynthesisFailed => Some(NoPatchReason::SynthesisTimeout),
        Stage::OutOfTime => Some(NoPatchReason::Exhausted),
        Stage::NotApplicable | Stage::Patched => None,
    }
}

struct Attempt {
    log: LocationLog,
    patch: Option<(Patch, u8)>,
}

fn attempt_location(
    program: &Program,
    suite: &Suite,
    failing: &[&str],
    loc: Location,
    rank_pos: usize,
    config: &RepairConfig,
    deadline: Instant,
) -> Result<Attempt, RepairError> {
    let start = Instant::now();
    let mut log = LocationLog {
        location: loc,
        rank: rank_pos,
        kind: None,
        stage: Stage::NotApplicable,
        angelic: vec![],
        trials: vec![],
        trace_rows: 0,
        trace_columns: 0,
        levels: vec![],
        millis: 0,
    };
    let finish = |mut log: LocationLog, patch: Option<(Patch, u8)>| {
        log.millis = millis(start.elapsed());
        Ok(Attempt { log, patch })
    };
    let Some(kind) = config.mode.kind_for(program.classify(loc)?) else { return finish(log, None) };
    log.kind = Some(kind);

    let search = angelic_search(program, suite, failing, loc, kind, config.step_budget)?;
    log.trials = search.trials;
    let tuples = match search.outcome {
        AngelicOutcome::Found(t) => t,
        AngelicOutcome::NotFound(NotFoundReason::NoValueWorks) => {
            log.stage = Stage::NoAngelicValue;
            return finish(log, None);
        }
        AngelicOutcome::NotFound(NotFoundReason::BudgetExhausted) => {
            log.stage = Stage::ExecutionTimeout;
            return finish(log, None);
        }
    };
    log.angelic = tuples.clone();

    let matrix = match collect(program, suite, failing, loc, kind, &tuples, config.step_budget) {
        Ok(m) => deduplicate(&m),
        Err(TraceError::Program(e)) => return Err(e.into()),
        Err(e) => return Err(RepairError::Solver(e.to_string())),
    };
    log.trace_rows = matrix.rows.len();
    log.trace_columns = matrix.columns.len();
    if matrix.conflicting {
        log.stage = Stage::ConflictingTrace;
        return finish(log, None);
    }

    log.stage = Stage::SynthesisFailed;
    for level_no in 1..=config.max_level {
        let now = Instant::now();
        if now >= deadline {
            log.stage = Stage::OutOfTime;
            break;
        }
        let level = SmtLevel::level(level_no);
        let t0 = Instant::now();
        let mut attempt = LevelAttempt { level: level_no, result: LevelResult::Unsat, expression: None, validated: None, detail: None, millis: 0 };
        let problem = match encode(&matrix, &level) {
            Ok(p) => p,
            Err(e @ (SynthError::EmptyTrace | SynthError::UnsatisfiableByConstruction)) => {
                attempt.detail = Some(e.to_string());
                log.levels.push(attempt);
                break;
            }
            Err(e) => return Err(RepairError::Solver(e.to_string())),
        };
        let budget = config.level_timeout.min(deadline - now);
        match solve(&problem, &config.backend, budget) {
            Ok(SolveOutcome::Sat(model)) => {
                attempt.result = LevelResult::Sat;
                match decode(&problem, &model) {
                    Ok(expr) => {
                        let patch = Patch { kind, location: loc, expr: expr.to_expr() };
                        let ok = expr.matches(&problem) && validate_with_budget(program, &patch, suite, config.step_budget);
                        attempt.expression = Some(expr.to_string());
                        attempt.validated = Some(ok);
                        attempt.millis = millis(t0.elapsed());
                        log.levels.push(attempt);
                        if ok {
                            log.stage = Stage::Patched;
                            return finish(log, Some((patch, level_no)));
                        }
                        continue;
                    }
                    Err(e) => {
                        attempt.result = LevelResult::Error;
                        attempt.detail = Some(e.to_string());
                    }
                }
            }
            Ok(SolveOutcome::Unsat) => attempt.result = LevelResult::Unsat,
            Ok(SolveOutcome::Timeout) => attempt.result = LevelResult::Timeout,
            Err(SynthError::Backend(msg)) => return Err(RepairError::Solver(msg)),
            Err(e) => {
                attempt.result = LevelResult::Error;
                attempt.detail = Some(e.to_string());
            }
        }
        attempt.millis = millis(t0.elapsed());
        log.levels.push(attempt);
    }
    finish(log, None)
}

/// Repairs `program` against `suite`, trying locations in ranking order.
/// The first validated patch wins. Without a patch, the reported reason is
/// the one from the location that got furthest.
pub fn repair(program: &Program, suite: &Suite, config: &RepairConfig) -> Result<RepairReport, RepairError> {
    config.check()?;
    let start = Instant::now();
    let deadline = start + config.global_timeout;
    let baseline = run_suite(program, suite, &ExecutionControls::with_budget(config.step_budget))?;
    let failing = baseline.failing();
    if failing.is_empty() {
        return Err(RepairError::NoFailingTest);
    }
    let spectrum = build_spectrum(&baseline).map_err(|_| RepairError::NoFailingTest)?;
    let ranking = rank(&spectrum, config.metric);

    let mut logs = Vec::new();
    let mut outcome = None;
    let mut worst: Option<NoPatchReason> = None;
    for (pos, loc) in ranking.locations().enumerate() {
        if Instant::now() >= deadline {
            worst = Some(NoPatchReason::Exhausted);
            break;
        }
        let attempt = attempt_location(program, suite, &failing, loc, pos + 1, config, deadline)?;
        let stage = attempt.log.stage;
        logs.push(attempt.log);
        if let Some((patch, level)) = attempt.patch {
            outcome = Some(RepairOutcome::Patched {
                location: loc,
                kind: patch.kind,
                expression: crate::minilang::printer::expr_to_string(&patch.expr),
                level,
                rank: pos + 1,
            });
            break;
        }
        if let Some(r) = stage_reason(stage) {
            worst = Some(worst.map_or(r, |w| w.max(r)));
        }
    }
    let outcome = outcome.unwrap_or(RepairOutcome::NoPatch { reason: worst.unwrap_or(NoPatchReason::NoAngelicValue) });
    Ok(RepairReport {
        outcome,
        metric: config.metric,
        failing_tests: failing.iter().map(|s| s.to_string()).collect(),
        wall_millis: millis(start.elapsed()),
        locations: logs,
    })
}

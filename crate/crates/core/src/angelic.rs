//! Angelic fix localization: forcing conditions and skipping statements on
//! failing tests.

use serde::{Deserialize, Serialize};

use crate::minilang::{ExecutionControls, Location, Outcome, Program, ProgramError, RepairKind, StatementKind};
use crate::testkit::{run_test, Suite, SuiteResult};

/// `(location, value, test)`: running `test` with the condition at
/// `location` forced to `value` (or the statement skipped, with value
/// false) makes it pass.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AngelicTuple {
    pub loc: Location,
    pub val: bool,
    pub test: String,
}

impl AngelicTuple {
    /// Controls that reproduce the tuple for the given repair kind.
    pub fn controls(&self, kind: RepairKind, step_budget: u64) -> ExecutionControls {
        let c = ExecutionControls::with_budget(step_budget);
        match kind {
            RepairKind::ConditionUpdate => c.force(self.loc, self.val),
            RepairKind::PreconditionAddition => c.skip(self.loc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NotFoundReason {
    NoValueWorks,
    /// Every trial that did not pass ran out of steps.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngelicOutcome {
    Found(Vec<AngelicTuple>),
    NotFound(NotFoundReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialResult {
    Passed,
    Failed,
    BudgetExhausted,
}

/// One re-execution of a failing test under a control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub test: String,
    /// Forced condition value; `None` when the statement was skipped.
    pub forced: Option<bool>,
    pub result: TrialResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngelicSearch {
    pub loc: Location,
    pub kind: RepairKind,
    pub outcome: AngelicOutcome,
    pub trials: Vec<Trial>,
}

fn trial(program: &Program, suite: &Suite, test: &str, controls: &ExecutionControls) -> Result<TrialResult, ProgramError> {
    let t = suite.get(test).ok_or_else(|| ProgramError::BadArguments(format!("unknown test `{test}`")))?;
    let (result, passed) = run_test(program, t, controls)?;
    Ok(if passed {
        TrialResult::Passed
    } else if result.outcome == Outcome::BudgetExhausted {
        TrialResult::BudgetExhausted
    } else {
        TrialResult::Failed
    })
}

fn conclude(trials: &[Trial], tuples: Vec<AngelicTuple>, failing: usize) -> AngelicOutcome {
    if tuples.len() == failing {
        return AngelicOutcome::Found(tuples);
    }
    let unsuccessful = trials.iter().filter(|t| t.result != TrialResult::Passed);
    let mut any = false;
    for t in unsuccessful {
        any = true;
        if t.result != TrialResult::BudgetExhausted {
            return AngelicOutcome::NotFound(NotFoundReason::NoValueWorks);
        }
    }
    AngelicOutcome::NotFound(if any { NotFoundReason::BudgetExhausted } else { NotFoundReason::NoValueWorks })
}

fn check_kind(program: &Program, loc: Location, expected: StatementKind) -> Result<(), ProgramError> {
    if program.classify(loc)? != expected {
        return Err(ProgramError::KindMismatch { location: loc, expected });
    }
    Ok(())
}

/// Forces the condition at `loc` to true, then false, for each failing test.
/// A test passing under both values records true.
pub fn angelic_condition(
    program: &Program,
    suite: &Suite,
    failing: &[&str],
    loc: Location,
    step_budget: u64,
) -> Result<AngelicSearch, ProgramError> {
    check_kind(program, loc, StatementKind::IfStatement)?;
    let mut trials = Vec::new();
    let mut tuples = Vec::new();
    for test in failing {
        let mut chosen = None;
        for val in [true, false] {
            let controls = ExecutionControls::with_budget(step_budget).force(loc, val);
            let result = trial(program, suite, test, &controls)?;
            trials.push(Trial { test: test.to_string(), forced: Some(val), result });
            if result == TrialResult::Passed && chosen.is_none() {
                chosen = Some(val);
            }
        }
        if let Some(val) = chosen {
            tuples.push(AngelicTuple { loc, val, test: test.to_string() });
        }
    }
    let outcome = conclude(&trials, tuples, failing.len());
    Ok(AngelicSearch { loc, kind: RepairKind::ConditionUpdate, outcome, trials })
}

/// Skips the statement at `loc` for each failing test.
pub fn angelic_precondition(
    program: &Program,
    suite: &Suite,
    failing: &[&str],
    loc: Location,
    step_budget: u64,
) -> Result<AngelicSearch, ProgramError> {
    check_kind(program, loc, StatementKind::Plain)?;
    let mut trials = Vec::new();
    let mut tuples = Vec::new();
    for test in failing {
        let controls = ExecutionControls::with_budget(step_budget).skip(loc);
        let result = trial(program, suite, test, &controls)?;
        trials.push(Trial { test: test.to_string(), forced: None, result });
        if result == TrialResult::Passed {
            tuples.push(AngelicTuple { loc, val: false, test: test.to_string() });
        }
    }
    let outcome = conclude(&trials, tuples, failing.len());
    Ok(AngelicSearch { loc, kind: RepairKind::PreconditionAddition, outcome, trials })
}

pub fn angelic_search(
    program: &Program,
    suite: &Suite,
    failing: &[&str],
    loc: Location,
    kind: RepairKind,
    step_budget: u64,
) -> Result<AngelicSearch, ProgramError> {
    match kind {
        RepairKind::ConditionUpdate => angelic_condition(program, suite, failing, loc, step_budget),
        RepairKind::PreconditionAddition => angelic_precondition(program, suite, failing, loc, step_budget),
    }
}

/// Number of trials needed over the statements covered by failing tests:
/// two per if statement for conditions, one per plain statement for
/// preconditions.
pub fn search_space_size(program: &Program, kind: RepairKind, coverage: &SuiteResult) -> usize {
    let covered = program.locations().filter(|loc| {
        program.classify(*loc).ok() == Some(kind.target())
            && coverage.verdicts.iter().any(|v| !v.passed && v.coverage.get(loc.index()).is_some_and(|h| *h > 0))
    });
    match kind {
        RepairKind::ConditionUpdate => 2 * covered.count(),
        RepairKind::PreconditionAddition => covered.count(),
    }
}

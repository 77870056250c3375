//! Test cases, suite files and suite execution.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{
    eval_constant, execute, parse_expr, printer, Call, ErrorKind, ExecutionControls, ExecutionResult, Expr, Location,
    Outcome, Program, ProgramError, Value,
};

pub const REAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Oracle {
    Returns(Value),
    /// Any runtime error, or one of a given kind.
    Error(Option<ErrorKind>),
}

impl fmt::Display for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Oracle::Returns(v) => write!(f, "expect {v}"),
            Oracle::Error(None) => f.write_str("error"),
            Oracle::Error(Some(k)) => write!(f, "error({k:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub call: Call,
    pub oracle: Oracle,
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "test {} {} {}", self.id, self.call, self.oracle)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuiteError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate test id `{0}`")]
    DuplicateId(String),
    #[error("empty test suite")]
    Empty,
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// An ordered list of uniquely named tests.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Suite {
    pub tests: Vec<TestCase>,
}

fn value_of(e: &Expr) -> Result<Value, String> {
    eval_constant(e)
}

fn parse_test_line(rest: &str) -> Result<TestCase, String> {
    let rest = rest.trim_start();
    let split = rest.find(char::is_whitespace).ok_or("missing call after test id")?;
    let (id, rest) = rest.split_at(split);
    let rest = rest.trim();
    let (call_src, oracle) = if let Some(i) = rest.rfind(" expect ") {
        let value_src = &rest[i + " expect ".len()..];
        let e = parse_expr(value_src).map_err(|e| e.to_string())?;
        (&rest[..i], Oracle::Returns(value_of(&e)?))
    } else if let Some(call) = rest.strip_suffix(" error") {
        (call, Oracle::Error(None))
    } else if let Some(i) = rest.rfind(" error(") {
        let kind_src = rest[i + " error(".len()..].strip_suffix(')').ok_or("unterminated error kind")?;
        let kind = ErrorKind::from_name(kind_src.trim()).ok_or_else(|| format!("unknown error kind `{kind_src}`"))?;
        (&rest[..i], Oracle::Error(Some(kind)))
    } else {
        return Err("missing oracle: expected `expect <value>`, `error` or `error(Kind)`".into());
    };
    let call = match parse_expr(call_src).map_err(|e| e.to_string())? {
        Expr::Call { function, args } => {
            let args = args.iter().map(value_of).collect::<Result<Vec<_>, _>>()?;
            Call { function, args }
        }
        other => return Err(format!("`{}` is not a call", printer::expr_to_string(&other))),
    };
    Ok(TestCase { id: id.to_string(), call, oracle })
}

impl Suite {
    pub fn new(tests: Vec<TestCase>) -> Result<Self, SuiteError> {
        let mut seen = BTreeSet::new();
        for t in &tests {
            if !seen.insert(t.id.clone()) {
                return Err(SuiteError::DuplicateId(t.id.clone()));
            }
        }
        Ok(Self { tests })
    }

    /// Parses the line-oriented suite format:
    /// `test <id> <function>(<args>) expect <value> | error | error(<Kind>)`.
    pub fn parse(src: &str) -> Result<Self, SuiteError> {
        let mut tests = Vec::new();
        for (n, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rest = line
                .strip_prefix("test ")
                .ok_or_else(|| SuiteError::Format { line: n + 1, message: "expected `test`".into() })?;
            let t = parse_test_line(rest).map_err(|message| SuiteError::Format { line: n + 1, message })?;
            tests.push(t);
        }
        Self::new(tests)
    }

    pub fn get(&self, id: &str) -> Option<&TestCase> {
        self.tests.iter().find(|t| t.id == id)
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tests {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}

pub(crate) fn values_match(actual: &Value, expected: &Value) -> bool {
    match (actual, expected) {
        (Value::Real(_), _) | (_, Value::Real(_)) => match (actual.as_f64(), expected.as_f64()) {
            (Some(a), Some(b)) => a == b || (a - b).abs() <= REAL_TOLERANCE,
            _ => false,
        },
        (Value::Obj(a), Value::Obj(b)) => match (&a.data, &b.data) {
            (crate::minilang::ObjData::Reals(x), crate::minilang::ObjData::Reals(y)) => {
                x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_match(&Value::Real(*p), &Value::Real(*q)))
            }
            _ => a == b,
        },
        _ => actual == expected,
    }
}

/// Whether an execution satisfies an oracle.
pub fn verdict_holds(result: &ExecutionResult, oracle: &Oracle) -> bool {
    match (&result.outcome, oracle) {
        (Outcome::Returned(v), Oracle::Returns(expected)) => values_match(v, expected),
        (Outcome::Failed(_), Oracle::Error(None)) => true,
        (Outcome::Failed(e), Oracle::Error(Some(kind))) => e.kind == *kind,
        _ => false,
    }
}

/// Runs one test; returns the execution and whether it passed.
pub fn run_test(
    program: &Program,
    test: &TestCase,
    controls: &ExecutionControls,
) -> Result<(ExecutionResult, bool), ProgramError> {
    let result = execute(program, &test.call, controls)?;
    let passed = verdict_holds(&result, &test.oracle);
    Ok((result, passed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub id: String,
    pub passed: bool,
    pub outcome: Outcome,
    /// Hit count per location, indexed by `Location::index`.
    pub coverage: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub statement_count: usize,
    pub verdicts: Vec<TestVerdict>,
}

impl SuiteResult {
    pub fn failing(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|v| !v.passed).map(|v| v.id.as_str()).collect()
    }

    pub fn passing(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|v| v.passed).map(|v| v.id.as_str()).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, id: &str) -> Option<&TestVerdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn covers(&self, id: &str, loc: Location) -> bool {
        self.verdict(id).and_then(|v| v.coverage.get(loc.index())).is_some_and(|h| *h > 0)
    }
}

/// Runs every test of the suite under the same controls.
pub fn run_suite(program: &Program, suite: &Suite, controls: &ExecutionControls) -> Result<SuiteResult, SuiteError> {
    if suite.is_empty() {
        return Err(SuiteError::Empty);
    }
    let mut verdicts = Vec::with_capacity(suite.len());
    for t in &suite.tests {
        let (result, passed) = run_test(program, t, controls)?;
        verdicts.push(TestVerdict { id: t.id.clone(), passed, outcome: result.outcome, coverage: result.hits });
    }
    Ok(SuiteResult { statement_count: program.statement_count(), verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::RuntimeError;

    const GCD: &str = "fn gcd(u: int, v: int) -> int {
    if (u * v == 0) {
        return u + v;
    }
    while (v != 0) {
        let t: int = u % v;
        u = v;
        v = t;
    }
    if (u < 0) {
        return -u;
    }
    return u;
}
";

    fn returned(v: Value) -> ExecutionResult {
        ExecutionResult { outcome: Outcome::Returned(v), hits: vec![], snapshots: vec![], steps: 0 }
    }

    #[test]
    fn parses_suite_lines() {
        let s = Suite::parse(
            "# comment\ntest a gcd(0, 6) expect 6\ntest b f(\"x y\", [1.5, -2], null) error\ntest c g(-1) error(Thrown)\n",
        )
        .unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.tests[0].call, Call::new("gcd", vec![Value::Int(0), Value::Int(6)]));
        assert_eq!(s.tests[0].oracle, Oracle::Returns(Value::Int(6)));
        assert_eq!(s.tests[1].call.args[0], Value::str("x y"));
        assert_eq!(s.tests[1].oracle, Oracle::Error(None));
        assert_eq!(s.tests[2].call.args[0], Value::Int(-1));
        assert_eq!(s.tests[2].oracle, Oracle::Error(Some(ErrorKind::Thrown)));
        assert_eq!(Suite::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn rejects_duplicate_ids_and_bad_lines() {
        assert!(matches!(Suite::parse("test a f() expect 1\ntest a f() expect 2"), Err(SuiteError::DuplicateId(_))));
        assert!(matches!(Suite::parse("test a f()"), Err(SuiteError::Format { line: 1, .. })));
    }

    #[test]
    fn gcd_suite_both_pass_on_buggy_program() {
        let p = Program::parse(GCD).unwrap();
        let s = Suite::parse("test a gcd(0, 6) expect 6\ntest b gcd(3, 5) expect 1").unwrap();
        let r = run_suite(&p, &s, &ExecutionControls::default()).unwrap();
        assert_eq!(r.passing(), vec!["a", "b"]);
        assert!(r.covers("a", Location(1)));
        assert!(!r.covers("a", Location(3)));
        assert!(r.covers("b", Location(3)));
    }

    #[test]
    fn empty_suite_rejected() {
        let p = Program::parse(GCD).unwrap();
        assert_eq!(run_suite(&p, &Suite::default(), &ExecutionControls::default()), Err(SuiteError::Empty));
    }

    #[test]
    fn verdicts() {
        assert!(verdict_holds(&returned(Value::Int(6)), &Oracle::Returns(Value::Int(6))));
        assert!(verdict_holds(&returned(Value::Real(0.5000000001)), &Oracle::Returns(Value::Real(0.5))));
        assert!(!verdict_holds(&returned(Value::Real(0.5001)), &Oracle::Returns(Value::Real(0.5))));
        let failed = ExecutionResult {
            outcome: Outcome::Failed(RuntimeError { kind: ErrorKind::Thrown, message: String::new(), location: None }),
            hits: vec![],
            snapshots: vec![],
            steps: 0,
        };
        assert!(verdict_holds(&failed, &Oracle::Error(None)));
        assert!(verdict_holds(&failed, &Oracle::Error(Some(ErrorKind::Thrown))));
        assert!(!verdict_holds(&failed, &Oracle::Error(Some(ErrorKind::NullDereference))));
        let exhausted = ExecutionResult { outcome: Outcome::BudgetExhausted, hits: vec![], snapshots: vec![], steps: 0 };
        assert!(!verdict_holds(&exhausted, &Oracle::Error(None)));
    }
}

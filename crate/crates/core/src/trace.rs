//! Runtime trace collection: per-location input values and expected
//! condition outcomes across the whole suite.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angelic::AngelicTuple;
use crate::minilang::{ExecutionControls, Location, ProbeSnapshot, Program, ProgramError, RepairKind, Value};
use crate::testkit::{run_test, Suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    Bool,
    Int,
    Real,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Bool => "bool",
            Sort::Int => "int",
            Sort::Real => "real",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "bool" => Some(Sort::Bool),
            "int" => Some(Sort::Int),
            "real" => Some(Sort::Real),
            _ => None,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A collected primitive value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Real(f64),
}

impl Scalar {
    pub fn sort(self) -> Sort {
        match self {
            Scalar::Bool(_) => Sort::Bool,
            Scalar::Int(_) => Sort::Int,
            Scalar::Real(_) => Sort::Real,
        }
    }

    fn from_value(v: &Value) -> Option<Scalar> {
        match v {
            Value::Bool(b) => Some(Scalar::Bool(*b)),
            Value::Int(i) => Some(Scalar::Int(*i)),
            Value::Real(r) if r.is_finite() => Some(Scalar::Real(*r)),
            _ => None,
        }
    }

    /// Bit-exact identity used for row comparison.
    fn key(self) -> (u8, u64) {
        match self {
            Scalar::Bool(b) => (0, b as u64),
            Scalar::Int(i) => (1, i as u64),
            Scalar::Real(r) => (2, if r == 0.0 { 0 } else { r.to_bits() }),
        }
    }

    pub fn parse(sort: Sort, s: &str) -> Option<Scalar> {
        match sort {
            Sort::Bool => s.parse().ok().map(Scalar::Bool),
            Sort::Int => s.parse().ok().map(Scalar::Int),
            Sort::Real => s.parse().ok().filter(|r: &f64| r.is_finite()).map(Scalar::Real),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Real(r) => write!(f, "{r:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    /// Expression text the column denotes, e.g. `x`, `s == null`, `s.length()`, `-1`.
    pub name: String,
    pub sort: Sort,
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub test: String,
    /// Zero-based evaluation index within the test.
    pub eval: usize,
    /// One value per matrix column.
    pub inputs: Vec<Scalar>,
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMatrix {
    pub location: Location,
    pub kind: RepairKind,
    pub columns: Vec<Column>,
    pub rows: Vec<TraceRow>,
    /// Set by `deduplicate` when equal inputs carry different outputs.
    pub conflicting: bool,
}

pub const CONSTANTS: [i64; 3] = [0, -1, 1];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("no angelic tuple for failing test `{0}`")]
    MissingAngelic(String),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

impl TraceMatrix {
    /// All rows share one expected output.
    pub fn is_degenerate(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].expected == w[1].expected)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Line-oriented, tab-separated text form.
    pub fn to_text(&self) -> String {
        let mut out = format!("location\t{}\nkind\t{}\n", self.location.0, self.kind.name());
        out.push_str("columns");
        for c in &self.columns {
            out.push_str(&format!("\t{}:{}{}", c.name, c.sort, if c.constant { ":const" } else { "" }));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("row\t{}\t{}", r.test, r.eval));
            for v in &r.inputs {
                out.push_str(&format!("\t{v}"));
            }
            out.push_str(&format!("\t=>\t{}\n", r.expected));
        }
        if self.conflicting {
            out.push_str("conflicting\n");
        }
        out
    }

    pub fn from_text(src: &str) -> Result<TraceMatrix, String> {
        let mut location = None;
        let mut kind = None;
        let mut columns: Vec<Column> = Vec::new();
        let mut rows = Vec::new();
        let mut conflicting = false;
        for (n, line) in src.lines().enumerate() {
            let bad = |m: &str| format!("line {}: {m}", n + 1);
            let mut fields = line.split('\t');
            match fields.next() {
                Some("location") => {
                    location = Some(Location(fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad location"))?))
                }
                Some("kind") => {
                    kind = Some(fields.next().and_then(RepairKind::from_name).ok_or_else(|| bad("bad kind"))?)
                }
                Some("columns") => {
                    for f in fields {
                        let (f, constant) = match f.strip_suffix(":const") {
                            Some(rest) => (rest, true),
                            None => (f, false),
                        };
                        let (name, sort) = f.rsplit_once(':').ok_or_else(|| bad("bad column"))?;
                        let sort = Sort::from_name(sort).ok_or_else(|| bad("bad sort"))?;
                        columns.push(Column { name: name.to_string(), sort, constant });
                    }
                }
                Some("row") => {
                    let parts: Vec<&str> = fields.collect();
                    if parts.len() != columns.len() + 4 || parts[parts.len() - 2] != "=>" {
                        return Err(bad("row width does not match columns"));
                    }
                    let inputs = columns
                        .iter()
                        .zip(&parts[2..parts.len() - 2])
                        .map(|(c, s)| Scalar::parse(c.sort, s))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| bad("bad value"))?;
                    rows.push(TraceRow {
                        test: parts[0].to_string(),
                        eval: parts[1].parse().map_err(|_| bad("bad index"))?,
                        inputs,
                        expected: parts[parts.len() - 1].parse().map_err(|_| bad("bad output"))?,
                    });
                }
                Some("conflicting") => conflicting = true,
                Some("") | None => {}
                Some(other) => return Err(bad(&format!("unknown record `{other}`"))),
            }
        }
        Ok(TraceMatrix {
            location: location.ok_or("missing location")?,
            kind: kind.ok_or("missing kind")?,
            columns,
            rows,
            conflicting,
        })
    }
}

/// Named values observed in one snapshot, in snapshot order.
fn observations(snap: &ProbeSnapshot) -> Vec<(String, Scalar)> {
    let mut out = Vec::new();
    for (name, v) in &snap.primitives {
        if let Some(s) = Scalar::from_value(v) {
            out.push((name.clone(), s));
        }
    }
    for o in &snap.objects {
        out.push((format!("{} == null", o.name), Scalar::Bool(o.is_null)));
        for (method, v) in &o.queries {
            if let Some(s) = Scalar::from_value(v) {
                out.push((format!("{}.{}()", o.name, method), s));
            }
        }
    }
    out
}

struct RawRow {
    test: String,
    eval: usize,
    values: Vec<(String, Scalar)>,
    expected: bool,
}

/// Collects the trace matrix at `loc` over the whole suite.
///
/// Condition repair: passing tests give one row per evaluation with the
/// actual condition value; failing tests are run with their angelic value
/// forced and give one row per evaluation with that value. Precondition
/// repair: one row per test from the first hit, true for passing and false
/// for failing tests.
pub fn collect(
    program: &Program,
    suite: &Suite,
    failing: &[&str],
    loc: Location,
    kind: RepairKind,
    angelic: &[AngelicTuple],
    step_budget: u64,
) -> Result<TraceMatrix, TraceError> {
    let mut raw = Vec::new();
    for test in &suite.tests {
        let is_failing = failing.contains(&test.id.as_str());
        let mut controls = ExecutionControls::with_budget(step_budget).probe(loc);
        let forced = if is_failing {
            let tuple = angelic
                .iter()
                .find(|t| t.test == test.id && t.loc == loc)
                .ok_or_else(|| TraceError::MissingAngelic(test.id.clone()))?;
            controls = match kind {
                RepairKind::ConditionUpdate => controls.force(loc, tuple.val),
                RepairKind::PreconditionAddition => controls.skip(loc),
            };
            Some(tuple.val)
        } else {
            None
        };
        let (result, _) = run_test(program, test, &controls)?;
        let snaps = result.snapshots.iter().filter(|s| s.location == loc);
        match kind {
            RepairKind::ConditionUpdate => {
                for (m, snap) in snaps.enumerate() {
                    let expected = match forced {
                        Some(v) => v,
                        None => match snap.condition {
                            Some(c) => c,
                            None => continue,
                        },
                    };
                    raw.push(RawRow { test: test.id.clone(), eval: m, values: observations(snap), expected });
                }
            }
            RepairKind::PreconditionAddition => {
                if let Some(snap) = snaps.into_iter().next() {
                    raw.push(RawRow { test: test.id.clone(), eval: 0, values: observations(snap), expected: !is_failing });
                }
            }
        }
    }
    Ok(assemble(loc, kind, raw))
}

/// Keeps the names present with a single sort in every row, in first-seen
/// order, then appends the constants.
fn assemble(location: Location, kind: RepairKind, raw: Vec<RawRow>) -> TraceMatrix {
    let mut order: Vec<(String, Sort)> = Vec::new();
    let mut seen: BTreeMap<String, (Sort, usize, bool)> = BTreeMap::new();
    for r in &raw {
        for (name, v) in &r.values {
            let e = seen.entry(name.clone()).or_insert_with(|| {
                order.push((name.clone(), v.sort()));
                (v.sort(), 0, true)
            });
            e.1 += 1;
            if e.0 != v.sort() {
                e.2 = false;
            }
        }
    }
    let kept: Vec<(String, Sort)> =
        order.into_iter().filter(|(n, _)| seen.get(n).is_some_and(|e| e.1 == raw.len() && e.2)).collect();
    let mut columns: Vec<Column> =
        kept.iter().map(|(name, sort)| Column { name: name.clone(), sort: *sort, constant: false }).collect();
    columns.extend(CONSTANTS.iter().map(|c| Column { name: c.to_string(), sort: Sort::Int, constant: true }));
    let rows = raw
        .into_iter()
        .map(|r| {
            let lookup: BTreeMap<&str, Scalar> = r.values.iter().map(|(n, v)| (n.as_str(), *v)).collect();
            let mut inputs: Vec<Scalar> = kept.iter().map(|(n, _)| lookup[n.as_str()]).collect();
            inputs.extend(CONSTANTS.iter().map(|c| Scalar::Int(*c)));
            TraceRow { test: r.test, eval: r.eval, inputs, expected: r.expected }
        })
        .collect();
    TraceMatrix { location, kind, columns, rows, conflicting: false }
}

/// Collapses identical rows and flags equal inputs with different outputs.
pub fn deduplicate(matrix: &TraceMatrix) -> TraceMatrix {
    let mut outputs: BTreeMap<Vec<(u8, u64)>, (bool, bool)> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut conflicting = matrix.conflicting;
    for r in &matrix.rows {
        let key: Vec<(u8, u64)> = r.inputs.iter().map(|v| v.key()).collect();
        let e = outputs.entry(key.clone()).or_insert((false, false));
        if r.expected {
            e.0 = true;
        } else {
            e.1 = true;
        }
        if e.0 && e.1 {
            conflicting = true;
        }
        if seen.insert((key, r.expected)) {
            rows.push(r.clone());
        }
    }
    TraceMatrix { rows, conflicting, ..matrix.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angelic::{angelic_search, AngelicOutcome};
    use crate::minilang::DEFAULT_STEP_BUDGET;

    fn matrix(rows: Vec<(Vec<Scalar>, bool)>) -> TraceMatrix {
        TraceMatrix {
            location: Location(1),
            kind: RepairKind::ConditionUpdate,
            columns: vec![Column { name: "x".into(), sort: Sort::Int, constant: false }],
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(i, (inputs, expected))| TraceRow { test: format!("t{i}"), eval: 0, inputs, expected })
                .collect(),
            conflicting: false,
        }
    }

    #[test]
    fn dedup_collapses_and_flags() {
        let m = deduplicate(&matrix(vec![(vec![Scalar::Int(1)], true), (vec![Scalar::Int(1)], true)]));
        assert_eq!(m.rows.len(), 1);
        assert!(!m.conflicting);
        let m = deduplicate(&matrix(vec![(vec![Scalar::Int(1)], true), (vec![Scalar::Int(1)], false)]));
        assert_eq!(m.rows.len(), 2);
        assert!(m.conflicting);
    }

    #[test]
    fn collects_objects_and_drops_undefined_queries() {
        let p = Program::parse(
            "fn f(n: int, s: String) -> int {
    if (n > 2) {
        return 1;
    }
    return 0;
}",
        )
        .unwrap();
        let suite = Suite::parse(
            "test a f(3, \"abc\") expect 1\ntest b f(1, \"xy\") expect 0\ntest c f(0, null) expect 1",
        )
        .unwrap();
        let failing = ["c"];
        let search =
            angelic_search(&p, &suite, &failing, Location(1), RepairKind::ConditionUpdate, DEFAULT_STEP_BUDGET).unwrap();
        let AngelicOutcome::Found(tuples) = search.outcome else { panic!() };
        let m = collect(&p, &suite, &failing, Location(1), RepairKind::ConditionUpdate, &tuples, DEFAULT_STEP_BUDGET)
            .unwrap();
        let names: Vec<&str> = m.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["n", "s == null", "0", "-1", "1"]);
        assert_eq!(m.rows.len(), 3);
        assert_eq!(m.rows[0].inputs[..2], [Scalar::Int(3), Scalar::Bool(false)]);
        assert_eq!(m.rows.iter().map(|r| r.expected).collect::<Vec<_>>(), vec![true, false, true]);

        // with only non-null receivers the state query survives
        let m2 = collect(&p, &Suite::parse("test a f(3, \"abc\") expect 1").unwrap(), &[], Location(1),
            RepairKind::ConditionUpdate, &[], DEFAULT_STEP_BUDGET).unwrap();
        let j = m2.column("s.length()").unwrap();
        assert_eq!(m2.rows[0].inputs[j], Scalar::Int(3));
        let k = m2.column("s.isEmpty()").unwrap();
        assert_eq!(m2.rows[0].inputs[k], Scalar::Bool(false));
    }

    #[test]
    fn one_row_per_evaluation_for_conditions_and_per_test_for_preconditions() {
        let p = Program::parse(
            "fn f(n: int) -> int {
    let i: int = 0;
    let c: int = 0;
    while (i < n) {
        if (i > 0) {
            c = c + 1;
        }
        i = i + 1;
    }
    return c;
}",
        )
        .unwrap();
        let suite = Suite::parse("test a f(3) expect 2").unwrap();
        let m = collect(&p, &suite, &[], Location(4), RepairKind::ConditionUpdate, &[], DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(m.rows.len(), 3);
        assert_eq!(m.rows.iter().map(|r| r.eval).collect::<Vec<_>>(), vec![0, 1, 2]);
        let m = collect(&p, &suite, &[], Location(5), RepairKind::PreconditionAddition, &[], DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(m.rows.len(), 1);
        assert!(m.rows[0].expected);
    }

    #[test]
    fn missing_tuple_is_an_error() {
        let p = Program::parse("fn f(n: int) -> int {\n    if (n > 2) {\n        return 1;\n    }\n    return 0;\n}").unwrap();
        let suite = Suite::parse("test a f(3) expect 0").unwrap();
        let r = collect(&p, &suite, &["a"], Location(1), RepairKind::ConditionUpdate, &[], DEFAULT_STEP_BUDGET);
        assert_eq!(r, Err(TraceError::MissingAngelic("a".into())));
    }

    #[test]
    fn text_round_trip() {
        let mut m = matrix(vec![(vec![Scalar::Int(1)], true), (vec![Scalar::Int(-4)], false)]);
        m.columns.push(Column { name: "s.length()".into(), sort: Sort::Int, constant: false });
        m.columns.push(Column { name: "r".into(), sort: Sort::Real, constant: false });
        m.columns.push(Column { name: "-1".into(), sort: Sort::Int, constant: true });
        for r in &mut m.rows {
            r.inputs.extend([Scalar::Int(2), Scalar::Real(0.1), Scalar::Int(-1)]);
        }
        let back = TraceMatrix::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }
}

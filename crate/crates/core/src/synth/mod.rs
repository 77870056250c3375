//! Component-based synthesis of a boolean expression matching a trace
//! matrix: location-variable encoding, solving, and decoding.

mod decode;
mod enumerate;
mod oracle;
mod smtlib;

use std::fmt;
use std::time::Duration;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Scalar, Sort, TraceMatrix};

pub use decode::{check_structure, decode, PatchExpr, StructureViolation};
pub use enumerate::solve_internal;
pub use oracle::enumerate_oracle;
pub use smtlib::{emit_smtlib, parse_model_response, solve_external};

/// Operator of a building block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Lt,
    Le,
    Eq,
    Ne,
    And,
    Or,
    Not,
    Add,
    Sub,
    Mul,
}

impl Op {
    pub const ALL: [Op; 10] = [Op::Lt, Op::Le, Op::Eq, Op::Ne, Op::And, Op::Or, Op::Not, Op::Add, Op::Sub, Op::Mul];

    pub fn index(self) -> usize {
        Op::ALL.iter().position(|o| *o == self).expect("listed")
    }

    pub fn arity(self) -> usize {
        if self == Op::Not {
            1
        } else {
            2
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, Op::Eq | Op::Ne | Op::And | Op::Or | Op::Add | Op::Mul)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::And => "&&",
            Op::Or => "||",
            Op::Not => "!",
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
        }
    }

    /// Input and output sorts given the numeric sort of the problem.
    pub fn signature(self, numeric: Sort) -> (Vec<Sort>, Sort) {
        match self {
            Op::Lt | Op::Le => (vec![numeric, numeric], Sort::Bool),
            Op::Eq | Op::Ne => (vec![numeric, numeric], Sort::Bool),
            Op::And | Op::Or => (vec![Sort::Bool, Sort::Bool], Sort::Bool),
            Op::Not => (vec![Sort::Bool], Sort::Bool),
            Op::Add | Op::Sub | Op::Mul => (vec![numeric, numeric], numeric),
        }
    }
}

/// A building block kind with an optional display name; labelled blocks
/// print as function calls.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub op: Op,
    pub label: Option<String>,
    /// Input sorts overriding the default numeric sort.
    pub inputs: Option<Vec<Sort>>,
}

impl ComponentSpec {
    pub fn op(op: Op) -> Self {
        Self { op, label: None, inputs: None }
    }
}

/// The component multiset tried at one rung of the ladder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmtLevel {
    /// 1 to 4 for the standard ladder, 0 for a custom set.
    pub number: u8,
    pub components: Vec<ComponentSpec>,
}

pub const MAX_LEVEL: u8 = 4;

impl SmtLevel {
    /// Level 1: `<`, `<=`, `==`, `!=`. Level 2 adds `&&`, `||`, `!`. Level 3
    /// adds `+`, `-`, `*`. Level 4 doubles every component of level 3.
    pub fn level(number: u8) -> SmtLevel {
        assert!((1..=MAX_LEVEL).contains(&number), "level {number} outside 1..=4");
        let mut ops = vec![Op::Lt, Op::Le, Op::Eq, Op::Ne];
        if number >= 2 {
            ops.extend([Op::And, Op::Or, Op::Not]);
        }
        if number >= 3 {
            ops.extend([Op::Add, Op::Sub, Op::Mul]);
        }
        if number >= 4 {
            ops = ops.iter().flat_map(|o| [*o, *o]).collect();
        }
        SmtLevel { number, components: ops.into_iter().map(ComponentSpec::op).collect() }
    }

    pub fn custom(components: Vec<ComponentSpec>) -> SmtLevel {
        SmtLevel { number: 0, components }
    }

    /// Number of instances of each operator.
    pub fn op_counts(&self) -> [u8; 10] {
        let mut c = [0u8; 10];
        for s in &self.components {
            c[s.op.index()] += 1;
        }
        c
    }
}

/// An exact value of BOOL, INT or REAL sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exact {
    Bool(bool),
    Int(i128),
    Real(BigRational),
}

impl Exact {
    pub fn sort(&self) -> Sort {
        match self {
            Exact::Bool(_) => Sort::Bool,
            Exact::Int(_) => Sort::Int,
            Exact::Real(_) => Sort::Real,
        }
    }

    /// Exact rational of the shortest round-trip decimal form of `x`.
    pub fn real_from_f64(x: f64) -> BigRational {
        let text = format!("{x:?}");
        parse_decimal(&text).expect("finite float prints as decimal")
    }

    fn from_scalar(s: Scalar, numeric: Sort) -> Exact {
        match (s, numeric) {
            (Scalar::Bool(b), _) => Exact::Bool(b),
            (Scalar::Int(i), Sort::Real) => Exact::Real(BigRational::from_integer(BigInt::from(i))),
            (Scalar::Int(i), _) => Exact::Int(i as i128),
            (Scalar::Real(r), _) => Exact::Real(Exact::real_from_f64(r)),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Exact::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exact::Bool(b) => write!(f, "{b}"),
            Exact::Int(i) => write!(f, "{i}"),
            Exact::Real(r) => write!(f, "{r}"),
        }
    }
}

/// Parses `[-]digits[.digits][e[+-]digits]` into an exact rational.
fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Some(r)
}

/// One input slot of the problem (a matrix column).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSlot {
    pub name: String,
    pub sort: Sort,
    pub constant: bool,
}

/// A building block instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub op: Op,
    pub label: Option<String>,
    pub inputs: Vec<Sort>,
    pub output: Sort,
    /// Index among instances of the same operator.
    pub instance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub inputs: Vec<Exact>,
    pub expected: bool,
}

/// Inputs, building blocks and rows of one synthesis query.
///
/// Locations: input `i` (0-based) sits at `i + 1`; component outputs take
/// values in `[inputs + 1, p]`; the result sits at `p = inputs + components`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesisProblem {
    pub inputs: Vec<InputSlot>,
    pub components: Vec<Component>,
    pub rows: Vec<Row>,
    pub numeric: Sort,
    pub level: u8,
}

impl SynthesisProblem {
    /// Size of the location domain.
    pub fn p(&self) -> i64 {
        (self.inputs.len() + self.components.len()) as i64
    }

    pub fn input_location(&self, i: usize) -> i64 {
        i as i64 + 1
    }
}

/// An assignment of every location variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Model {
    pub inputs: Vec<i64>,
    pub result: i64,
    pub outputs: Vec<i64>,
    pub args: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("trace has conflicting rows; no expression can satisfy it")]
    UnsatisfiableByConstruction,
    #[error("trace has no rows")]
    EmptyTrace,
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("model is not well formed: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Model),
    Unsat,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Built-in bottom-up enumerator.
    Internal,
    /// An SMT-LIB2 solver reading the script on standard input.
    External { command: Vec<String> },
}

impl Backend {
    pub fn external(cmd: &str) -> Backend {
        Backend::External { command: cmd.split_whitespace().map(str::to_string).collect() }
    }
}

/// Builds the synthesis problem for a matrix at a level.
///
/// Integer columns are promoted to reals when any real column exists.
/// Components whose input sorts cannot be supplied by the inputs or by other
/// included components are left out.
pub fn encode(matrix: &TraceMatrix, level: &SmtLevel) -> Result<SynthesisProblem, SynthError> {
    if matrix.conflicting {
        return Err(SynthError::UnsatisfiableByConstruction);
    }
    if matrix.rows.is_empty() || matrix.columns.is_empty() {
        return Err(SynthError::EmptyTrace);
    }
    let numeric = if matrix.columns.iter().any(|c| c.sort == Sort::Real) { Sort::Real } else { Sort::Int };
    let promote = |s: Sort| if s == Sort::Int { numeric } else { s };
    let inputs: Vec<InputSlot> =
        matrix.columns.iter().map(|c| InputSlot { name: c.name.clone(), sort: promote(c.sort), constant: c.constant }).collect();
    let rows: Vec<Row> = matrix
        .rows
        .iter()
        .map(|r| Row { inputs: r.inputs.iter().map(|v| Exact::from_scalar(*v, numeric)).collect(), expected: r.expected })
        .collect();

    let typed: Vec<(ComponentSpec, Vec<Sort>, Sort)> = level
        .components
        .iter()
        .map(|spec| {
            let (ins, out) = spec.op.signature(numeric);
            let ins = spec.inputs.clone().unwrap_or(ins);
            (spec.clone(), ins, out)
        })
        .collect();
    let mut available: std::collections::BTreeSet<Sort> = inputs.iter().map(|i| i.sort).collect();
    let mut included = vec![false; typed.len()];
    loop {
        let mut changed = false;
        for (i, (_, ins, out)) in typed.iter().enumerate() {
            if !included[i] && ins.iter().all(|s| available.contains(s)) {
                included[i] = true;
                available.insert(*out);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut per_op = [0usize; 10];
    let components = typed
        .into_iter()
        .zip(included)
        .filter(|(_, inc)| *inc)
        .map(|((spec, ins, out), _)| {
            let instance = per_op[spec.op.index()];
            per_op[spec.op.index()] += 1;
            Component { op: spec.op, label: spec.label, inputs: ins, output: out, instance }
        })
        .collect();
    Ok(SynthesisProblem { inputs, components, rows, numeric, level: level.number })
}

/// Runs the chosen backend on a problem.
pub fn solve(problem: &SynthesisProblem, backend: &Backend, timeout: Duration) -> Result<SolveOutcome, SynthError> {
    match backend {
        Backend::Internal => Ok(solve_internal(problem, timeout)),
        Backend::External { command } => solve_external(problem, command, timeout),
    }
}

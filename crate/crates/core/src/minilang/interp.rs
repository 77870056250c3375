//! Tree-walking interpreter with condition overrides, statement skipping and
//! probe snapshots.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::value::{eval_state_query, state_queries, ObjData, Object, Value};
use super::{Program, ProgramError};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;
const MAX_CALL_DEPTH: usize = 200;

/// Controls applied to one execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionControls {
    /// Forced value for every evaluation of the condition at a location.
    pub condition_overrides: BTreeMap<Location, bool>,
    /// Plain statements that are not executed.
    pub skip_set: BTreeSet<Location>,
    /// Statements whose program state is captured each time they are reached.
    pub probes: BTreeSet<Location>,
    pub step_budget: u64,
}

impl Default for ExecutionControls {
    fn default() -> Self {
        Self {
            condition_overrides: BTreeMap::new(),
            skip_set: BTreeSet::new(),
            probes: BTreeSet::new(),
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

impl ExecutionControls {
    pub fn with_budget(step_budget: u64) -> Self {
        Self { step_budget, ..Self::default() }
    }

    pub fn force(mut self, loc: Location, value: bool) -> Self {
        self.condition_overrides.insert(loc, value);
        self
    }

    pub fn skip(mut self, loc: Location) -> Self {
        self.skip_set.insert(loc);
        self
    }

    pub fn probe(mut self, loc: Location) -> Self {
        self.probes.insert(loc);
        self
    }
}

/// Function name plus argument values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub function: String,
    pub args: Vec<Value>,
}

impl Call {
    pub fn new(function: impl Into<String>, args: Vec<Value>) -> Self {
        Self { function: function.into(), args }
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        write!(f, "{}({})", self.function, args.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    Thrown,
    NullDereference,
    DivisionByZero,
    IndexOutOfBounds,
    TypeMismatch,
    UndefinedVariable,
    MissingReturn,
    StackOverflow,
    BadCall,
}

impl ErrorKind {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "Thrown" => Self::Thrown,
            "NullDereference" => Self::NullDereference,
            "DivisionByZero" => Self::DivisionByZero,
            "IndexOutOfBounds" => Self::IndexOutOfBounds,
            "TypeMismatch" => Self::TypeMismatch,
            "UndefinedVariable" => Self::UndefinedVariable,
            "MissingReturn" => Self::MissingReturn,
            "StackOverflow" => Self::StackOverflow,
            "BadCall" => Self::BadCall,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub message: String,
    pub location: Option<Location>,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)?;
        if let Some(loc) = self.location {
            write!(f, " at {loc}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Returned(Value),
    Failed(RuntimeError),
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectObservation {
    pub name: String,
    pub class: ClassTag,
    pub is_null: bool,
    /// State query results, empty when the object is null.
    pub queries: Vec<(String, Value)>,
}

/// Program state captured when a probed statement is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSnapshot {
    pub location: Location,
    /// Zero-based count of earlier snapshots at the same location.
    pub occurrence: usize,
    /// In-scope bool/int/real variables: parameters and locals in
    /// declaration order, then global constants.
    pub primitives: Vec<(String, Value)>,
    pub objects: Vec<ObjectObservation>,
    /// Value the condition took, for if statements.
    pub condition: Option<bool>,
}

impl ProbeSnapshot {
    pub fn primitive(&self, name: &str) -> Option<&Value> {
        self.primitives.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn object(&self, name: &str) -> Option<&ObjectObservation> {
        self.objects.iter().find(|o| o.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub outcome: Outcome,
    /// Hit count per location, indexed by `Location::index`.
    pub hits: Vec<u32>,
    pub snapshots: Vec<ProbeSnapshot>,
    pub steps: u64,
}

impl ExecutionResult {
    pub fn hit_count(&self, loc: Location) -> u32 {
        self.hits.get(loc.index()).copied().unwrap_or(0)
    }

    pub fn covered(&self) -> impl Iterator<Item = Location> + '_ {
        self.hits.iter().enumerate().filter(|(_, h)| **h > 0).map(|(i, _)| Location(i as u32 + 1))
    }
}

enum Fault {
    Error(RuntimeError),
    Budget,
}

type Exec<T> = Result<T, Fault>;

enum Flow {
    Normal,
    Return(Value),
}

struct Slot {
    name: String,
    ty: Type,
    value: Value,
}

#[derive(Default)]
struct Frame {
    slots: Vec<Slot>,
}

impl Frame {
    fn get(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }

    fn get_mut(&mut self, name: &str) -> Option<&mut Slot> {
        self.slots.iter_mut().find(|s| s.name == name)
    }
}

fn err(kind: ErrorKind, message: impl Into<String>) -> Fault {
    Fault::Error(RuntimeError { kind, message: message.into(), location: None })
}

struct Machine<'a> {
    program: &'a Program,
    controls: &'a ExecutionControls,
    globals: Vec<Slot>,
    steps: u64,
    hits: Vec<u32>,
    occurrences: BTreeMap<Location, usize>,
    snapshots: Vec<ProbeSnapshot>,
    depth: usize,
    current: Option<Location>,
}

/// Runs `call` on `program` under `controls`.
///
/// Runtime failures and budget exhaustion are reported in the result's
/// outcome; `Err` is reserved for calls or controls that do not fit the
/// program (unknown function, wrong arity, controls on wrong statement kinds).
pub fn execute(program: &Program, call: &Call, controls: &ExecutionControls) -> Result<ExecutionResult, ProgramError> {
    for loc in controls.condition_overrides.keys() {
        if program.classify(*loc)? != StatementKind::IfStatement {
            return Err(ProgramError::KindMismatch { location: *loc, expected: StatementKind::IfStatement });
        }
    }
    for loc in &controls.skip_set {
        if program.classify(*loc)? != StatementKind::Plain {
            return Err(ProgramError::KindMismatch { location: *loc, expected: StatementKind::Plain });
        }
    }
    for loc in &controls.probes {
        program.classify(*loc)?;
    }
    let func = program
        .function(&call.function)
        .ok_or_else(|| ProgramError::UnknownFunction(call.function.clone()))?;
    if func.params.len() != call.args.len() {
        return Err(ProgramError::BadArguments(format!(
            "`{}` takes {} arguments, got {}",
            func.name,
            func.params.len(),
            call.args.len()
        )));
    }
    let mut frame = Frame::default();
    for (p, a) in func.params.iter().zip(&call.args) {
        let value = a.clone().coerce(p.ty).ok_or_else(|| {
            ProgramError::BadArguments(format!("argument `{}` expects {}, got {}", p.name, p.ty, a.type_name()))
        })?;
        frame.slots.push(Slot { name: p.name.clone(), ty: p.ty, value });
    }

    let globals = program
        .globals
        .iter()
        .map(|g| Slot { name: g.name.clone(), ty: g.ty, value: Value::from_literal(&g.value) })
        .collect();
    let mut m = Machine {
        program,
        controls,
        globals,
        steps: 0,
        hits: vec![0; program.statement_count()],
        occurrences: BTreeMap::new(),
        snapshots: Vec::new(),
        depth: 0,
        current: None,
    };
    let outcome = match m.run_body(func, frame) {
        Ok(v) => Outcome::Returned(v),
        Err(Fault::Budget) => Outcome::BudgetExhausted,
        Err(Fault::Error(mut e)) => {
            if e.location.is_none() {
                e.location = m.current;
            }
            Outcome::Failed(e)
        }
    };
    Ok(ExecutionResult { outcome, hits: m.hits, snapshots: m.snapshots, steps: m.steps })
}

impl<'a> Machine<'a> {
    fn run_body(&mut self, func: &'a FunctionDef, mut frame: Frame) -> Exec<Value> {
        self.depth += 1;
        if self.depth > MAX_CALL_DEPTH {
            return Err(err(ErrorKind::StackOverflow, format!("call depth exceeded in `{}`", func.name)));
        }
        let flow = self.exec_block(&mut frame, &func.body)?;
        self.depth -= 1;
        match flow {
            Flow::Return(v) => v
                .coerce(func.ret)
                .ok_or_else(|| err(ErrorKind::TypeMismatch, format!("`{}` must return {}", func.name, func.ret))),
            Flow::Normal => Err(err(ErrorKind::MissingReturn, format!("`{}` ended without returning", func.name))),
        }
    }

    fn tick(&mut self) -> Exec<()> {
        self.steps += 1;
        if self.steps > self.controls.step_budget {
            Err(Fault::Budget)
        } else {
            Ok(())
        }
    }

    fn exec_block(&mut self, frame: &mut Frame, stmts: &'a [Stmt]) -> Exec<Flow> {
        for s in stmts {
            if let Flow::Return(v) = self.exec_stmt(frame, s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn snapshot(&mut self, frame: &Frame, loc: Location) {
        let occ = self.occurrences.entry(loc).or_insert(0);
        let occurrence = *occ;
        *occ += 1;
        let mut primitives = Vec::new();
        let mut objects = Vec::new();
        for slot in frame.slots.iter().chain(self.globals.iter()) {
            match slot.ty {
                Type::Class(class) => {
                    let (is_null, queries) = match &slot.value {
                        Value::Obj(o) => (
                            false,
                            state_queries(class)
                                .iter()
                                .filter_map(|(m, _)| eval_state_query(o, m).map(|v| (m.to_string(), v)))
                                .collect(),
                        ),
                        _ => (true, Vec::new()),
                    };
                    objects.push(ObjectObservation { name: slot.name.clone(), class, is_null, queries });
                }
                _ => primitives.push((slot.name.clone(), slot.value.clone())),
            }
        }
        self.snapshots.push(ProbeSnapshot { location: loc, occurrence, primitives, objects, condition: None });
    }

    fn exec_stmt(&mut self, frame: &mut Frame, s: &'a Stmt) -> Exec<Flow> {
        self.tick()?;
        self.current = Some(s.loc);
        let probed = self.controls.probes.contains(&s.loc);
        if probed {
            self.snapshot(frame, s.loc);
        }
        if self.controls.skip_set.contains(&s.loc) {
            return Ok(Flow::Normal);
        }
        self.hits[s.loc.index()] += 1;
        match &s.kind {
            StmtKind::Let { name, ty, init } => {
                let v = self.eval(frame, init)?;
                let v = v
                    .coerce(*ty)
                    .ok_or_else(|| err(ErrorKind::TypeMismatch, format!("cannot initialise `{name}: {ty}`")))?;
                match frame.get_mut(name) {
                    Some(slot) => {
                        slot.ty = *ty;
                        slot.value = v;
                    }
                    None => frame.slots.push(Slot { name: name.clone(), ty: *ty, value: v }),
                }
                Ok(Flow::Normal)
            }
            StmtKind::Assign { target, value } => {
                let v = self.eval(frame, value)?;
                let slot = frame
                    .get_mut(target)
                    .ok_or_else(|| err(ErrorKind::UndefinedVariable, format!("`{target}` is not defined")))?;
                slot.value = v
                    .coerce(slot.ty)
                    .ok_or_else(|| err(ErrorKind::TypeMismatch, format!("cannot assign to `{target}: {}`", slot.ty)))?;
                Ok(Flow::Normal)
            }
            StmtKind::Expr(e) => {
                self.eval(frame, e)?;
                Ok(Flow::Normal)
            }
            StmtKind::Return(e) => Ok(Flow::Return(self.eval(frame, e)?)),
            StmtKind::Throw(e) => {
                let v = self.eval(frame, e)?;
                let message = match &v {
                    Value::Obj(o) if o.class == ClassTag::String => o.text().unwrap_or_default().to_string(),
                    other => other.to_string(),
                };
                Err(Fault::Error(RuntimeError { kind: ErrorKind::Thrown, message, location: Some(s.loc) }))
            }
            StmtKind::If { cond, then_block, else_block } => {
                let value = match self.controls.condition_overrides.get(&s.loc) {
                    Some(forced) => *forced,
                    None => self.eval_bool(frame, cond)?,
                };
                if probed {
                    if let Some(last) = self.snapshots.iter_mut().rev().find(|snap| snap.location == s.loc) {
                        last.condition = Some(value);
                    }
                }
                self.current = Some(s.loc);
                if value {
                    self.exec_block(frame, then_block)
                } else {
                    self.exec_block(frame, else_block)
                }
            }
            StmtKind::While { cond, body } => {
                loop {
                    self.current = Some(s.loc);
                    if !self.eval_bool(frame, cond)? {
                        return Ok(Flow::Normal);
                    }
                    if let Flow::Return(v) = self.exec_block(frame, body)? {
                        return Ok(Flow::Return(v));
                    }
                    self.tick()?;
                }
            }
        }
    }

    fn eval_bool(&mut self, frame: &mut Frame, e: &'a Expr) -> Exec<bool> {
        match self.eval(frame, e)? {
            Value::Bool(b) => Ok(b),
            other => Err(err(ErrorKind::TypeMismatch, format!("expected bool, got {}", other.type_name()))),
        }
    }

    fn lookup(&self, frame: &Frame, name: &str) -> Exec<Value> {
        frame
            .get(name)
            .or_else(|| self.globals.iter().find(|g| g.name == name))
            .map(|s| s.value.clone())
            .ok_or_else(|| err(ErrorKind::UndefinedVariable, format!("`{name}` is not defined")))
    }

    fn eval(&mut self, frame: &mut Frame, e: &'a Expr) -> Exec<Value> {
        match e {
            Expr::Lit(lit) => Ok(Value::from_literal(lit)),
            Expr::Var(name) => self.lookup(frame, name),
            Expr::Unary(op, inner) => {
                let v = self.eval(frame, inner)?;
                match (op, v) {
                    (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnaryOp::Neg, Value::Int(i)) => Ok(Value::Int(i.wrapping_neg())),
                    (UnaryOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
                    (op, v) => Err(err(ErrorKind::TypeMismatch, format!("bad operand {} for {op:?}", v.type_name()))),
                }
            }
            Expr::Binary(BinaryOp::And, a, b) => {
                Ok(Value::Bool(self.eval_bool(frame, a)? && self.eval_bool(frame, b)?))
            }
            Expr::Binary(BinaryOp::Or, a, b) => {
                Ok(Value::Bool(self.eval_bool(frame, a)? || self.eval_bool(frame, b)?))
            }
            Expr::Binary(op, a, b) => {
                let lhs = self.eval(frame, a)?;
                let rhs = self.eval(frame, b)?;
                binary(*op, lhs, rhs)
            }
            Expr::Index(base, idx) => {
                let base = self.eval(frame, base)?;
                let idx = self.eval(frame, idx)?;
                let Value::Int(i) = idx else {
                    return Err(err(ErrorKind::TypeMismatch, "array index must be int"));
                };
                match base {
                    Value::Null => Err(err(ErrorKind::NullDereference, "indexing null")),
                    Value::Obj(Object { data: ObjData::Ints(v), .. }) => {
                        index(&v, i).map(|x| Value::Int(*x))
                    }
                    Value::Obj(Object { data: ObjData::Reals(v), .. }) => {
                        index(&v, i).map(|x| Value::Real(*x))
                    }
                    other => Err(err(ErrorKind::TypeMismatch, format!("cannot index {}", other.type_name()))),
                }
            }
            Expr::Method { receiver, method, args } => {
                let recv = self.eval(frame, receiver)?;
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(frame, a)?);
                }
                let obj = match recv {
                    Value::Null => {
                        return Err(err(ErrorKind::NullDereference, format!("calling `{method}` on null")))
                    }
                    Value::Obj(o) => o,
                    other => {
                        return Err(err(ErrorKind::TypeMismatch, format!("`{method}` called on {}", other.type_name())))
                    }
                };
                let (result, updated) = call_method(obj, method, argv)?;
                if let (Some(updated), Expr::Var(name)) = (updated, receiver.as_ref()) {
                    if let Some(slot) = frame.get_mut(name) {
                        slot.value = Value::Obj(updated);
                    }
                }
                Ok(result)
            }
            Expr::Call { function, args } => {
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(frame, a)?);
                }
                if let Some(v) = intrinsic(function, &argv) {
                    return v;
                }
                let callee = self
                    .program
                    .function(function)
                    .ok_or_else(|| err(ErrorKind::BadCall, format!("unknown function `{function}`")))?;
                if callee.params.len() != argv.len() {
                    return Err(err(ErrorKind::BadCall, format!("`{function}` takes {} arguments", callee.params.len())));
                }
                let mut callee_frame = Frame::default();
                for (p, a) in callee.params.iter().zip(argv) {
                    let value = a
                        .coerce(p.ty)
                        .ok_or_else(|| err(ErrorKind::TypeMismatch, format!("argument `{}` expects {}", p.name, p.ty)))?;
                    callee_frame.slots.push(Slot { name: p.name.clone(), ty: p.ty, value });
                }
                let saved = self.current;
                let v = self.run_body(callee, callee_frame)?;
                self.current = saved;
                Ok(v)
            }
            Expr::Array(items) => {
                let mut vals = Vec::with_capacity(items.len());
                for i in items {
                    vals.push(self.eval(frame, i)?);
                }
                array_value(vals)
            }
            Expr::New(class, args) => {
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(frame, a)?);
                }
                construct(*class, argv)
            }
        }
    }
}

fn index<T>(v: &[T], i: i64) -> Exec<&T> {
    usize::try_from(i)
        .ok()
        .and_then(|i| v.get(i))
        .ok_or_else(|| err(ErrorKind::IndexOutOfBounds, format!("index {i} out of bounds for length {}", v.len())))
}

fn array_value(vals: Vec<Value>) -> Exec<Value> {
    if vals.iter().all(|v| matches!(v, Value::Int(_))) {
        let ints = vals.into_iter().filter_map(|v| if let Value::Int(i) = v { Some(i) } else { None }).collect();
        return Ok(Value::Obj(Object { class: ClassTag::IntArray, data: ObjData::Ints(ints) }));
    }
    let mut reals = Vec::with_capacity(vals.len());
    for v in vals {
        reals.push(v.as_f64().ok_or_else(|| err(ErrorKind::TypeMismatch, "array elements must be numeric"))?);
    }
    Ok(Value::Obj(Object { class: ClassTag::RealArray, data: ObjData::Reals(reals) }))
}

fn construct(class: ClassTag, args: Vec<Value>) -> Exec<Value> {
    let text = match args.as_slice() {
        [] => String::new(),
        [Value::Obj(o)] if o.class == ClassTag::String => o.text().unwrap_or_default().to_string(),
        _ => return Err(err(ErrorKind::BadCall, format!("bad arguments for new {}", class.name()))),
    };
    match class {
        ClassTag::String => Ok(Value::str(text)),
        ClassTag::Builder => Ok(Value::Obj(Object::builder(text))),
        ClassTag::IntArray if args.is_empty() => Ok(Value::Obj(Object { class, data: ObjData::Ints(vec![]) })),
        ClassTag::RealArray if args.is_empty() => Ok(Value::Obj(Object { class, data: ObjData::Reals(vec![]) })),
        _ => Err(err(ErrorKind::BadCall, format!("bad arguments for new {}", class.name()))),
    }
}

fn intrinsic(name: &str, args: &[Value]) -> Option<Exec<Value>> {
    let num = |v: &Value| v.as_f64().ok_or_else(|| err(ErrorKind::TypeMismatch, format!("`{name}` expects a number")));
    match (name, args) {
        ("floor", [v]) => Some(num(v).map(|x| Value::Real(x.floor()))),
        ("trunc", [v]) => Some(num(v).map(|x| Value::Int(x.trunc() as i64))),
        _ => None,
    }
}

/// Names callable without a user definition.
pub fn is_intrinsic(name: &str) -> bool {
    matches!(name, "floor" | "trunc")
}

fn text_of(v: &Value) -> String {
    match v {
        Value::Obj(o) => match &o.data {
            ObjData::Text(s) => s.clone(),
            _ => v.to_string(),
        },
        other => other.to_string(),
    }
}

fn call_method(obj: Object, method: &str, args: Vec<Value>) -> Exec<(Value, Option<Object>)> {
    if args.is_empty() {
        if let Some(v) = eval_state_query(&obj, method) {
            return Ok((v, None));
        }
    }
    let s = obj.text().map(str::to_string);
    match (obj.class, method, args.as_slice(), s) {
        (ClassTag::String, "charAt", [Value::Int(i)], Some(s)) => {
            let chars: Vec<char> = s.chars().collect();
            index(&chars, *i).map(|c| (Value::Int(*c as i64), None))
        }
        (ClassTag::String, "substring", [Value::Int(a), Value::Int(b)], Some(s)) => {
            let chars: Vec<char> = s.chars().collect();
            let (a, b) = (*a, *b);
            if a < 0 || b < a || b as usize > chars.len() {
                return Err(err(ErrorKind::IndexOutOfBounds, format!("substring({a}, {b}) of length {}", chars.len())));
            }
            Ok((Value::str(chars[a as usize..b as usize].iter().collect::<String>()), None))
        }
        (ClassTag::String, "indexOf", [Value::Obj(needle), Value::Int(from)], Some(s)) => {
            let needle: Vec<char> = needle.text().unwrap_or_default().chars().collect();
            let hay: Vec<char> = s.chars().collect();
            let start = (*from).clamp(0, hay.len() as i64) as usize;
            let found = (start..=hay.len().saturating_sub(needle.len()))
                .find(|&i| i + needle.len() <= hay.len() && hay[i..i + needle.len()] == needle[..]);
            Ok((Value::Int(found.map_or(-1, |i| i as i64)), None))
        }
        (ClassTag::Builder, "append", [v], Some(mut s)) => {
            s.push_str(&text_of(v));
            let updated = Object::builder(s);
            Ok((Value::Obj(updated.clone()), Some(updated)))
        }
        (ClassTag::Builder, "appendChar", [Value::Int(code)], Some(mut s)) => {
            let c = u32::try_from(*code)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| err(ErrorKind::TypeMismatch, format!("invalid character code {code}")))?;
            s.push(c);
            let updated = Object::builder(s);
            Ok((Value::Obj(updated.clone()), Some(updated)))
        }
        (ClassTag::Builder | ClassTag::String, "toString", [], Some(s)) => Ok((Value::str(s), None)),
        (class, _, _, _) => Err(err(ErrorKind::BadCall, format!("no method `{method}` on {}", class.name()))),
    }
}

fn numeric_pair(a: &Value, b: &Value) -> Option<NumPair> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(NumPair::Int(*x, *y)),
        _ => Some(NumPair::Real(a.as_f64()?, b.as_f64()?)),
    }
}

enum NumPair {
    Int(i64, i64),
    Real(f64, f64),
}

fn values_equal(a: &Value, b: &Value) -> Option<bool> {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => Some(x == y),
        (Value::Null, Value::Null) => Some(true),
        (Value::Null, Value::Obj(_)) | (Value::Obj(_), Value::Null) => Some(false),
        (Value::Obj(x), Value::Obj(y)) => Some(x == y),
        _ => match numeric_pair(a, b)? {
            NumPair::Int(x, y) => Some(x == y),
            NumPair::Real(x, y) => Some(x == y),
        },
    }
}

fn binary(op: BinaryOp, lhs: Value, rhs: Value) -> Exec<Value> {
    let mismatch =
        || err(ErrorKind::TypeMismatch, format!("bad operands {} {} {}", lhs.type_name(), op.symbol(), rhs.type_name()));
    match op {
        BinaryOp::Eq | BinaryOp::Ne => {
            let eq = values_equal(&lhs, &rhs).ok_or_else(mismatch)?;
            Ok(Value::Bool(if op == BinaryOp::Eq { eq } else { !eq }))
        }
        BinaryOp::Add if matches!((&lhs, &rhs), (Value::Obj(o), _) | (_, Value::Obj(o)) if o.text().is_some()) => {
            Ok(Value::str(format!("{}{}", text_of(&lhs), text_of(&rhs))))
        }
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ord = match numeric_pair(&lhs, &rhs).ok_or_else(mismatch)? {
                NumPair::Int(x, y) => x.partial_cmp(&y),
                NumPair::Real(x, y) => x.partial_cmp(&y),
            };
            use std::cmp::Ordering::*;
            let r = match (op, ord) {
                (_, None) => false,
                (BinaryOp::Lt, Some(o)) => o == Less,
                (BinaryOp::Le, Some(o)) => o != Greater,
                (BinaryOp::Gt, Some(o)) => o == Greater,
                (_, Some(o)) => o != Less,
            };
            Ok(Value::Bool(r))
        }
        _ => match numeric_pair(&lhs, &rhs).ok_or_else(mismatch)? {
            NumPair::Int(x, y) => match op {
                BinaryOp::Add => Ok(Value::Int(x.wrapping_add(y))),
                BinaryOp::Sub => Ok(Value::Int(x.wrapping_sub(y))),
                BinaryOp::Mul => Ok(Value::Int(x.wrapping_mul(y))),
                BinaryOp::Div if y == 0 => Err(err(ErrorKind::DivisionByZero, "integer division by zero")),
                BinaryOp::Div => Ok(Value::Int(x.wrapping_div(y))),
                BinaryOp::Rem if y == 0 => Err(err(ErrorKind::DivisionByZero, "integer remainder by zero")),
                BinaryOp::Rem => Ok(Value::Int(x.wrapping_rem(y))),
                _ => Err(mismatch()),
            },
            NumPair::Real(x, y) => match op {
                BinaryOp::Add => Ok(Value::Real(x + y)),
                BinaryOp::Sub => Ok(Value::Real(x - y)),
                BinaryOp::Mul => Ok(Value::Real(x * y)),
                BinaryOp::Div => Ok(Value::Real(x / y)),
                BinaryOp::Rem => Ok(Value::Real(x % y)),
                _ => Err(mismatch()),
            },
        },
    }
}

/// Evaluates a closed expression built from literals, array literals and
/// constructors, as used for test arguments and oracles.
pub fn eval_constant(e: &Expr) -> Result<Value, String> {
    let fault = |f: Fault| match f {
        Fault::Error(e) => e.message,
        Fault::Budget => "step budget exhausted".to_string(),
    };
    match e {
        Expr::Lit(lit) => Ok(Value::from_literal(lit)),
        Expr::Unary(UnaryOp::Neg, inner) => match eval_constant(inner)? {
            Value::Int(i) => Ok(Value::Int(i.wrapping_neg())),
            Value::Real(r) => Ok(Value::Real(-r)),
            other => Err(format!("cannot negate {}", other.type_name())),
        },
        Expr::Array(items) => {
            let vals = items.iter().map(eval_constant).collect::<Result<Vec<_>, _>>()?;
            array_value(vals).map_err(fault)
        }
        Expr::New(class, args) => {
            let vals = args.iter().map(eval_constant).collect::<Result<Vec<_>, _>>()?;
            construct(*class, vals).map_err(fault)
        }
        other => Err(format!("`{}` is not a constant", super::printer::expr_to_string(other))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

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

    fn gcd() -> Program {
        Program::parse(GCD).unwrap()
    }

    fn run(p: &Program, f: &str, args: Vec<Value>, c: &ExecutionControls) -> ExecutionResult {
        execute(p, &Call::new(f, args), c).unwrap()
    }

    #[test]
    fn gcd_zero_left_hits_condition_once() {
        let r = run(&gcd(), "gcd", vec![Value::Int(0), Value::Int(6)], &ExecutionControls::default());
        assert_eq!(r.outcome, Outcome::Returned(Value::Int(6)));
        assert_eq!(r.hit_count(Location(1)), 1);
        assert_eq!(r.hit_count(Location(3)), 0);
    }

    #[test]
    fn gcd_large_operands_overflow_product() {
        let big = 4_294_967_296;
        let r = run(&gcd(), "gcd", vec![Value::Int(big), Value::Int(big)], &ExecutionControls::default());
        assert_eq!(r.outcome, Outcome::Returned(Value::Int(2 * big)));
    }

    #[test]
    fn override_forces_branch() {
        let c = ExecutionControls::default().force(Location(1), true);
        let r = run(&gcd(), "gcd", vec![Value::Int(3), Value::Int(5)], &c);
        assert_eq!(r.outcome, Outcome::Returned(Value::Int(8)));
    }

    #[test]
    fn probe_captures_objects() {
        let p = Program::parse(
            "fn f(n: int, s: String) -> int {
    let k: int = n + 1;
    return k;
}",
        )
        .unwrap();
        let c = ExecutionControls::default().probe(Location(2));
        let r = run(&p, "f", vec![Value::Int(3), Value::str("abc")], &c);
        assert_eq!(r.snapshots.len(), 1);
        let snap = &r.snapshots[0];
        assert_eq!(snap.primitive("n"), Some(&Value::Int(3)));
        assert_eq!(snap.primitive("k"), Some(&Value::Int(4)));
        let s = snap.object("s").unwrap();
        assert!(!s.is_null);
        assert!(s.queries.contains(&("length".to_string(), Value::Int(3))));
    }

    #[test]
    fn skip_removes_side_effect() {
        let p = Program::parse(
            "fn f(x: int) -> int {
    x = x + 1;
    return x;
}",
        )
        .unwrap();
        let c = ExecutionControls::default().skip(Location(1));
        let r = run(&p, "f", vec![Value::Int(1)], &c);
        assert_eq!(r.outcome, Outcome::Returned(Value::Int(1)));
        assert_eq!(r.hit_count(Location(1)), 0);
    }

    #[test]
    fn forced_loop_exhausts_budget() {
        let p = Program::parse(
            "fn f(x: int) -> int {
    let i: int = 0;
    while (i < x) {
        if (i >= 0) {
            i = i + 1;
        }
    }
    return i;
}",
        )
        .unwrap();
        let c = ExecutionControls::with_budget(1000).force(Location(3), false);
        let r = run(&p, "f", vec![Value::Int(2)], &c);
        assert_eq!(r.outcome, Outcome::BudgetExhausted);
    }

    #[test]
    fn short_circuit_avoids_null_dereference() {
        let p = Program::parse(
            "fn f(s: String) -> bool {
    return s == null || s.length() == 0;
}",
        )
        .unwrap();
        let r = run(&p, "f", vec![Value::Null], &ExecutionControls::default());
        assert_eq!(r.outcome, Outcome::Returned(Value::Bool(true)));
    }

    #[test]
    fn runtime_errors_are_outcomes() {
        let p = Program::parse("fn f(x: int) -> int { return 10 / x; }").unwrap();
        let r = run(&p, "f", vec![Value::Int(0)], &ExecutionControls::default());
        match r.outcome {
            Outcome::Failed(e) => assert_eq!(e.kind, ErrorKind::DivisionByZero),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn controls_on_wrong_kind_are_rejected() {
        let c = ExecutionControls::default().skip(Location(1));
        assert!(execute(&gcd(), &Call::new("gcd", vec![Value::Int(1), Value::Int(1)]), &c).is_err());
    }

    proptest! {
        #[test]
        fn execution_is_deterministic(u in -50i64..50, v in -50i64..50) {
            let p = gcd();
            let c = ExecutionControls::default().probe(Location(1)).probe(Location(4));
            let a = run(&p, "gcd", vec![Value::Int(u), Value::Int(v)], &c);
            let b = run(&p, "gcd", vec![Value::Int(u), Value::Int(v)], &c);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn override_is_total(u in -50i64..50, v in -50i64..50, forced: bool) {
            let p = gcd();
            let c = ExecutionControls::default().force(Location(7), forced).probe(Location(7));
            let r = run(&p, "gcd", vec![Value::Int(u), Value::Int(v)], &c);
            for snap in &r.snapshots {
                prop_assert_eq!(snap.condition, Some(forced));
            }
            if r.hit_count(Location(7)) > 0 {
                let then_hits = r.hit_count(Location(8));
                prop_assert_eq!(then_hits > 0, forced);
            }
        }

        #[test]
        fn skipped_statement_never_counts(u in -50i64..50, v in 1i64..50) {
            let p = gcd();
            let c = ExecutionControls::with_budget(10_000).skip(Location(5));
            let r = run(&p, "gcd", vec![Value::Int(u), Value::Int(v)], &c);
            prop_assert_eq!(r.hit_count(Location(5)), 0);
        }
    }
}

//! MiniLang: AST, text format and an instrumentable interpreter.

pub mod ast;
pub mod interp;
mod lexer;
mod parser;
pub mod printer;
pub mod value;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::*;
pub use interp::{
    eval_constant, execute, Call, ErrorKind, ExecutionControls, ExecutionResult, ObjectObservation, Outcome,
    ProbeSnapshot, RuntimeError, DEFAULT_STEP_BUDGET,
};
pub use parser::parse_expr;
pub use value::{state_queries, ObjData, Object, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("duplicate definition of `{0}`")]
    Duplicate(String),
    #[error("unresolved identifier `{name}` in `{function}`")]
    UnresolvedIdentifier { name: String, function: String },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown location {0}")]
    UnknownLocation(Location),
    #[error("statement at {location} is not a {expected:?} statement")]
    KindMismatch { location: Location, expected: StatementKind },
    #[error("`{name}` is not in scope at {location}")]
    OutOfScope { name: String, location: Location },
    #[error("bad arguments: {0}")]
    BadArguments(String),
}

/// The two repair shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RepairKind {
    ConditionUpdate,
    PreconditionAddition,
}

impl RepairKind {
    pub fn name(self) -> &'static str {
        match self {
            RepairKind::ConditionUpdate => "condition",
            RepairKind::PreconditionAddition => "precondition",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "condition" => Some(RepairKind::ConditionUpdate),
            "precondition" => Some(RepairKind::PreconditionAddition),
            _ => None,
        }
    }

    /// Statement kind the repair applies to.
    pub fn target(self) -> StatementKind {
        match self {
            RepairKind::ConditionUpdate => StatementKind::IfStatement,
            RepairKind::PreconditionAddition => StatementKind::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub kind: RepairKind,
    pub location: Location,
    pub expr: Expr,
}

impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.kind.name(), self.location, printer::expr_to_string(&self.expr))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub globals: Vec<GlobalDef>,
    pub functions: Vec<FunctionDef>,
    index: Vec<StmtInfo>,
}

fn walk<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        match &s.kind {
            StmtKind::If { then_block, else_block, .. } => {
                walk(then_block, f);
                walk(else_block, f);
            }
            StmtKind::While { body, .. } => walk(body, f),
            _ => {}
        }
    }
}

fn walk_mut(stmts: &mut Vec<Stmt>, f: &mut dyn FnMut(&mut Vec<Stmt>, usize) -> bool) -> bool {
    for i in 0..stmts.len() {
        if f(stmts, i) {
            return true;
        }
        let found = match &mut stmts[i].kind {
            StmtKind::If { then_block, else_block, .. } => walk_mut(then_block, f) || walk_mut(else_block, f),
            StmtKind::While { body, .. } => walk_mut(body, f),
            _ => false,
        };
        if found {
            return true;
        }
    }
    false
}

fn stmt_exprs(s: &Stmt) -> Vec<&Expr> {
    match &s.kind {
        StmtKind::Let { init, .. } => vec![init],
        StmtKind::Assign { value, .. } => vec![value],
        StmtKind::Expr(e) | StmtKind::Return(e) | StmtKind::Throw(e) => vec![e],
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
    }
}

fn visit_calls(e: &Expr, f: &mut dyn FnMut(&str)) {
    match e {
        Expr::Lit(_) | Expr::Var(_) => {}
        Expr::Unary(_, a) => visit_calls(a, f),
        Expr::Binary(_, a, b) | Expr::Index(a, b) => {
            visit_calls(a, f);
            visit_calls(b, f);
        }
        Expr::Method { receiver, args, .. } => {
            visit_calls(receiver, f);
            args.iter().for_each(|a| visit_calls(a, f));
        }
        Expr::Call { function, args } => {
            f(function);
            args.iter().for_each(|a| visit_calls(a, f));
        }
        Expr::Array(args) | Expr::New(_, args) => args.iter().for_each(|a| visit_calls(a, f)),
    }
}

impl Program {
    /// Parses and resolves a program.
    pub fn parse(src: &str) -> Result<Self, ProgramError> {
        let items = parser::Parser::new(src)?.parse_items()?;
        Self::from_parts(items.globals, items.functions)
    }

    /// Builds a program from definitions, checking names and location density.
    pub fn from_parts(globals: Vec<GlobalDef>, functions: Vec<FunctionDef>) -> Result<Self, ProgramError> {
        let mut seen = BTreeSet::new();
        for name in globals.iter().map(|g| &g.name).chain(functions.iter().map(|f| &f.name)) {
            if !seen.insert(name.clone()) {
                return Err(ProgramError::Duplicate(name.clone()));
            }
        }
        let mut slots: Vec<Option<StmtInfo>> = Vec::new();
        for (fi, func) in functions.iter().enumerate() {
            walk(&func.body, &mut |s| {
                let i = s.loc.index();
                if slots.len() <= i {
                    slots.resize(i + 1, None);
                }
                slots[i] = Some(StmtInfo { function: fi, kind: s.kind.class() });
            });
        }
        let index = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or(ProgramError::UnknownLocation(Location(i as u32 + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        let program = Program { globals, functions, index };
        program.resolve()?;
        Ok(program)
    }

    fn resolve(&self) -> Result<(), ProgramError> {
        for func in &self.functions {
            let mut known: BTreeSet<&str> = self.globals.iter().map(|g| g.name.as_str()).collect();
            known.extend(func.params.iter().map(|p| p.name.as_str()));
            let mut error = None;
            walk(&func.body, &mut |s| {
                if error.is_some() {
                    return;
                }
                for e in stmt_exprs(s) {
                    e.visit_vars(&mut |name| {
                        if error.is_none() && !known.contains(name) {
                            error = Some(ProgramError::UnresolvedIdentifier {
                                name: name.to_string(),
                                function: func.name.clone(),
                            });
                        }
                    });
                    visit_calls(e, &mut |name| {
                        if error.is_none() && self.function(name).is_none() && !interp::is_intrinsic(name) {
                            error = Some(ProgramError::UnknownFunction(name.to_string()));
                        }
                    });
                }
                match &s.kind {
                    StmtKind::Let { name, .. } => {
                        known.insert(name.as_str());
                    }
                    StmtKind::Assign { target, .. } if !known.contains(target.as_str()) => {
                        error = Some(ProgramError::UnresolvedIdentifier {
                            name: target.clone(),
                            function: func.name.clone(),
                        });
                    }
                    _ => {}
                }
            });
            if let Some(e) = error {
                return Err(e);
            }
        }
        Ok(())
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Number of statements; locations run from 1 to this value.
    pub fn statement_count(&self) -> usize {
        self.index.len()
    }

    pub fn locations(&self) -> impl Iterator<Item = Location> {
        (1..=self.index.len() as u32).map(Location)
    }

    pub fn classify(&self, loc: Location) -> Result<StatementKind, ProgramError> {
        self.info(loc).map(|i| i.kind)
    }

    fn info(&self, loc: Location) -> Result<StmtInfo, ProgramError> {
        if loc.0 == 0 {
            return Err(ProgramError::UnknownLocation(loc));
        }
        self.index.get(loc.index()).copied().ok_or(ProgramError::UnknownLocation(loc))
    }

    pub fn statement(&self, loc: Location) -> Result<&Stmt, ProgramError> {
        let info = self.info(loc)?;
        let mut found = None;
        walk(&self.functions[info.function].body, &mut |s| {
            if s.loc == loc {
                found = Some(s);
            }
        });
        found.ok_or(ProgramError::UnknownLocation(loc))
    }

    /// Function containing the statement.
    pub fn function_of(&self, loc: Location) -> Result<&FunctionDef, ProgramError> {
        Ok(&self.functions[self.info(loc)?.function])
    }

    /// Names visible at a statement: globals, parameters and locals declared
    /// earlier in the function.
    pub fn scope_at(&self, loc: Location) -> Result<Vec<(String, Type)>, ProgramError> {
        let func = self.function_of(loc)?;
        let mut names: Vec<(String, Type)> = func.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
        walk(&func.body, &mut |s| {
            if let StmtKind::Let { name, ty, .. } = &s.kind {
                if s.loc < loc && !names.iter().any(|(n, _)| n == name) {
                    names.push((name.clone(), *ty));
                }
            }
        });
        names.extend(self.globals.iter().map(|g| (g.name.clone(), g.ty)));
        Ok(names)
    }

    /// Replaces a condition or wraps a plain statement in a guard. The new
    /// guard gets the next free location; all other locations are kept.
    pub fn apply_patch(&self, patch: &Patch) -> Result<Program, ProgramError> {
        let kind = self.classify(patch.location)?;
        let expected = patch.kind.target();
        if kind != expected {
            return Err(ProgramError::KindMismatch { location: patch.location, expected });
        }
        let scope = self.scope_at(patch.location)?;
        let mut missing = None;
        patch.expr.visit_vars(&mut |name| {
            if missing.is_none() && !scope.iter().any(|(n, _)| n == name) {
                missing = Some(name.to_string());
            }
        });
        if let Some(name) = missing {
            return Err(ProgramError::OutOfScope { name, location: patch.location });
        }

        let mut functions = self.functions.clone();
        let fi = self.info(patch.location)?.function;
        let guard_loc = Location(self.index.len() as u32 + 1);
        walk_mut(&mut functions[fi].body, &mut |stmts, i| {
            if stmts[i].loc != patch.location {
                return false;
            }
            match patch.kind {
                RepairKind::ConditionUpdate => {
                    if let StmtKind::If { cond, .. } = &mut stmts[i].kind {
                        *cond = patch.expr.clone();
                    }
                }
                RepairKind::PreconditionAddition => {
                    let inner = stmts[i].clone();
                    stmts[i] = Stmt {
                        loc: guard_loc,
                        kind: StmtKind::If { cond: patch.expr.clone(), then_block: vec![inner], else_block: vec![] },
                    };
                }
            }
            true
        });
        Program::from_parts(self.globals.clone(), functions)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.globals {
            f.write_str(&printer::global_to_string(g))?;
        }
        for (i, func) in self.functions.iter().enumerate() {
            if i > 0 || !self.globals.is_empty() {
                f.write_str("\n")?;
            }
            f.write_str(&printer::function_to_string(func))?;
        }
        Ok(())
    }
}

/// Parses program text.
pub fn parse_program(src: &str) -> Result<Program, ProgramError> {
    Program::parse(src)
}

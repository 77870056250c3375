//! Syntax tree of MiniLang programs.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Absolute position of a statement, dense and assigned in source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Location(pub u32);

impl Location {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// Built-in classes. Every class has a fixed set of state query methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassTag {
    String,
    Builder,
    IntArray,
    RealArray,
}

impl ClassTag {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "String" => Some(Self::String),
            "Builder" => Some(Self::Builder),
            "IntArray" => Some(Self::IntArray),
            "RealArray" => Some(Self::RealArray),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::String => "String",
            Self::Builder => "Builder",
            Self::IntArray => "IntArray",
            Self::RealArray => "RealArray",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Bool,
    Int,
    Real,
    Class(ClassTag),
}

impl Type {
    pub fn is_primitive(self) -> bool {
        !matches!(self, Type::Class(_))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Bool => f.write_str("bool"),
            Type::Int => f.write_str("int"),
            Type::Real => f.write_str("real"),
            Type::Class(c) => f.write_str(c.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Real(f64),
    /// Character literal; evaluates to its code point as an int.
    Char(char),
    Str(String),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Literal),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Method {
        receiver: Box<Expr>,
        method: String,
        args: Vec<Expr>,
    },
    Call {
        function: String,
        args: Vec<Expr>,
    },
    Array(Vec<Expr>),
    New(ClassTag, Vec<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn int(v: i64) -> Self {
        Expr::Lit(Literal::Int(v))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(inner: Expr) -> Self {
        Expr::Unary(UnaryOp::Not, Box::new(inner))
    }

    /// Calls `f` on every variable name referenced by the expression.
    pub fn visit_vars(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(name) => f(name),
            Expr::Unary(_, e) => e.visit_vars(f),
            Expr::Binary(_, a, b) | Expr::Index(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Expr::Method { receiver, args, .. } => {
                receiver.visit_vars(f);
                args.iter().for_each(|a| a.visit_vars(f));
            }
            Expr::Call { args, .. } | Expr::Array(args) | Expr::New(_, args) => {
                args.iter().for_each(|a| a.visit_vars(f))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub loc: Location,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Let { name: String, ty: Type, init: Expr },
    Assign { target: String, value: Expr },
    Expr(Expr),
    Return(Expr),
    Throw(Expr),
    If { cond: Expr, then_block: Vec<Stmt>, else_block: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
}

/// Coarse statement classes driving the choice of repair kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatementKind {
    IfStatement,
    Plain,
    Loop,
}

impl StmtKind {
    pub fn class(&self) -> StatementKind {
        match self {
            StmtKind::If { .. } => StatementKind::IfStatement,
            StmtKind::While { .. } => StatementKind::Loop,
            _ => StatementKind::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDef {
    pub name: String,
    pub ty: Type,
    pub value: Literal,
}

/// Per-location index entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StmtInfo {
    pub function: usize,
    pub kind: StatementKind,
}

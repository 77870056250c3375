use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Exact, Model, Op, SynthError, SynthesisProblem};
use crate::minilang::{parse_expr, printer, BinaryOp, Expr, Literal};
use crate::trace::Sort;

/// A synthesized boolean expression over input columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatchExpr {
    Input { index: usize, name: String, constant: bool },
    App { op: Op, label: Option<String>, args: Vec<PatchExpr> },
}

fn arith(op: Op, a: &Exact, b: &Exact) -> Option<Exact> {
    Some(match (a, b) {
        (Exact::Int(x), Exact::Int(y)) => Exact::Int(match op {
            Op::Add => x.checked_add(*y)?,
            Op::Sub => x.checked_sub(*y)?,
            Op::Mul => x.checked_mul(*y)?,
            _ => return None,
        }),
        (Exact::Real(x), Exact::Real(y)) => Exact::Real(match op {
            Op::Add => x + y,
            Op::Sub => x - y,
            Op::Mul => x * y,
            _ => return None,
        }),
        _ => return None,
    })
}

/// Applies an operator to exact values. `None` on sort mismatch or integer
/// overflow.
pub(crate) fn apply(op: Op, args: &[Exact]) -> Option<Exact> {
    use std::cmp::Ordering;
    let cmp = |a: &Exact, b: &Exact| -> Option<Ordering> {
        match (a, b) {
            (Exact::Int(x), Exact::Int(y)) => Some(x.cmp(y)),
            (Exact::Real(x), Exact::Real(y)) => Some(x.cmp(y)),
            _ => None,
        }
    };
    match (op, args) {
        (Op::Not, [Exact::Bool(b)]) => Some(Exact::Bool(!b)),
        (Op::And, [Exact::Bool(a), Exact::Bool(b)]) => Some(Exact::Bool(*a && *b)),
        (Op::Or, [Exact::Bool(a), Exact::Bool(b)]) => Some(Exact::Bool(*a || *b)),
        (Op::Lt, [a, b]) => Some(Exact::Bool(cmp(a, b)? == Ordering::Less)),
        (Op::Le, [a, b]) => Some(Exact::Bool(cmp(a, b)? != Ordering::Greater)),
        (Op::Eq, [a, b]) if a.sort() == b.sort() => Some(Exact::Bool(a == b)),
        (Op::Ne, [a, b]) if a.sort() == b.sort() => Some(Exact::Bool(a != b)),
        (Op::Add | Op::Sub | Op::Mul, [a, b]) => arith(op, a, b),
        _ => None,
    }
}

impl PatchExpr {
    pub fn eval(&self, inputs: &[Exact]) -> Option<Exact> {
        match self {
            PatchExpr::Input { index, .. } => inputs.get(*index).cloned(),
            PatchExpr::App { op, args, .. } => {
                let vals = args.iter().map(|a| a.eval(inputs)).collect::<Option<Vec<_>>>()?;
                apply(*op, &vals)
            }
        }
    }

    /// Whether the expression yields the expected output on every row.
    pub fn matches(&self, problem: &SynthesisProblem) -> bool {
        problem.rows.iter().all(|r| self.eval(&r.inputs) == Some(Exact::Bool(r.expected)))
    }

    pub fn size(&self) -> usize {
        match self {
            PatchExpr::Input { .. } => 1,
            PatchExpr::App { args, .. } => 1 + args.iter().map(PatchExpr::size).sum::<usize>(),
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self, PatchExpr::Input { constant: true, .. })
    }

    /// MiniLang form. `a < b` with a constant left operand and a
    /// non-constant right operand prints as `b > a`; same for `<=`.
    pub fn to_expr(&self) -> Expr {
        match self {
            PatchExpr::Input { name, .. } => parse_expr(name).unwrap_or_else(|_| Expr::Var(name.clone())),
            PatchExpr::App { label: Some(label), args, .. } => {
                Expr::Call { function: label.clone(), args: args.iter().map(PatchExpr::to_expr).collect() }
            }
            PatchExpr::App { op, label: None, args } => match (op, args.as_slice()) {
                (Op::Not, [a]) => Expr::not(a.to_expr()),
                (Op::Lt | Op::Le, [a, b]) if a.is_constant() && !b.is_constant() => {
                    let flipped = if *op == Op::Lt { BinaryOp::Gt } else { BinaryOp::Ge };
                    Expr::binary(flipped, b.to_expr(), a.to_expr())
                }
                (_, [a, b]) => {
                    let bin = match op {
                        Op::Lt => BinaryOp::Lt,
                        Op::Le => BinaryOp::Le,
                        Op::Eq => BinaryOp::Eq,
                        Op::Ne => BinaryOp::Ne,
                        Op::And => BinaryOp::And,
                        Op::Or => BinaryOp::Or,
                        Op::Add => BinaryOp::Add,
                        Op::Sub => BinaryOp::Sub,
                        Op::Mul => BinaryOp::Mul,
                        Op::Not => unreachable!("unary"),
                    };
                    Expr::binary(bin, a.to_expr(), b.to_expr())
                }
                _ => Expr::Lit(Literal::Null),
            },
        }
    }
}

impl fmt::Display for PatchExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&printer::expr_to_string(&self.to_expr()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureViolation {
    #[error("fixed locations: {0}")]
    Fixed(String),
    #[error("output range: {0}")]
    Output(String),
    #[error("distinct outputs: {0}")]
    Cons(String),
    #[error("acyclicity: {0}")]
    Acyc(String),
    #[error("input typing: {0}")]
    Input(String),
    #[error("result: {0}")]
    Result(String),
}

/// Checks the well-formedness constraints on a model.
pub fn check_structure(problem: &SynthesisProblem, model: &Model) -> Result<(), StructureViolation> {
    let n = problem.inputs.len();
    let p = problem.p();
    if model.inputs.len() != n || model.outputs.len() != problem.components.len() || model.args.len() != problem.components.len() {
        return Err(StructureViolation::Fixed("model shape does not match problem".into()));
    }
    for (i, l) in model.inputs.iter().enumerate() {
        if *l != problem.input_location(i) {
            return Err(StructureViolation::Fixed(format!("input {} at {l}", i + 1)));
        }
    }
    if model.result != p {
        return Err(StructureViolation::Fixed(format!("result at {} instead of {p}", model.result)));
    }
    for (j, l) in model.outputs.iter().enumerate() {
        if *l < n as i64 + 1 || *l > p {
            return Err(StructureViolation::Output(format!("component {j} output at {l}")));
        }
        if model.outputs[..j].contains(l) {
            return Err(StructureViolation::Cons(format!("two outputs at {l}")));
        }
    }
    for (j, comp) in problem.components.iter().enumerate() {
        let args = &model.args[j];
        if args.len() != comp.inputs.len() {
            return Err(StructureViolation::Input(format!("component {j} arity")));
        }
        for (a, (l, sort)) in args.iter().zip(&comp.inputs).enumerate() {
            if *l >= model.outputs[j] {
                return Err(StructureViolation::Acyc(format!("component {j} argument {a} at {l}")));
            }
            let from_input = *l >= 1 && *l <= n as i64 && problem.inputs[(*l - 1) as usize].sort == *sort;
            let from_output = problem
                .components
                .iter()
                .zip(&model.outputs)
                .enumerate()
                .any(|(k, (c, o))| k != j && *o == *l && c.output == *sort);
            if !from_input && !from_output {
                return Err(StructureViolation::Input(format!("component {j} argument {a} at {l} has no {sort} source")));
            }
        }
    }
    let result_sort = if problem.components.is_empty() {
        problem.inputs.last().map(|i| i.sort)
    } else {
        problem.components.iter().zip(&model.outputs).find(|(_, o)| **o == p).map(|(c, _)| c.output)
    };
    if result_sort != Some(Sort::Bool) {
        return Err(StructureViolation::Result("element at the result location is not boolean".into()));
    }
    Ok(())
}

/// Translates a model into an expression by walking back from the result
/// location.
pub fn decode(problem: &SynthesisProblem, model: &Model) -> Result<PatchExpr, SynthError> {
    check_structure(problem, model).map_err(|e| SynthError::Malformed(e.to_string()))?;
    Ok(traverse(problem, model, model.result, Sort::Bool))
}

fn traverse(problem: &SynthesisProblem, model: &Model, loc: i64, sort: Sort) -> PatchExpr {
    if let Some(j) = model.outputs.iter().position(|o| *o == loc) {
        let comp = &problem.components[j];
        let args = model.args[j].iter().zip(&comp.inputs).map(|(l, s)| traverse(problem, model, *l, *s)).collect();
        return PatchExpr::App { op: comp.op, label: comp.label.clone(), args };
    }
    let index = (loc - 1) as usize;
    let slot = &problem.inputs[index];
    debug_assert_eq!(slot.sort, sort);
    PatchExpr::Input { index, name: slot.name.clone(), constant: slot.constant }
}

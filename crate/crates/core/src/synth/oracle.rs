//! Reference enumerator used to cross-check the solving backends.
//!
//! Enumerates expression trees by size, in a fixed order, and evaluates
//! each one directly on the rows. Every operator occurrence in a tree
//! consumes one component, so a tree is admitted only when its operator
//! counts fit the level.

use std::collections::HashMap;

use num_rational::BigRational;

use super::{encode, Exact, Op, PatchExpr, SmtLevel, SynthesisProblem};
use crate::trace::{Sort, TraceMatrix};

#[derive(Clone)]
struct Shape {
    op: Op,
    label: Option<String>,
    inputs: Vec<Sort>,
    output: Sort,
}

fn eval(e: &PatchExpr, row: &[Exact]) -> Option<Exact> {
    match e {
        PatchExpr::Input { index, .. } => row.get(*index).cloned(),
        PatchExpr::App { op, args, .. } => {
            let v: Vec<Exact> = args.iter().map(|a| eval(a, row)).collect::<Option<_>>()?;
            let num = |x: &Exact| -> Option<BigRational> {
                match x {
                    Exact::Int(i) => Some(BigRational::from_integer((*i).into())),
                    Exact::Real(r) => Some(r.clone()),
                    Exact::Bool(_) => None,
                }
            };
            let boolean = |x: &Exact| x.as_bool();
            let int_result = matches!(v.first(), Some(Exact::Int(_)));
            Some(match op {
                Op::Not => Exact::Bool(!boolean(&v[0])?),
                Op::And => Exact::Bool(boolean(&v[0])? & boolean(&v[1])?),
                Op::Or => Exact::Bool(boolean(&v[0])? | boolean(&v[1])?),
                Op::Lt => Exact::Bool(num(&v[0])? < num(&v[1])?),
                Op::Le => Exact::Bool(num(&v[0])? <= num(&v[1])?),
                Op::Eq => Exact::Bool(num(&v[0])? == num(&v[1])?),
                Op::Ne => Exact::Bool(num(&v[0])? != num(&v[1])?),
                Op::Add | Op::Sub | Op::Mul => {
                    let (a, b) = (num(&v[0])?, num(&v[1])?);
                    let r = match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        _ => a * b,
                    };
                    if int_result {
                        if !r.is_integer() {
                            return None;
                        }
                        let i: i128 = r.to_integer().try_into().ok()?;
                        Exact::Int(i)
                    } else {
                        Exact::Real(r)
                    }
                }
            })
        }
    }
}

fn op_uses(e: &PatchExpr, counts: &mut HashMap<(Op, Option<String>), usize>) {
    if let PatchExpr::App { op, label, args } = e {
        *counts.entry((*op, label.clone())).or_default() += 1;
        for a in args {
            op_uses(a, counts);
        }
    }
}

struct Trees<'a> {
    problem: &'a SynthesisProblem,
    shapes: Vec<Shape>,
    memo: HashMap<(Sort, usize), Vec<PatchExpr>>,
}

impl Trees<'_> {
    fn of(&mut self, sort: Sort, size: usize) -> Vec<PatchExpr> {
        if let Some(v) = self.memo.get(&(sort, size)) {
            return v.clone();
        }
        let mut out = Vec::new();
        if size == 1 {
            for (index, slot) in self.problem.inputs.iter().enumerate() {
                if slot.sort == sort {
                    out.push(PatchExpr::Input { index, name: slot.name.clone(), constant: slot.constant });
                }
            }
        } else {
            for shape in self.shapes.clone() {
                if shape.output != sort {
                    continue;
                }
                if shape.inputs.len() == 1 {
                    for a in self.of(shape.inputs[0], size - 1) {
                        out.push(PatchExpr::App { op: shape.op, label: shape.label.clone(), args: vec![a] });
                    }
                } else {
                    for left in 1..size - 1 {
                        let lhs = self.of(shape.inputs[0], left);
                        let rhs = self.of(shape.inputs[1], size - 1 - left);
                        for a in &lhs {
                            for b in &rhs {
                                out.push(PatchExpr::App {
                                    op: shape.op,
                                    label: shape.label.clone(),
                                    args: vec![a.clone(), b.clone()],
                                });
                            }
                        }
                    }
                }
            }
        }
        self.memo.insert((sort, size), out.clone());
        out
    }
}

/// Smallest tree (by node count, at most `size_bound`) that reproduces
/// every row of the matrix, or `None`.
pub fn enumerate_oracle(matrix: &TraceMatrix, level: &SmtLevel, size_bound: usize) -> Option<PatchExpr> {
    let problem = encode(matrix, level).ok()?;
    let mut limits: HashMap<(Op, Option<String>), usize> = HashMap::new();
    let mut shapes: Vec<Shape> = Vec::new();
    for c in &problem.components {
        *limits.entry((c.op, c.label.clone())).or_default() += 1;
        if !shapes.iter().any(|s| s.op == c.op && s.label == c.label && s.inputs == c.inputs) {
            shapes.push(Shape { op: c.op, label: c.label.clone(), inputs: c.inputs.clone(), output: c.output });
        }
    }
    let needs_op = !problem.components.is_empty();
    let mut trees = Trees { problem: &problem, shapes, memo: HashMap::new() };
    for size in 1..=size_bound {
        if needs_op && size == 1 {
            continue;
        }
        for tree in trees.of(Sort::Bool, size) {
            if !needs_op && size == 1 {
                if let PatchExpr::Input { index, .. } = tree {
                    if index + 1 != problem.inputs.len() {
                        continue;
                    }
                }
            }
            let mut uses = HashMap::new();
            op_uses(&tree, &mut uses);
            if uses.iter().any(|(k, n)| limits.get(k).copied().unwrap_or(0) < *n) {
                continue;
            }
            if problem.rows.iter().all(|r| eval(&tree, &r.inputs) == Some(Exact::Bool(r.expected))) {
                return Some(tree);
            }
        }
    }
    None
}

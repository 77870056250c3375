//! Built-in backend: bottom-up enumeration of expressions by number of
//! components, deduplicated by their values on the rows.
//!
//! A term's component usage is the sum over its arguments, except that
//! `op(t, t)` counts `t` once. Terms sharing deeper subterms may therefore
//! be found only at a higher count than the solver would need; every answer
//! is still a valid model.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_rational::BigRational;

use super::decode::apply;
use super::{Exact, Model, Op, SolveOutcome, SynthesisProblem};
use crate::trace::Sort;

const MAX_NODES: usize = 3_000_000;

#[derive(Clone, PartialEq, Eq, Hash)]
enum Sig {
    Bool(Vec<u64>),
    Int(Vec<i128>),
    Real(Vec<BigRational>),
}

impl Sig {
    fn from_values(vals: Vec<Exact>) -> Option<Sig> {
        match vals.first()?.sort() {
            Sort::Bool => {
                let mut bits = vec![0u64; vals.len().div_ceil(64)];
                for (i, v) in vals.iter().enumerate() {
                    if v.as_bool()? {
                        bits[i / 64] |= 1 << (i % 64);
                    }
                }
                Some(Sig::Bool(bits))
            }
            Sort::Int => vals.into_iter().map(|v| if let Exact::Int(i) = v { Some(i) } else { None }).collect::<Option<_>>().map(Sig::Int),
            Sort::Real => vals.into_iter().map(|v| if let Exact::Real(r) = v { Some(r) } else { None }).collect::<Option<_>>().map(Sig::Real),
        }
    }

    fn value(&self, row: usize) -> Exact {
        match self {
            Sig::Bool(bits) => Exact::Bool(bits[row / 64] >> (row % 64) & 1 == 1),
            Sig::Int(v) => Exact::Int(v[row]),
            Sig::Real(v) => Exact::Real(v[row].clone()),
        }
    }

    fn sort(&self) -> Sort {
        match self {
            Sig::Bool(_) => Sort::Bool,
            Sig::Int(_) => Sort::Int,
            Sig::Real(_) => Sort::Real,
        }
    }
}

/// Components sharing operator, label and sorts are interchangeable.
#[derive(Clone)]
struct Class {
    op: Op,
    inputs: Vec<Sort>,
    instances: Vec<usize>,
}

#[derive(Clone)]
enum Kind {
    Input(usize),
    App(usize, Vec<usize>),
}

struct Node {
    kind: Kind,
    sig: Sig,
    usage: Vec<u8>,
}

fn sort_slot(s: Sort) -> usize {
    match s {
        Sort::Bool => 0,
        Sort::Int => 1,
        Sort::Real => 2,
    }
}

struct Search<'a> {
    problem: &'a SynthesisProblem,
    classes: Vec<Class>,
    nodes: Vec<Node>,
    seen: HashMap<Sig, Vec<usize>>,
    /// Node ids per cost and sort slot.
    buckets: Vec<[Vec<usize>; 3]>,
    target: Sig,
    rows: usize,
    deadline: Instant,
    ticks: u64,
}

enum Step {
    Found(Model),
    TimedOut,
    Continue,
}

impl<'a> Search<'a> {
    fn new(problem: &'a SynthesisProblem, deadline: Instant) -> Option<Self> {
        let mut classes: Vec<Class> = Vec::new();
        for (j, c) in problem.components.iter().enumerate() {
            match classes.iter_mut().find(|k| k.op == c.op && k.inputs == c.inputs && problem.components[k.instances[0]].label == c.label) {
                Some(k) => k.instances.push(j),
                None => classes.push(Class { op: c.op, inputs: c.inputs.clone(), instances: vec![j] }),
            }
        }
        let rows = problem.rows.len();
        let target = Sig::from_values(problem.rows.iter().map(|r| Exact::Bool(r.expected)).collect())?;
        Some(Search {
            problem,
            classes,
            nodes: Vec::new(),
            seen: HashMap::new(),
            buckets: vec![Default::default()],
            target,
            rows,
            deadline,
            ticks: 0,
        })
    }

    /// Whether an existing term with the same values uses no more of any
    /// component. A bare input never blocks a term matching the target,
    /// since the root must be a component.
    fn dominated(&self, sig: &Sig, usage: &[u8]) -> bool {
        let target = *sig == self.target;
        self.seen.get(sig).is_some_and(|ids| {
            ids.iter().any(|id| {
                let node = &self.nodes[*id];
                !(target && matches!(node.kind, Kind::Input(_))) && node.usage.iter().zip(usage).all(|(a, b)| a <= b)
            })
        })
    }

    fn insert(&mut self, kind: Kind, sig: Sig, usage: Vec<u8>, cost: usize) -> usize {
        let id = self.nodes.len();
        self.seen.entry(sig.clone()).or_default().push(id);
        while self.buckets.len() <= cost {
            self.buckets.push(Default::default());
        }
        self.buckets[cost][sort_slot(sig.sort())].push(id);
        self.nodes.push(Node { kind, sig, usage });
        id
    }

    fn seed_inputs(&mut self) {
        for (i, slot) in self.problem.inputs.iter().enumerate() {
            let vals: Vec<Exact> = self.problem.rows.iter().map(|r| r.inputs[i].clone()).collect();
            let Some(sig) = Sig::from_values(vals) else { continue };
            debug_assert_eq!(sig.sort(), slot.sort);
            let usage = vec![0; self.classes.len()];
            if !self.dominated(&sig, &usage) {
                self.insert(Kind::Input(i), sig, usage, 0);
            }
        }
    }

    fn try_emit(&mut self, class: usize, args: Vec<usize>, cost: usize) -> Step {
        self.ticks += 1;
        if self.ticks % 4096 == 0 && (Instant::now() >= self.deadline || self.nodes.len() >= MAX_NODES) {
            return Step::TimedOut;
        }
        let mut usage = vec![0u8; self.classes.len()];
        let mut distinct = args.clone();
        distinct.dedup();
        for a in &distinct {
            for (u, v) in usage.iter_mut().zip(&self.nodes[*a].usage) {
                *u += v;
            }
        }
        usage[class] += 1;
        if usage.iter().zip(&self.classes).any(|(u, c)| *u as usize > c.instances.len()) {
            return Step::Continue;
        }
        let op = self.classes[class].op;
        let mut vals = Vec::with_capacity(self.rows);
        for row in 0..self.rows {
            let argv: Vec<Exact> = args.iter().map(|a| self.nodes[*a].sig.value(row)).collect();
            match apply(op, &argv) {
                Some(v) => vals.push(v),
                None => return Step::Continue,
            }
        }
        let Some(sig) = Sig::from_values(vals) else { return Step::Continue };
        if self.dominated(&sig, &usage) {
            return Step::Continue;
        }
        let is_target = sig == self.target;
        let id = self.insert(Kind::App(class, args), sig, usage, cost);
        if is_target {
            if let Some(model) = self.build_model(id) {
                return Step::Found(model);
            }
        }
        Step::Continue
    }

    fn grow(&mut self, cost: usize) -> Step {
        while self.buckets.len() <= cost {
            self.buckets.push(Default::default());
        }
        for class in 0..self.classes.len() {
            let Class { op, inputs, .. } = self.classes[class].clone();
            if inputs.len() == 1 {
                let pool = self.buckets[cost - 1][sort_slot(inputs[0])].clone();
                for t in pool {
                    if let s @ (Step::Found(_) | Step::TimedOut) = self.try_emit(class, vec![t], cost) {
                        return s;
                    }
                }
                continue;
            }
            let (s0, s1) = (sort_slot(inputs[0]), sort_slot(inputs[1]));
            for c1 in 0..cost {
                let c2 = cost - 1 - c1;
                if op.is_commutative() && c1 > c2 {
                    continue;
                }
                let left = self.buckets[c1][s0].clone();
                let right = self.buckets[c2][s1].clone();
                for &a in &left {
                    for &b in &right {
                        if a == b || (op.is_commutative() && c1 == c2 && a > b) {
                            continue;
                        }
                        if let s @ (Step::Found(_) | Step::TimedOut) = self.try_emit(class, vec![a, b], cost) {
                            return s;
                        }
                    }
                }
            }
            if s0 == s1 {
                let pool = self.buckets[cost - 1][s0].clone();
                for t in pool {
                    if let s @ (Step::Found(_) | Step::TimedOut) = self.try_emit(class, vec![t, t], cost) {
                        return s;
                    }
                }
            }
        }
        Step::Continue
    }

    /// Lays out the term rooted at `root` as a complete location assignment:
    /// used components first in dependency order, then unused ones wherever
    /// their input sorts are available, and the root last.
    fn build_model(&self, root: usize) -> Option<Model> {
        let problem = self.problem;
        let n = problem.inputs.len() as i64;
        let mut order = Vec::new();
        let mut visited = std::collections::HashSet::new();
        fn post(s: &Search, id: usize, visited: &mut std::collections::HashSet<usize>, order: &mut Vec<usize>) {
            if !visited.insert(id) {
                return;
            }
            if let Kind::App(_, args) = &s.nodes[id].kind {
                for a in args {
                    post(s, *a, visited, order);
                }
                order.push(id);
            }
        }
        post(self, root, &mut visited, &mut order);

        let mut next_instance = vec![0usize; self.classes.len()];
        let mut instance_of = HashMap::new();
        for id in &order {
            let Kind::App(class, _) = &self.nodes[*id].kind else { unreachable!() };
            let k = &self.classes[*class];
            let j = *k.instances.get(next_instance[*class])?;
            next_instance[*class] += 1;
            instance_of.insert(*id, j);
        }

        let m = problem.components.len();
        let mut outputs = vec![0i64; m];
        let mut args = vec![Vec::new(); m];
        let mut placed = vec![false; m];
        let mut next_loc = n + 1;
        let loc_of = |id: usize, instance_of: &HashMap<usize, usize>, outputs: &[i64]| -> i64 {
            match &self.nodes[id].kind {
                Kind::Input(i) => *i as i64 + 1,
                Kind::App(..) => outputs[instance_of[&id]],
            }
        };
        for id in &order[..order.len() - 1] {
            let j = instance_of[id];
            outputs[j] = next_loc;
            next_loc += 1;
            placed[j] = true;
            let Kind::App(_, a) = &self.nodes[*id].kind else { unreachable!() };
            args[j] = a.iter().map(|x| loc_of(*x, &instance_of, &outputs)).collect();
        }
        let root_j = instance_of[&root];
        placed[root_j] = true;
        loop {
            let mut progress = false;
            for j in 0..m {
                if placed[j] {
                    continue;
                }
                let comp = &problem.components[j];
                let source = |s: Sort| -> Option<i64> {
                    problem
                        .inputs
                        .iter()
                        .position(|i| i.sort == s)
                        .map(|i| i as i64 + 1)
                        .or_else(|| {
                            (0..m)
                                .filter(|k| placed[*k] && *k != root_j && problem.components[*k].output == s)
                                .map(|k| outputs[k])
                                .min()
                        })
                };
                if let Some(a) = comp.inputs.iter().map(|s| source(*s)).collect::<Option<Vec<_>>>() {
                    outputs[j] = next_loc;
                    next_loc += 1;
                    args[j] = a;
                    placed[j] = true;
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        if placed.iter().any(|p| !p) {
            return None;
        }
        outputs[root_j] = next_loc;
        let Kind::App(_, a) = &self.nodes[root].kind else { return None };
        args[root_j] = a.iter().map(|x| loc_of(*x, &instance_of, &outputs)).collect();
        debug_assert_eq!(next_loc, problem.p());
        Some(Model { inputs: (1..=n).collect(), result: problem.p(), outputs, args })
    }
}

/// Searches for a model with the built-in enumerator.
pub fn solve_internal(problem: &SynthesisProblem, timeout: Duration) -> SolveOutcome {
    let deadline = Instant::now() + timeout;
    if problem.components.is_empty() {
        let n = problem.inputs.len();
        let last_matches = problem.inputs.last().is_some_and(|s| s.sort == Sort::Bool)
            && problem.rows.iter().all(|r| r.inputs[n - 1] == Exact::Bool(r.expected));
        return if last_matches {
            SolveOutcome::Sat(Model { inputs: (1..=n as i64).collect(), result: n as i64, outputs: vec![], args: vec![] })
        } else {
            SolveOutcome::Unsat
        };
    }
    let Some(mut search) = Search::new(problem, deadline) else { return SolveOutcome::Unsat };
    search.seed_inputs();
    for cost in 1..=problem.components.len() {
        match search.grow(cost) {
            Step::Found(model) => return SolveOutcome::Sat(model),
            Step::TimedOut => return SolveOutcome::Timeout,
            Step::Continue => {}
        }
        if Instant::now() >= deadline {
            return SolveOutcome::Timeout;
        }
    }
    SolveOutcome::Unsat
}

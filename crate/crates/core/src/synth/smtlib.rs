//! SMT-LIB2 rendering of the location-variable encoding and an external
//! solver driver.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::Signed;

use super::{Exact, Model, Op, SolveOutcome, SynthError, SynthesisProblem};
use crate::trace::Sort;

fn sort_name(s: Sort) -> &'static str {
    match s {
        Sort::Bool => "Bool",
        Sort::Int => "Int",
        Sort::Real => "Real",
    }
}

fn int_literal(i: &BigInt) -> String {
    if i.is_negative() {
        format!("(- {})", -i)
    } else {
        i.to_string()
    }
}

fn literal(v: &Exact) -> String {
    match v {
        Exact::Bool(b) => b.to_string(),
        Exact::Int(i) => int_literal(&BigInt::from(*i)),
        Exact::Real(r) => {
            let body = format!("(/ {}.0 {}.0)", r.numer().abs(), r.denom());
            if r.is_negative() {
                format!("(- {body})")
            } else {
                body
            }
        }
    }
}

fn in_loc(k: usize) -> String {
    format!("l_in_{}", k + 1)
}

fn out_loc(j: usize) -> String {
    format!("l_c{j}_out")
}

fn arg_loc(j: usize, a: usize) -> String {
    format!("l_c{j}_arg{a}")
}

/// Every location variable, in the order `get-value` asks for them.
fn location_vars(problem: &SynthesisProblem) -> Vec<String> {
    let mut v: Vec<String> = (0..problem.inputs.len()).map(in_loc).collect();
    v.push("l_r".into());
    for (j, c) in problem.components.iter().enumerate() {
        v.push(out_loc(j));
        v.extend((0..c.inputs.len()).map(|a| arg_loc(j, a)));
    }
    v
}

fn apply_term(op: Op, args: &[String]) -> String {
    match op {
        Op::Lt => format!("(< {} {})", args[0], args[1]),
        Op::Le => format!("(<= {} {})", args[0], args[1]),
        Op::Eq => format!("(= {} {})", args[0], args[1]),
        Op::Ne => format!("(not (= {} {}))", args[0], args[1]),
        Op::And => format!("(and {} {})", args[0], args[1]),
        Op::Or => format!("(or {} {})", args[0], args[1]),
        Op::Not => format!("(not {})", args[0]),
        Op::Add => format!("(+ {} {})", args[0], args[1]),
        Op::Sub => format!("(- {} {})", args[0], args[1]),
        Op::Mul => format!("(* {} {})", args[0], args[1]),
    }
}

/// Renders the problem as an SMT-LIB2 script ending in `check-sat` and a
/// `get-value` over every location variable.
pub fn emit_smtlib(problem: &SynthesisProblem) -> String {
    let n = problem.inputs.len();
    let p = problem.p();
    let mut s = String::new();
    s.push_str("(set-option :produce-models true)\n");
    for var in location_vars(problem) {
        let _ = writeln!(s, "(declare-fun {var} () Int)");
    }

    s.push_str("; fixed locations\n");
    for k in 0..n {
        let _ = writeln!(s, "(assert (= {} {}))", in_loc(k), k + 1);
    }
    let _ = writeln!(s, "(assert (= l_r {p}))");

    s.push_str("; output range and distinctness\n");
    for j in 0..problem.components.len() {
        let _ = writeln!(s, "(assert (and (<= {} {}) (<= {} {p})))", n + 1, out_loc(j), out_loc(j));
    }
    if problem.components.len() > 1 {
        let outs: Vec<String> = (0..problem.components.len()).map(out_loc).collect();
        let _ = writeln!(s, "(assert (distinct {}))", outs.join(" "));
    }

    s.push_str("; argument sources and acyclicity\n");
    for (j, c) in problem.components.iter().enumerate() {
        for (a, sort) in c.inputs.iter().enumerate() {
            let arg = arg_loc(j, a);
            let mut choices: Vec<String> = (0..n)
                .filter(|k| problem.inputs[*k].sort == *sort)
                .map(|k| format!("(= {arg} {})", in_loc(k)))
                .collect();
            choices.extend(
                problem
                    .components
                    .iter()
                    .enumerate()
                    .filter(|(k, d)| *k != j && d.output == *sort)
                    .map(|(k, _)| format!("(= {arg} {})", out_loc(k))),
            );
            match choices.len() {
                0 => s.push_str("(assert false)\n"),
                1 => {
                    let _ = writeln!(s, "(assert {})", choices[0]);
                }
                _ => {
                    let _ = writeln!(s, "(assert (or {}))", choices.join(" "));
                }
            }
            let _ = writeln!(s, "(assert (< {arg} {}))", out_loc(j));
        }
    }

    s.push_str("; boolean result\n");
    let bool_outs: Vec<String> = problem
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.output == Sort::Bool)
        .map(|(j, _)| format!("(= {} l_r)", out_loc(j)))
        .collect();
    if problem.components.is_empty() {
        let last_bool = problem.inputs.last().is_some_and(|i| i.sort == Sort::Bool);
        let _ = writeln!(s, "(assert {last_bool})");
    } else if bool_outs.is_empty() {
        s.push_str("(assert false)\n");
    } else {
        let _ = writeln!(s, "(assert (or {}))", bool_outs.join(" "));
    }

    for (row_idx, row) in problem.rows.iter().enumerate() {
        let _ = writeln!(s, "; row {row_idx}");
        let vin = |k: usize| format!("v_in_{}_{row_idx}", k + 1);
        let vout = |j: usize| format!("v_c{j}_out_{row_idx}");
        let varg = |j: usize, a: usize| format!("v_c{j}_arg{a}_{row_idx}");
        let vr = format!("v_r_{row_idx}");
        for (k, slot) in problem.inputs.iter().enumerate() {
            let _ = writeln!(s, "(declare-fun {} () {})", vin(k), sort_name(slot.sort));
            let _ = writeln!(s, "(assert (= {} {}))", vin(k), literal(&row.inputs[k]));
        }
        let _ = writeln!(s, "(declare-fun {vr} () Bool)");
        let _ = writeln!(s, "(assert (= {vr} {}))", row.expected);
        for (j, c) in problem.components.iter().enumerate() {
            let _ = writeln!(s, "(declare-fun {} () {})", vout(j), sort_name(c.output));
            let args: Vec<String> = (0..c.inputs.len()).map(|a| varg(j, a)).collect();
            for (a, sort) in c.inputs.iter().enumerate() {
                let _ = writeln!(s, "(declare-fun {} () {})", args[a], sort_name(*sort));
            }
            let _ = writeln!(s, "(assert (= {} {}))", vout(j), apply_term(c.op, &args));
        }
        for (j, c) in problem.components.iter().enumerate() {
            for (a, sort) in c.inputs.iter().enumerate() {
                for (k, slot) in problem.inputs.iter().enumerate() {
                    if slot.sort == *sort {
                        let _ = writeln!(s, "(assert (=> (= {} {}) (= {} {})))", arg_loc(j, a), in_loc(k), varg(j, a), vin(k));
                    }
                }
                for (k, d) in problem.components.iter().enumerate() {
                    if k != j && d.output == *sort {
                        let _ = writeln!(s, "(assert (=> (= {} {}) (= {} {})))", arg_loc(j, a), out_loc(k), varg(j, a), vout(k));
                    }
                }
            }
            if c.output == Sort::Bool {
                let _ = writeln!(s, "(assert (=> (= l_r {}) (= {vr} {})))", out_loc(j), vout(j));
            }
        }
        for (k, slot) in problem.inputs.iter().enumerate() {
            if slot.sort == Sort::Bool {
                let _ = writeln!(s, "(assert (=> (= l_r {}) (= {vr} {})))", in_loc(k), vin(k));
            }
        }
    }

    s.push_str("(check-sat)\n");
    let _ = writeln!(s, "(get-value ({}))", location_vars(problem).join(" "));
    s
}

#[derive(Debug, Clone, PartialEq)]
enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

fn parse_sexprs(text: &str) -> Result<Vec<SExpr>, String> {
    let mut stack: Vec<Vec<SExpr>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let list = stack.pop().ok_or("unbalanced ')'")?;
                stack.last_mut().ok_or("unbalanced ')'")?.push(SExpr::List(list));
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' => {
                let mut atom = String::from('"');
                for c in chars.by_ref() {
                    atom.push(c);
                    if c == '"' {
                        break;
                    }
                }
                stack.last_mut().expect("root").push(SExpr::Atom(atom));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut atom = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    atom.push(d);
                    chars.next();
                }
                stack.last_mut().expect("root").push(SExpr::Atom(atom));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced '('".into());
    }
    Ok(stack.pop().expect("root"))
}

fn integer_value(e: &SExpr) -> Option<i64> {
    match e {
        SExpr::Atom(a) => a.parse().ok(),
        SExpr::List(items) => match items.as_slice() {
            [SExpr::Atom(minus), inner] if minus == "-" => integer_value(inner).map(|v| -v),
            _ => None,
        },
    }
}

/// Reads a solver's answer to the script produced by [`emit_smtlib`].
pub fn parse_model_response(problem: &SynthesisProblem, text: &str) -> Result<SolveOutcome, SynthError> {
    let exprs = parse_sexprs(text).map_err(SynthError::Backend)?;
    let status = match exprs.first() {
        Some(SExpr::Atom(a)) => a.as_str(),
        _ => return Err(SynthError::Backend(format!("unexpected solver output: {}", text.trim()))),
    };
    match status {
        "unsat" => return Ok(SolveOutcome::Unsat),
        "unknown" | "timeout" => return Ok(SolveOutcome::Timeout),
        "sat" => {}
        other => return Err(SynthError::Backend(format!("unexpected solver status `{other}`"))),
    }
    let Some(SExpr::List(pairs)) = exprs.get(1) else {
        return Err(SynthError::Backend("missing get-value response".into()));
    };
    let mut values: HashMap<String, i64> = HashMap::new();
    for pair in pairs {
        if let SExpr::List(kv) = pair {
            if let [SExpr::Atom(name), value] = kv.as_slice() {
                let v = integer_value(value).ok_or_else(|| SynthError::Backend(format!("non-integer value for {name}")))?;
                values.insert(name.clone(), v);
            }
        }
    }
    let get = |name: &str| values.get(name).copied().ok_or_else(|| SynthError::Backend(format!("no value for {name}")));
    let inputs = (0..problem.inputs.len()).map(|k| get(&in_loc(k))).collect::<Result<_, _>>()?;
    let outputs = (0..problem.components.len()).map(|j| get(&out_loc(j))).collect::<Result<_, _>>()?;
    let args = problem
        .components
        .iter()
        .enumerate()
        .map(|(j, c)| (0..c.inputs.len()).map(|a| get(&arg_loc(j, a))).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    Ok(SolveOutcome::Sat(Model { inputs, result: get("l_r")?, outputs, args }))
}

/// Runs `command` with the script on standard input. The process is killed
/// when `timeout` elapses.
pub fn solve_external(problem: &SynthesisProblem, command: &[String], timeout: Duration) -> Result<SolveOutcome, SynthError> {
    let (program, rest) = command.split_first().ok_or_else(|| SynthError::Backend("empty solver command".into()))?;
    let script = emit_smtlib(problem);
    let mut child = Command::new(program)
        .args(rest)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SynthError::Backend(format!("cannot start `{program}`: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped");
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(script.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped");
    let reader = std::thread::spawn(move || {
        let mut out = String::new();
        let _ = stdout.read_to_string(&mut out);
        out
    });
    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                let _ = writer.join();
                let _ = reader.join();
                return Ok(SolveOutcome::Timeout);
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(SynthError::Backend(e.to_string())),
        }
    }
    let _ = writer.join();
    let out = reader.join().map_err(|_| SynthError::Backend("reader thread panicked".into()))?;
    parse_model_response(problem, &out)
}

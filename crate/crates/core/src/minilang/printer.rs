//! Pretty printer. Parentheses are emitted only where precedence requires them,
//! so printing then re-parsing yields the same tree.

use std::fmt::Write;

use super::ast::*;

fn escape(s: &str, quote: char) -> String {
    let mut out = String::new();
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || (c as u32) > 0x7e => {
                let code = c as u32;
                if code <= 0xffff {
                    let _ = write!(out, "\\u{code:04x}");
                } else {
                    out.push(c);
                }
            }
            c => out.push(c),
        }
    }
    out
}

pub fn literal_to_string(lit: &Literal) -> String {
    match lit {
        Literal::Bool(b) => b.to_string(),
        Literal::Int(v) => v.to_string(),
        Literal::Real(v) => format!("{v:?}"),
        Literal::Char(c) => format!("'{}'", escape(&c.to_string(), '\'')),
        Literal::Str(s) => format!("\"{}\"", escape(s, '"')),
        Literal::Null => "null".into(),
    }
}

fn is_negative_literal(e: &Expr) -> bool {
    matches!(e, Expr::Lit(Literal::Int(v)) if *v < 0)
        || matches!(e, Expr::Lit(Literal::Real(v)) if v.is_sign_negative())
}

/// Precedence of the expression's top operator; atoms bind tightest.
fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) => 7,
        _ if is_negative_literal(e) => 7,
        _ => 8,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_wrapped(out: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, a) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Lit(lit) => out.push_str(&literal_to_string(lit)),
        Expr::Var(name) => out.push_str(name),
        Expr::Unary(op, inner) => {
            match op {
                UnaryOp::Not => out.push('!'),
                UnaryOp::Neg => {
                    out.push('-');
                    if is_negative_literal(inner) || matches!(**inner, Expr::Unary(UnaryOp::Neg, _)) {
                        out.push(' ');
                    }
                }
            }
            write_wrapped(out, inner, expr_prec(inner) < 7);
        }
        Expr::Binary(op, lhs, rhs) => {
            let prec = op.precedence();
            write_wrapped(out, lhs, expr_prec(lhs) < prec);
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(out, rhs, expr_prec(rhs) <= prec);
        }
        Expr::Index(base, idx) => {
            write_wrapped(out, base, expr_prec(base) < 8);
            out.push('[');
            write_expr(out, idx);
            out.push(']');
        }
        Expr::Method { receiver, method, args } => {
            write_wrapped(out, receiver, expr_prec(receiver) < 8);
            let _ = write!(out, ".{method}(");
            write_list(out, args);
            out.push(')');
        }
        Expr::Call { function, args } => {
            let _ = write!(out, "{function}(");
            write_list(out, args);
            out.push(')');
        }
        Expr::Array(items) => {
            out.push('[');
            write_list(out, items);
            out.push(']');
        }
        Expr::New(class, args) => {
            let _ = write!(out, "new {}(", class.name());
            write_list(out, args);
            out.push(')');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in stmts {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn write_if_tail(out: &mut String, cond: &Expr, then_block: &[Stmt], else_block: &[Stmt], depth: usize) {
    let _ = write!(out, "if ({}) ", expr_to_string(cond));
    write_block(out, then_block, depth);
    match else_block {
        [] => {}
        [Stmt { kind: StmtKind::If { cond, then_block, else_block }, .. }] => {
            out.push_str(" else ");
            write_if_tail(out, cond, then_block, else_block, depth);
        }
        _ => {
            out.push_str(" else ");
            write_block(out, else_block, depth);
        }
    }
}

pub fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Let { name, ty, init } => {
            let _ = write!(out, "let {name}: {ty} = {};", expr_to_string(init));
        }
        StmtKind::Assign { target, value } => {
            let _ = write!(out, "{target} = {};", expr_to_string(value));
        }
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", expr_to_string(e));
        }
        StmtKind::Return(e) => {
            let _ = write!(out, "return {};", expr_to_string(e));
        }
        StmtKind::Throw(e) => {
            let _ = write!(out, "throw {};", expr_to_string(e));
        }
        StmtKind::If { cond, then_block, else_block } => {
            write_if_tail(out, cond, then_block, else_block, depth);
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({}) ", expr_to_string(cond));
            write_block(out, body, depth);
        }
    }
    out.push('\n');
}

pub fn function_to_string(f: &FunctionDef) -> String {
    let mut out = String::new();
    let params: Vec<String> = f.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    let _ = write!(out, "fn {}({}) -> {} ", f.name, params.join(", "), f.ret);
    write_block(&mut out, &f.body, 0);
    out.push('\n');
    out
}

pub fn global_to_string(g: &GlobalDef) -> String {
    format!("const {}: {} = {};\n", g.name, g.ty, literal_to_string(&g.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse_expr;
    use proptest::prelude::*;

    const OPS: [BinaryOp; 13] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Rem,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::And,
        BinaryOp::Or,
    ];

    fn leaf() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (-1000i64..1000).prop_map(Expr::int),
            (-40i32..40).prop_map(|q| Expr::Lit(Literal::Real(q as f64 / 4.0))),
            any::<bool>().prop_map(|b| Expr::Lit(Literal::Bool(b))),
            Just(Expr::Lit(Literal::Null)),
            "[a-z]{1,3}".prop_filter("keyword", |s| !matches!(s.as_str(), "fn" | "if" | "let" | "new")).prop_map(Expr::var),
            "[ -~]{0,4}".prop_map(|s| Expr::Lit(Literal::Str(s))),
        ]
    }

    fn expr() -> impl Strategy<Value = Expr> {
        leaf().prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (0..OPS.len(), inner.clone(), inner.clone()).prop_map(|(i, a, b)| Expr::binary(OPS[i], a, b)),
                inner.clone().prop_map(Expr::not),
                inner
                    .clone()
                    .prop_filter("negated literals fold", |e| !matches!(e, Expr::Lit(_)))
                    .prop_map(|e| Expr::Unary(UnaryOp::Neg, Box::new(e))),
                (inner.clone(), "[a-z]{1,4}").prop_map(|(r, m)| Expr::Method { receiver: Box::new(r), method: m, args: vec![] }),
                (inner.clone(), inner).prop_map(|(a, i)| Expr::Index(Box::new(a), Box::new(i))),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_expressions_reparse_to_the_same_tree(e in expr()) {
            let text = expr_to_string(&e);
            let back = parse_expr(&text).map_err(|err| TestCaseError::fail(format!("`{text}`: {err}")))?;
            prop_assert_eq!(back, e, "printed as `{}`", text);
        }
    }

    #[test]
    fn parentheses_only_where_needed() {
        let cases = [
            "a - (b - c)",
            "a - b - c",
            "(a || b) && c",
            "a || b && c",
            "!(a < b)",
            "-(a + b) * c",
            "a < -1",
            "x.length() + 1",
        ];
        for src in cases {
            assert_eq!(expr_to_string(&parse_expr(src).unwrap()), src);
        }
    }

    #[test]
    fn string_literals_are_escaped() {
        let e = Expr::Lit(Literal::Str("a\"b\\c\n".into()));
        assert_eq!(expr_to_string(&e), r#""a\"b\\c\n""#);
        assert_eq!(parse_expr(&expr_to_string(&e)).unwrap(), e);
    }
}

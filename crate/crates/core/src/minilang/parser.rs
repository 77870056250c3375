use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ProgramError;

const KEYWORDS: [&str; 12] =
    ["fn", "let", "const", "if", "else", "while", "return", "throw", "true", "false", "null", "new"];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_loc: u32,
}

#[derive(Debug)]
pub(crate) struct ParsedItems {
    pub globals: Vec<GlobalDef>,
    pub functions: Vec<FunctionDef>,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, ProgramError> {
        Ok(Self { toks: tokenize(src)?, pos: 0, next_loc: 1 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ProgramError> {
        let t = &self.toks[self.pos];
        Err(ProgramError::Syntax { line: t.line, col: t.col, message: message.into() })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Real(v) => format!("`{v:?}`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Char(c) => format!("{c:?}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ProgramError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", Self::describe(self.peek())))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ProgramError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", Self::describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ProgramError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", Self::describe(&other))),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn parse_items(&mut self) -> Result<ParsedItems, ProgramError> {
        let mut globals = Vec::new();
        let mut functions = Vec::new();
        while !self.at_eof() {
            if self.is_keyword("const") {
                globals.push(self.const_decl()?);
            } else if self.is_keyword("fn") {
                functions.push(self.function()?);
            } else {
                return self.error(format!("expected `fn` or `const`, found {}", Self::describe(self.peek())));
            }
        }
        Ok(ParsedItems { globals, functions })
    }

    fn ty(&mut self) -> Result<Type, ProgramError> {
        let name = match self.peek().clone() {
            Tok::Ident(s) => s,
            other => return self.error(format!("expected type, found {}", Self::describe(&other))),
        };
        let ty = match name.as_str() {
            "bool" => Type::Bool,
            "int" => Type::Int,
            "real" => Type::Real,
            other => match ClassTag::from_name(other) {
                Some(c) => Type::Class(c),
                None => return self.error(format!("unknown type `{other}`")),
            },
        };
        self.bump();
        Ok(ty)
    }

    fn const_decl(&mut self) -> Result<GlobalDef, ProgramError> {
        self.expect_keyword("const")?;
        let name = self.ident()?;
        self.expect_punct(":")?;
        let ty = self.ty()?;
        self.expect_punct("=")?;
        let value = match self.expr()? {
            Expr::Lit(lit) => lit,
            _ => return self.error("global constants must be literals"),
        };
        self.expect_punct(";")?;
        Ok(GlobalDef { name, ty, value })
    }

    fn function(&mut self) -> Result<FunctionDef, ProgramError> {
        self.expect_keyword("fn")?;
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let pname = self.ident()?;
                self.expect_punct(":")?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("->")?;
        let ret = self.ty()?;
        let body = self.block()?;
        Ok(FunctionDef { name, params, ret, body })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ProgramError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.at_eof() {
                return self.error("unterminated block");
            }
            stmts.push(self.stmt()?);
        }
        self.expect_punct("}")?;
        Ok(stmts)
    }

    fn fresh_loc(&mut self) -> Location {
        let loc = Location(self.next_loc);
        self.next_loc += 1;
        loc
    }

    fn stmt(&mut self) -> Result<Stmt, ProgramError> {
        let loc = self.fresh_loc();
        let kind = if self.is_keyword("let") {
            self.bump();
            let name = self.ident()?;
            self.expect_punct(":")?;
            let ty = self.ty()?;
            self.expect_punct("=")?;
            let init = self.expr()?;
            self.expect_punct(";")?;
            StmtKind::Let { name, ty, init }
        } else if self.is_keyword("if") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_block = self.block()?;
            let else_block = if self.is_keyword("else") {
                self.bump();
                if self.is_keyword("if") {
                    vec![self.stmt()?]
                } else {
                    self.block()?
                }
            } else {
                Vec::new()
            };
            StmtKind::If { cond, then_block, else_block }
        } else if self.is_keyword("while") {
            self.bump();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            StmtKind::While { cond, body }
        } else if self.is_keyword("return") {
            self.bump();
            let e = self.expr()?;
            self.expect_punct(";")?;
            StmtKind::Return(e)
        } else if self.is_keyword("throw") {
            self.bump();
            let e = self.expr()?;
            self.expect_punct(";")?;
            StmtKind::Throw(e)
        } else if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Punct("=")) {
            let target = self.ident()?;
            self.expect_punct("=")?;
            let value = self.expr()?;
            self.expect_punct(";")?;
            StmtKind::Assign { target, value }
        } else {
            let e = self.expr()?;
            if !matches!(e, Expr::Call { .. } | Expr::Method { .. }) {
                return self.error("only calls may be used as statements");
            }
            self.expect_punct(";")?;
            StmtKind::Expr(e)
        };
        Ok(Stmt { loc, kind })
    }

    pub fn expr(&mut self) -> Result<Expr, ProgramError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "||" => BinaryOp::Or,
            "&&" => BinaryOp::And,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "/" => BinaryOp::Div,
            "%" => BinaryOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ProgramError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ProgramError> {
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)));
        }
        if self.eat_punct("-") {
            return Ok(match self.unary()? {
                Expr::Lit(Literal::Int(v)) => Expr::Lit(Literal::Int(v.wrapping_neg())),
                Expr::Lit(Literal::Real(v)) => Expr::Lit(Literal::Real(-v)),
                e => Expr::Unary(UnaryOp::Neg, Box::new(e)),
            });
        }
        self.postfix()
    }

    fn args(&mut self, close: &str) -> Result<Vec<Expr>, ProgramError> {
        let mut args = Vec::new();
        if !self.is_punct(close) {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(close)?;
        Ok(args)
    }

    fn postfix(&mut self) -> Result<Expr, ProgramError> {
        let mut e = self.primary()?;
        loop {
            if self.eat_punct("[") {
                let idx = self.expr()?;
                self.expect_punct("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else if self.eat_punct(".") {
                let method = self.ident()?;
                self.expect_punct("(")?;
                let args = self.args(")")?;
                e = Expr::Method { receiver: Box::new(e), method, args };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ProgramError> {
        let tok = self.peek().clone();
        match tok {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Lit(Literal::Int(v)))
            }
            Tok::Real(v) => {
                self.bump();
                Ok(Expr::Lit(Literal::Real(v)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Lit(Literal::Str(s)))
            }
            Tok::Char(c) => {
                self.bump();
                Ok(Expr::Lit(Literal::Char(c)))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("[") => {
                self.bump();
                Ok(Expr::Array(self.args("]")?))
            }
            Tok::Ident(word) => match word.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::Lit(Literal::Bool(word == "true")))
                }
                "null" => {
                    self.bump();
                    Ok(Expr::Lit(Literal::Null))
                }
                "new" => {
                    self.bump();
                    let class = match self.ty()? {
                        Type::Class(c) => c,
                        other => return self.error(format!("cannot instantiate `{other}`")),
                    };
                    self.expect_punct("(")?;
                    Ok(Expr::New(class, self.args(")")?))
                }
                _ => {
                    let name = self.ident()?;
                    if self.eat_punct("(") {
                        Ok(Expr::Call { function: name, args: self.args(")")? })
                    } else {
                        Ok(Expr::Var(name))
                    }
                }
            },
            other => self.error(format!("expected expression, found {}", Self::describe(&other))),
        }
    }
}

/// Parses a standalone expression, e.g. a patch condition.
pub fn parse_expr(src: &str) -> Result<Expr, ProgramError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if !p.at_eof() {
        return p.error(format!("unexpected trailing {}", Parser::describe(p.peek())));
    }
    Ok(e)
}

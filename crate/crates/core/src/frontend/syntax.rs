//! Lexer, AST and recursive-descent parser for the class-based source language.
//!
//! ```text
//! file    := class*
//! class   := mods 'class' Ident ('extends' QName)? '{' member* '}'
//! member  := class | mods Type Ident ('=' literal)? ';'
//!          | mods (Type | 'void') Ident '(' params ')' body
//!          | mods Ident '(' params ')' body            // constructor
//! stmt    := 'if' '(' expr ')' body ('else' (body | if))?
//!          | 'return' expr? ';' | Type Ident '=' expr ';'
//!          | lvalue '=' expr ';' | call ';'
//! ```
//!
//! Logging calls are ordinary calls on the reserved receiver `LOG`.

use std::fmt;

use super::ir::{AssignOp, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
    pub offset: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl SyntaxError {
    pub fn at(pos: Pos, message: impl Into<String>) -> Self {
        SyntaxError {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Int(i) => write!(f, "{i}"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of file"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
    end: usize,
}

const PUNCTS: [&str; 24] = [
    "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", ";", ",", ".", "=", "<", ">", "+",
    "-", "*", "/", "%", "!", "[", "]",
];

fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut line_start = 0usize;
    let pos_of = |i: usize, line: u32, line_start: usize| Pos {
        line,
        col: (src[line_start..i].chars().count() + 1) as u32,
        offset: i,
    };

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let start = pos_of(i, line, line_start);
            let Some(close) = src[i + 2..].find("*/") else {
                return Err(SyntaxError::at(start, "unterminated block comment"));
            };
            let end = i + 2 + close + 2;
            for (j, b) in bytes[i..end].iter().enumerate() {
                if *b == b'\n' {
                    line += 1;
                    line_start = i + j + 1;
                }
            }
            i = end;
            continue;
        }
        let pos = pos_of(i, line, line_start);
        if c == b'"' {
            let mut value = String::new();
            let mut j = i + 1;
            loop {
                let Some(ch) = src[j..].chars().next() else {
                    return Err(SyntaxError::at(pos, "unterminated string literal"));
                };
                match ch {
                    '"' => {
                        j += 1;
                        break;
                    }
                    '\n' => return Err(SyntaxError::at(pos, "newline in string literal")),
                    '\\' => {
                        let esc = src[j + 1..].chars().next().ok_or_else(|| {
                            SyntaxError::at(pos, "unterminated string literal")
                        })?;
                        value.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            '"' => '"',
                            '\\' => '\\',
                            '\'' => '\'',
                            other => {
                                return Err(SyntaxError::at(
                                    pos,
                                    format!("unknown escape `\\{other}`"),
                                ))
                            }
                        });
                        j += 1 + esc.len_utf8();
                    }
                    other => {
                        value.push(other);
                        j += other.len_utf8();
                    }
                }
            }
            tokens.push(Token {
                tok: Tok::Str(value),
                pos,
                end: j,
            });
            i = j;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            // Java-style long suffix
            let digits = &src[i..j];
            if j < bytes.len() && (bytes[j] == b'L' || bytes[j] == b'l') {
                j += 1;
            }
            let value = digits
                .parse()
                .map_err(|_| SyntaxError::at(pos, "integer literal out of range"))?;
            tokens.push(Token {
                tok: Tok::Int(value),
                pos,
                end: j,
            });
            i = j;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let mut j = i;
            while j < bytes.len()
                && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'$')
            {
                j += 1;
            }
            tokens.push(Token {
                tok: Tok::Ident(src[i..j].to_string()),
                pos,
                end: j,
            });
            i = j;
            continue;
        }
        if let Some(p) = PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            tokens.push(Token {
                tok: Tok::Punct(p),
                pos,
                end: i + p.len(),
            });
            i += p.len();
            continue;
        }
        let ch = src[i..].chars().next().unwrap_or('?');
        return Err(SyntaxError::at(pos, format!("unexpected character `{ch}`")));
    }
    let pos = pos_of(bytes.len(), line, line_start);
    tokens.push(Token {
        tok: Tok::Eof,
        pos,
        end: bytes.len(),
    });
    Ok(tokens)
}

const KEYWORDS: [&str; 16] = [
    "class", "extends", "static", "public", "private", "protected", "final", "if", "else",
    "return", "new", "true", "false", "null", "this", "void",
];

#[derive(Debug, Clone)]
pub struct FileAst {
    pub classes: Vec<ClassAst>,
}

#[derive(Debug, Clone)]
pub struct ClassAst {
    pub name: String,
    pub extends: Option<String>,
    pub fields: Vec<FieldAst>,
    pub methods: Vec<MethodAst>,
    pub inner: Vec<ClassAst>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct FieldAst {
    pub name: String,
    pub ty: String,
    pub init: Option<Literal>,
    pub is_static: bool,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct MethodAst {
    pub name: String,
    /// `None` for constructors.
    pub ret: Option<String>,
    pub params: Vec<(String, String)>,
    pub body: Vec<Stmt>,
    pub is_public: bool,
    pub is_static: bool,
    pub pos: Pos,
    pub end: Pos,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtAst,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub enum StmtAst {
    Local {
        ty: String,
        name: String,
        init: Expr,
    },
    Assign {
        target: Expr,
        value: Expr,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then: Vec<Stmt>,
        els: Option<Vec<Stmt>>,
    },
    Return(Option<Expr>),
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Lit(Literal),
    Name(String),
    This,
    Field(Box<Expr>, String),
    Call {
        recv: Option<Box<Expr>>,
        name: String,
        args: Vec<Expr>,
    },
    New {
        class: String,
        args: Vec<Expr>,
    },
    Unary(AssignOp, Box<Expr>),
    Binary(AssignOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.pos.offset..self.end]
    }

    /// The dotted name `a.b.c` when this expression is a plain name chain.
    pub fn dotted_name(&self) -> Option<String> {
        match &self.kind {
            ExprKind::Name(n) => Some(n.clone()),
            ExprKind::Field(base, f) => Some(format!("{}.{}", base.dotted_name()?, f)),
            _ => None,
        }
    }
}

struct Parser<'a> {
    tokens: Vec<Token>,
    i: usize,
    _src: &'a str,
}

pub fn parse_file(src: &str) -> Result<FileAst, SyntaxError> {
    let mut p = Parser {
        tokens: lex(src)?,
        i: 0,
        _src: src,
    };
    let mut classes = Vec::new();
    while !p.at_eof() {
        classes.push(p.class()?);
    }
    Ok(FileAst { classes })
}

/// Parses a single statement (used to vet externally generated code).
pub fn parse_statement(src: &str) -> Result<Stmt, SyntaxError> {
    let mut p = Parser {
        tokens: lex(src)?,
        i: 0,
        _src: src,
    };
    let stmt = p.stmt()?;
    if !p.at_eof() {
        return Err(p.error("expected a single statement"));
    }
    Ok(stmt)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.i].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let idx = (self.i + n).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.i].pos
    }

    fn prev_end(&self) -> usize {
        self.tokens[self.i.saturating_sub(1)].end
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.i].tok.clone();
        if self.i < self.tokens.len() - 1 {
            self.i += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::at(self.pos(), message)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
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

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), SyntaxError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    fn qname(&mut self) -> Result<String, SyntaxError> {
        let mut name = self.ident()?;
        while self.is_punct(".") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            name.push('.');
            name.push_str(&self.ident()?);
        }
        Ok(name)
    }

    fn type_name(&mut self) -> Result<String, SyntaxError> {
        let mut name = self.qname()?;
        while self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.bump();
            self.bump();
            name.push_str("[]");
        }
        Ok(name)
    }

    fn modifiers(&mut self) -> (bool, bool) {
        let (mut public, mut is_static) = (false, false);
        loop {
            if self.eat_kw("public") {
                public = true;
            } else if self.eat_kw("static") {
                is_static = true;
            } else if self.eat_kw("private") || self.eat_kw("protected") || self.eat_kw("final") {
            } else {
                return (public, is_static);
            }
        }
    }

    fn class(&mut self) -> Result<ClassAst, SyntaxError> {
        self.modifiers();
        let pos = self.pos();
        if !self.eat_kw("class") {
            return Err(self.error(format!("expected `class`, found {}", self.peek())));
        }
        let name = self.ident()?;
        let extends = if self.eat_kw("extends") {
            Some(self.qname()?)
        } else {
            None
        };
        self.expect_punct("{")?;
        let mut class = ClassAst {
            name,
            extends,
            fields: Vec::new(),
            methods: Vec::new(),
            inner: Vec::new(),
            pos,
        };
        while !self.eat_punct("}") {
            if self.at_eof() {
                return Err(self.error("unclosed class body"));
            }
            self.member(&mut class)?;
        }
        Ok(class)
    }

    fn member(&mut self, class: &mut ClassAst) -> Result<(), SyntaxError> {
        let start = self.i;
        let pos = self.pos();
        let (is_public, is_static) = self.modifiers();
        if self.is_kw("class") {
            self.i = start;
            class.inner.push(self.class()?);
            return Ok(());
        }
        // constructor: Name '('
        if matches!(self.peek(), Tok::Ident(n) if *n == class.name)
            && matches!(self.peek_at(1), Tok::Punct("("))
        {
            self.bump();
            let params = self.params()?;
            let (body, end) = self.body()?;
            class.methods.push(MethodAst {
                name: "<init>".into(),
                ret: None,
                params,
                body,
                is_public,
                is_static: false,
                pos,
                end,
            });
            return Ok(());
        }
        let ty = if self.eat_kw("void") {
            "void".to_string()
        } else {
            self.type_name()?
        };
        let name = self.ident()?;
        if self.is_punct("(") {
            let params = self.params()?;
            let (body, end) = self.body()?;
            class.methods.push(MethodAst {
                name,
                ret: Some(ty),
                params,
                body,
                is_public,
                is_static,
                pos,
                end,
            });
            return Ok(());
        }
        if ty == "void" {
            return Err(SyntaxError::at(pos, "field cannot have type void"));
        }
        let init = if self.eat_punct("=") {
            Some(self.field_literal()?)
        } else {
            None
        };
        self.expect_punct(";")?;
        class.fields.push(FieldAst {
            name,
            ty,
            init,
            is_static,
            pos,
        });
        Ok(())
    }

    fn field_literal(&mut self) -> Result<Literal, SyntaxError> {
        let negative = self.eat_punct("-");
        match self.bump() {
            Tok::Int(i) => Ok(Literal::Int(if negative { -i } else { i })),
            Tok::Str(s) if !negative => Ok(Literal::Str(s)),
            Tok::Ident(k) if !negative && k == "true" => Ok(Literal::Bool(true)),
            Tok::Ident(k) if !negative && k == "false" => Ok(Literal::Bool(false)),
            Tok::Ident(k) if !negative && k == "null" => Ok(Literal::Null),
            _ => {
                self.i -= 1;
                Err(self.error("field initializer must be a literal"))
            }
        }
    }

    fn params(&mut self) -> Result<Vec<(String, String)>, SyntaxError> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.eat_punct(")") {
            return Ok(params);
        }
        loop {
            self.eat_kw("final");
            let ty = self.type_name()?;
            let name = self.ident()?;
            params.push((ty, name));
            if self.eat_punct(")") {
                return Ok(params);
            }
            self.expect_punct(",")?;
        }
    }

    fn body(&mut self) -> Result<(Vec<Stmt>, Pos), SyntaxError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        loop {
            if self.is_punct("}") {
                let end = self.pos();
                self.bump();
                return Ok((stmts, end));
            }
            if self.at_eof() {
                return Err(self.error("unclosed block"));
            }
            stmts.push(self.stmt()?);
        }
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let pos = self.pos();
        if self.eat_kw("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let (then, _) = self.body()?;
            let els = if self.eat_kw("else") {
                if self.is_kw("if") {
                    Some(vec![self.stmt()?])
                } else {
                    Some(self.body()?.0)
                }
            } else {
                None
            };
            return Ok(Stmt {
                kind: StmtAst::If { cond, then, els },
                pos,
            });
        }
        if self.eat_kw("return") {
            let value = if self.is_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect_punct(";")?;
            return Ok(Stmt {
                kind: StmtAst::Return(value),
                pos,
            });
        }
        if self.is_kw("final") {
            self.bump();
        }
        if self.looks_like_local_decl() {
            let ty = self.type_name()?;
            let name = self.ident()?;
            if !self.eat_punct("=") {
                return Err(self.error("local variables must be initialized"));
            }
            let init = self.expr()?;
            self.expect_punct(";")?;
            return Ok(Stmt {
                kind: StmtAst::Local { ty, name, init },
                pos,
            });
        }
        let expr = self.expr()?;
        if self.eat_punct("=") {
            if !matches!(expr.kind, ExprKind::Name(_) | ExprKind::Field(..)) {
                return Err(SyntaxError::at(pos, "left side of `=` is not assignable"));
            }
            let value = self.expr()?;
            self.expect_punct(";")?;
            return Ok(Stmt {
                kind: StmtAst::Assign {
                    target: expr,
                    value,
                },
                pos,
            });
        }
        if !matches!(expr.kind, ExprKind::Call { .. } | ExprKind::New { .. }) {
            return Err(SyntaxError::at(pos, "expression statement must be a call"));
        }
        self.expect_punct(";")?;
        Ok(Stmt {
            kind: StmtAst::Expr(expr),
            pos,
        })
    }

    /// `Type name =` or `Type[] name` or `a.b.Type name`.
    fn looks_like_local_decl(&self) -> bool {
        let mut j = 0;
        let ident = |t: &Tok| matches!(t, Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()));
        if !ident(self.peek_at(j)) {
            return false;
        }
        j += 1;
        loop {
            match self.peek_at(j) {
                Tok::Punct(".") if ident(self.peek_at(j + 1)) => j += 2,
                Tok::Punct("[") if matches!(self.peek_at(j + 1), Tok::Punct("]")) => j += 2,
                _ => break,
            }
        }
        ident(self.peek_at(j))
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, SyntaxError> {
        const LEVELS: [&[(&str, AssignOp)]; 6] = [
            &[("||", AssignOp::Or)],
            &[("&&", AssignOp::And)],
            &[("==", AssignOp::Eq), ("!=", AssignOp::Ne)],
            &[
                ("<=", AssignOp::Le),
                (">=", AssignOp::Ge),
                ("<", AssignOp::Lt),
                (">", AssignOp::Gt),
            ],
            &[("+", AssignOp::Add), ("-", AssignOp::Sub)],
            &[("*", AssignOp::Mul), ("/", AssignOp::Div), ("%", AssignOp::Rem)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        'outer: loop {
            for (p, op) in LEVELS[level] {
                if self.eat_punct(p) {
                    let rhs = self.binary(level + 1)?;
                    let pos = lhs.pos;
                    let end = rhs.end;
                    lhs = Expr {
                        kind: ExprKind::Binary(*op, Box::new(lhs), Box::new(rhs)),
                        pos,
                        end,
                    };
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        for (p, op) in [("!", AssignOp::Not), ("-", AssignOp::Neg)] {
            if self.eat_punct(p) {
                let inner = self.unary()?;
                // fold negative integer literals
                if op == AssignOp::Neg {
                    if let ExprKind::Lit(Literal::Int(i)) = inner.kind {
                        return Ok(Expr {
                            kind: ExprKind::Lit(Literal::Int(-i)),
                            pos,
                            end: inner.end,
                        });
                    }
                }
                let end = inner.end;
                return Ok(Expr {
                    kind: ExprKind::Unary(op, Box::new(inner)),
                    pos,
                    end,
                });
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut expr = self.primary()?;
        while self.eat_punct(".") {
            let name = self.ident()?;
            if self.is_punct("(") {
                let args = self.args()?;
                let pos = expr.pos;
                expr = Expr {
                    kind: ExprKind::Call {
                        recv: Some(Box::new(expr)),
                        name,
                        args,
                    },
                    pos,
                    end: self.prev_end(),
                };
            } else {
                let pos = expr.pos;
                expr = Expr {
                    kind: ExprKind::Field(Box::new(expr), name),
                    pos,
                    end: self.prev_end(),
                };
            }
        }
        Ok(expr)
    }

    fn args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if self.eat_punct(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_punct(")") {
                return Ok(args);
            }
            self.expect_punct(",")?;
        }
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                ExprKind::Lit(Literal::Int(i))
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Lit(Literal::Str(s))
            }
            Tok::Punct("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect_punct(")")?;
                // keep the parenthesized span so rendered text stays faithful
                return Ok(Expr {
                    kind: inner.kind,
                    pos,
                    end: self.prev_end(),
                });
            }
            Tok::Ident(k) if k == "true" || k == "false" => {
                self.bump();
                ExprKind::Lit(Literal::Bool(k == "true"))
            }
            Tok::Ident(k) if k == "null" => {
                self.bump();
                ExprKind::Lit(Literal::Null)
            }
            Tok::Ident(k) if k == "this" => {
                self.bump();
                ExprKind::This
            }
            Tok::Ident(k) if k == "new" => {
                self.bump();
                let class = self.qname()?;
                let args = self.args()?;
                ExprKind::New { class, args }
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct("(") {
                    let args = self.args()?;
                    ExprKind::Call {
                        recv: None,
                        name,
                        args,
                    }
                } else {
                    ExprKind::Name(name)
                }
            }
            other => return Err(self.error(format!("expected expression, found {other}"))),
        };
        Ok(Expr {
            kind,
            pos,
            end: self.prev_end(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_class_with_constant_and_method() {
        let ast = parse_file(
            r#"
            public class DFSConfigKeys extends CommonConfigurationKeys {
                public static final String AVOID_KEY = "dfs.namenode.avoid.write.stale.datanode";
                static int RETRIES = -3;
                public int twice(int x) { return x * 2; }
                class Inner { }
            }
            "#,
        )
        .unwrap();
        let class = &ast.classes[0];
        assert_eq!(class.name, "DFSConfigKeys");
        assert_eq!(class.extends.as_deref(), Some("CommonConfigurationKeys"));
        assert_eq!(
            class.fields[0].init,
            Some(Literal::Str("dfs.namenode.avoid.write.stale.datanode".into()))
        );
        assert_eq!(class.fields[1].init, Some(Literal::Int(-3)));
        assert_eq!(class.methods[0].name, "twice");
        assert_eq!(class.inner[0].name, "Inner");
    }

    #[test]
    fn expression_precedence_and_text() {
        let src = "class A { void f() { x = a + b * c < d && !e.equals(\"y\"); } }";
        let ast = parse_file(src).unwrap();
        let StmtAst::Assign { value, .. } = &ast.classes[0].methods[0].body[0].kind else {
            panic!()
        };
        let ExprKind::Binary(AssignOp::And, lhs, rhs) = &value.kind else {
            panic!("{value:?}")
        };
        assert!(matches!(lhs.kind, ExprKind::Binary(AssignOp::Lt, ..)));
        assert!(matches!(rhs.kind, ExprKind::Unary(AssignOp::Not, _)));
        assert_eq!(rhs.text(src), "!e.equals(\"y\")");
        assert_eq!(value.text(src), "a + b * c < d && !e.equals(\"y\")");
    }

    #[test]
    fn reports_positions() {
        let err = parse_file("class A {\n  void f() {\n    x = ;\n  }\n}").unwrap_err();
        assert_eq!((err.line, err.col), (3, 9));
        let err = parse_file("class A { int f() { 3; } }").unwrap_err();
        assert!(err.message.contains("must be a call"));
        assert!(parse_file("class A { String s = \"open").is_err());
    }

    #[test]
    fn single_statement() {
        let stmt = parse_statement("LOG.warn(\"x {}\", a.b());").unwrap();
        assert!(matches!(stmt.kind, StmtAst::Expr(_)));
        assert!(parse_statement("LOG.warn(\"x\"); LOG.info(\"y\");").is_err());
    }
}

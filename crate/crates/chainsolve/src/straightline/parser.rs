//! Recursive-descent parser and canonical renderer for the straight-line
//! statement grammar: assignments over arithmetic, comparisons, boolean
//! connectives, calls with keyword arguments, method calls, subscripts, and
//! list literals. Comparisons do not chain.

use super::lexer::{lex, LexError, Tok};
use crate::model::parse_exact_number;
use num_rational::BigRational;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct SlStmt {
    pub target: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(BigRational),
    Str(String),
    Bool(bool),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    Logic(LogicOp, Box<Expr>, Box<Expr>),
    Call { func: String, args: Vec<Expr>, kwargs: Vec<(String, Expr)> },
    Method { recv: Box<Expr>, name: String, args: Vec<Expr> },
    Subscript { base: Box<Expr>, index: Box<Expr> },
    List(Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicOp {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SlParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{0}")]
    Syntax(String),
}

fn syntax(msg: impl Into<String>) -> SlParseError {
    SlParseError::Syntax(msg.into())
}

const MAX_DEPTH: usize = 200;

pub fn parse_stmt(src: &str) -> Result<SlStmt, SlParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let target = match p.next() {
        Some(Tok::Ident(name)) => name,
        other => return Err(syntax(format!("expected assignment target, got {other:?}"))),
    };
    match p.next() {
        Some(Tok::Assign) => {}
        other => return Err(syntax(format!("expected '=' after target, got {other:?}"))),
    }
    let expr = p.expr()?;
    p.finish()?;
    Ok(SlStmt { target, expr })
}

pub fn parse_expr(src: &str) -> Result<Expr, SlParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let expr = p.expr()?;
    p.finish()?;
    Ok(expr)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), SlParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(syntax(format!("expected {t:?}, got {:?}", self.peek())))
        }
    }

    fn finish(&self) -> Result<(), SlParseError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(syntax(format!("trailing tokens after expression: {:?}", self.peek())))
        }
    }

    fn enter(&mut self) -> Result<(), SlParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(syntax("expression nests too deeply"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn expr(&mut self) -> Result<Expr, SlParseError> {
        self.enter()?;
        let r = self.or_expr();
        self.leave();
        r
    }

    fn or_expr(&mut self) -> Result<Expr, SlParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and_expr()?;
            lhs = Expr::Logic(LogicOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, SlParseError> {
        let mut lhs = self.not_expr()?;
        while self.eat(&Tok::And) {
            let rhs = self.not_expr()?;
            lhs = Expr::Logic(LogicOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, SlParseError> {
        if self.eat(&Tok::Not) {
            self.enter()?;
            let operand = self.not_expr()?;
            self.leave();
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(operand)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SlParseError> {
        let lhs = self.arith()?;
        let op = match self.peek() {
            Some(Tok::EqEq) => CmpOp::Eq,
            Some(Tok::Ne) => CmpOp::Ne,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Ge) => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.arith()?;
        if matches!(
            self.peek(),
            Some(Tok::EqEq | Tok::Ne | Tok::Lt | Tok::Gt | Tok::Le | Tok::Ge)
        ) {
            return Err(syntax("chained comparisons are not supported"));
        }
        Ok(Expr::Compare(op, Box::new(lhs), Box::new(rhs)))
    }

    fn arith(&mut self) -> Result<Expr, SlParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, SlParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                Some(Tok::DoubleSlash) => BinOp::FloorDiv,
                Some(Tok::Percent) => BinOp::Mod,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, SlParseError> {
        if self.eat(&Tok::Minus) {
            self.enter()?;
            let operand = self.factor()?;
            self.leave();
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(operand)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SlParseError> {
        let base = self.postfix()?;
        if self.eat(&Tok::DoubleStar) {
            self.enter()?;
            let exp = self.factor()?;
            self.leave();
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, SlParseError> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Some(Tok::LParen) => {
                    let func = match e {
                        Expr::Ident(name) => name,
                        other => {
                            return Err(syntax(format!("cannot call non-identifier {other:?}")))
                        }
                    };
                    self.pos += 1;
                    let (args, kwargs) = self.call_args()?;
                    e = Expr::Call { func, args, kwargs };
                }
                Some(Tok::LBracket) => {
                    self.pos += 1;
                    self.enter()?;
                    let index = self.expr()?;
                    self.leave();
                    self.expect(&Tok::RBracket)?;
                    e = Expr::Subscript { base: Box::new(e), index: Box::new(index) };
                }
                Some(Tok::Dot) => {
                    self.pos += 1;
                    let name = match self.next() {
                        Some(Tok::Ident(name)) => name,
                        other => {
                            return Err(syntax(format!("expected method name, got {other:?}")))
                        }
                    };
                    self.expect(&Tok::LParen)?;
                    let (args, kwargs) = self.call_args()?;
                    if !kwargs.is_empty() {
                        return Err(syntax("method calls take no keyword arguments"));
                    }
                    e = Expr::Method { recv: Box::new(e), name, args };
                }
                _ => break,
            }
        }
        Ok(e)
    }

    /// Parses the remainder of a call after '('. Keyword arguments must
    /// follow all positional arguments.
    fn call_args(&mut self) -> Result<(Vec<Expr>, Vec<(String, Expr)>), SlParseError> {
        let mut args = Vec::new();
        let mut kwargs: Vec<(String, Expr)> = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok((args, kwargs));
        }
        loop {
            let is_kwarg = matches!(
                (self.peek(), self.toks.get(self.pos + 1)),
                (Some(Tok::Ident(_)), Some(Tok::Assign))
            );
            if is_kwarg {
                let name = match self.next() {
                    Some(Tok::Ident(name)) => name,
                    _ => unreachable!("checked by lookahead"),
                };
                self.pos += 1;
                self.enter()?;
                let value = self.expr()?;
                self.leave();
                kwargs.push((name, value));
            } else {
                if !kwargs.is_empty() {
                    return Err(syntax("positional argument after keyword argument"));
                }
                self.enter()?;
                args.push(self.expr()?);
                self.leave();
            }
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(&Tok::RParen)?;
            return Ok((args, kwargs));
        }
    }

    fn primary(&mut self) -> Result<Expr, SlParseError> {
        match self.next() {
            Some(Tok::Number(text)) => parse_exact_number(&text)
                .map(Expr::Num)
                .ok_or_else(|| syntax(format!("bad number literal {text:?}"))),
            Some(Tok::Str(s)) => Ok(Expr::Str(s)),
            Some(Tok::True) => Ok(Expr::Bool(true)),
            Some(Tok::False) => Ok(Expr::Bool(false)),
            Some(Tok::Ident(name)) => Ok(Expr::Ident(name)),
            Some(Tok::LParen) => {
                self.enter()?;
                let inner = self.expr()?;
                self.leave();
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::LBracket) => {
                let mut items = Vec::new();
                if self.eat(&Tok::RBracket) {
                    return Ok(Expr::List(items));
                }
                loop {
                    self.enter()?;
                    items.push(self.expr()?);
                    self.leave();
                    if self.eat(&Tok::Comma) {
                        if self.eat(&Tok::RBracket) {
                            return Ok(Expr::List(items));
                        }
                        continue;
                    }
                    self.expect(&Tok::RBracket)?;
                    return Ok(Expr::List(items));
                }
            }
            other => Err(syntax(format!("unexpected token {other:?}"))),
        }
    }
}

// Rendering. Parenthesization is by precedence, so parse(render(e)) == e.

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Logic(LogicOp::Or, ..) => 1,
        Expr::Logic(LogicOp::And, ..) => 2,
        Expr::Unary(UnaryOp::Not, _) => 3,
        Expr::Compare(..) => 4,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 5,
        Expr::Binary(BinOp::Mul | BinOp::Div | BinOp::FloorDiv | BinOp::Mod, ..) => 6,
        Expr::Unary(UnaryOp::Neg, _) => 7,
        Expr::Binary(BinOp::Pow, ..) => 8,
        _ => 10,
    }
}

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

pub fn render_stmt(s: &SlStmt) -> String {
    format!("{} = {}", s.target, render_expr(&s.expr))
}

fn write_child(child: &Expr, min_prec: u8, out: &mut String) {
    if prec(child) < min_prec {
        out.push('(');
        write_expr(child, out);
        out.push(')');
    } else {
        write_expr(child, out);
    }
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Num(n) => out.push_str(&crate::model::rational_to_record(n)),
        Expr::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    _ => out.push(c),
                }
            }
            out.push('"');
        }
        Expr::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
        Expr::Ident(name) => out.push_str(name),
        Expr::Unary(UnaryOp::Neg, operand) => {
            out.push('-');
            write_child(operand, 7, out);
        }
        Expr::Unary(UnaryOp::Not, operand) => {
            out.push_str("not ");
            write_child(operand, 3, out);
        }
        Expr::Binary(op, lhs, rhs) => {
            let (sym, p) = match op {
                BinOp::Add => ("+", 5),
                BinOp::Sub => ("-", 5),
                BinOp::Mul => ("*", 6),
                BinOp::Div => ("/", 6),
                BinOp::FloorDiv => ("//", 6),
                BinOp::Mod => ("%", 6),
                BinOp::Pow => ("**", 8),
            };
            if *op == BinOp::Pow {
                // Right-associative, and the left side must bind tighter.
                write_child(lhs, p + 1, out);
                out.push_str(" ** ");
                write_child(rhs, 7, out);
            } else {
                write_child(lhs, p, out);
                out.push(' ');
                out.push_str(sym);
                out.push(' ');
                write_child(rhs, p + 1, out);
            }
        }
        Expr::Compare(op, lhs, rhs) => {
            let sym = match op {
                CmpOp::Eq => "==",
                CmpOp::Ne => "!=",
                CmpOp::Lt => "<",
                CmpOp::Gt => ">",
                CmpOp::Le => "<=",
                CmpOp::Ge => ">=",
            };
            write_child(lhs, 5, out);
            out.push(' ');
            out.push_str(sym);
            out.push(' ');
            write_child(rhs, 5, out);
        }
        Expr::Logic(op, lhs, rhs) => {
            let (sym, p) = match op {
                LogicOp::Or => ("or", 1),
                LogicOp::And => ("and", 2),
            };
            write_child(lhs, p, out);
            out.push(' ');
            out.push_str(sym);
            out.push(' ');
            write_child(rhs, p + 1, out);
        }
        Expr::Call { func, args, kwargs } => {
            out.push_str(func);
            out.push('(');
            let mut first = true;
            for a in args {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                write_expr(a, out);
            }
            for (name, value) in kwargs {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                out.push_str(name);
                out.push('=');
                write_expr(value, out);
            }
            out.push(')');
        }
        Expr::Method { recv, name, args } => {
            write_child(recv, 9, out);
            out.push('.');
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(a, out);
            }
            out.push(')');
        }
        Expr::Subscript { base, index } => {
            write_child(base, 9, out);
            out.push('[');
            write_expr(index, out);
            out.push(']');
        }
        Expr::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(item, out);
            }
            out.push(']');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rat;

    #[test]
    fn parses_exemplar_statements() {
        let s = parse_stmt("trees_begin = 15").unwrap();
        assert_eq!(s.target, "trees_begin");
        assert_eq!(s.expr, Expr::Num(rat(15)));

        let s = parse_stmt("trees_today = trees_end - trees_begin").unwrap();
        assert_eq!(render_stmt(&s), "trees_today = trees_end - trees_begin");

        let s = parse_stmt("delay = 30 / 60").unwrap();
        assert_eq!(render_stmt(&s), "delay = 30 / 60");

        let s = parse_stmt("duration = Symbol('duration', positive=True)").unwrap();
        assert_eq!(render_stmt(&s), "duration = Symbol(\"duration\", positive=True)");

        let s =
            parse_stmt("solution = solve_it(original_speed - reduced_speed - 200, duration)")
                .unwrap();
        assert_eq!(
            render_stmt(&s),
            "solution = solve_it(original_speed - reduced_speed - 200, duration)"
        );

        let s = parse_stmt("answer = solution[duration]").unwrap();
        assert_eq!(render_stmt(&s), "answer = solution[duration]");

        let s = parse_stmt("date_today = date_yesterday + relativedelta(days=1)").unwrap();
        assert_eq!(render_stmt(&s), "date_today = date_yesterday + relativedelta(days=1)");

        let s = parse_stmt("answer = date_tomorrow.strftime(\"%m/%d/%Y\")").unwrap();
        assert_eq!(render_stmt(&s), "answer = date_tomorrow.strftime(\"%m/%d/%Y\")");

        let s = parse_stmt("plausibility = (player_sport == playing_sport)").unwrap();
        assert_eq!(render_stmt(&s), "plausibility = player_sport == playing_sport");
    }

    #[test]
    fn precedence_round_trips() {
        for src in [
            "a + b * c",
            "(a + b) * c",
            "a - b - c",
            "a - (b - c)",
            "-a ** 2",
            "(-a) ** 2",
            "a ** b ** c",
            "(a ** b) ** c",
            "a / b / c",
            "not a and b or c",
            "a % b // c",
            "x == y and u != v",
        ] {
            let e = parse_expr(src).unwrap();
            let rendered = render_expr(&e);
            let reparsed = parse_expr(&rendered).unwrap();
            assert_eq!(e, reparsed, "round trip failed for {src:?} -> {rendered:?}");
        }
    }

    #[test]
    fn rejects_malformed_statements() {
        assert!(parse_stmt("= 5").is_err());
        assert!(parse_stmt("x 5").is_err());
        assert!(parse_stmt("x = ").is_err());
        assert!(parse_stmt("x = 1 +").is_err());
        assert!(parse_stmt("x = (1").is_err());
        assert!(parse_stmt("x = 1 2").is_err());
        assert!(parse_stmt("x = f(a=1, 2)").is_err());
        assert!(parse_stmt("x = a < b < c").is_err());
    }

    #[test]
    fn depth_limit_guards_recursion() {
        let mut src = String::from("x = ");
        for _ in 0..2000 {
            src.push('(');
        }
        src.push('1');
        for _ in 0..2000 {
            src.push(')');
        }
        assert!(parse_stmt(&src).is_err());
    }

    #[test]
    fn list_literals() {
        let e = parse_expr("[3, 5]").unwrap();
        assert_eq!(render_expr(&e), "[3, 5]");
        let e = parse_expr("[3, 5,]").unwrap();
        assert_eq!(render_expr(&e), "[3, 5]");
    }
}

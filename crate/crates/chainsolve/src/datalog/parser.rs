//! Text form to [`DatalogProgram`], with all structural validation done
//! here so evaluation can assume a well-formed program.

use super::{
    Atom, CmpOp, ColType, Column, DatalogProgram, DatalogValue, Declaration, Literal, Rule, Term,
};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DatalogParseError {
    #[error("program contains no statements")]
    Empty,
    #[error("line {line}: unexpected character {ch:?}")]
    UnexpectedChar { line: usize, ch: char },
    #[error("line {line}: unterminated string literal")]
    UnterminatedString { line: usize },
    #[error("line {line}: unknown directive .{name}")]
    UnknownDirective { line: usize, name: String },
    #[error("line {line}: unknown column type {name:?}")]
    UnknownColType { line: usize, name: String },
    #[error("line {line}: expected {expected}, found {found}")]
    Expected {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: relation {relation} is already declared")]
    Redeclaration { line: usize, relation: String },
    #[error("line {line}: relation {relation} is not declared")]
    Undeclared { line: usize, relation: String },
    #[error("line {line}: {relation} takes {expected} arguments, found {found}")]
    ArityMismatch {
        line: usize,
        relation: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: argument {position} of {relation} must be {expected}")]
    ArgType {
        line: usize,
        relation: String,
        position: usize,
        expected: &'static str,
    },
    #[error("line {line}: facts must be ground, found variable {var}")]
    NonGroundFact { line: usize, var: String },
    #[error("line {line}: variable {var} does not occur in any positive body atom")]
    UngroundedVariable { line: usize, var: String },
}

impl DatalogParseError {
    /// Program line the error points at, when it points at one.
    pub fn line(&self) -> Option<usize> {
        match self {
            DatalogParseError::Empty => None,
            DatalogParseError::UnexpectedChar { line, .. }
            | DatalogParseError::UnterminatedString { line }
            | DatalogParseError::UnknownDirective { line, .. }
            | DatalogParseError::UnknownColType { line, .. }
            | DatalogParseError::Expected { line, .. }
            | DatalogParseError::Redeclaration { line, .. }
            | DatalogParseError::Undeclared { line, .. }
            | DatalogParseError::ArityMismatch { line, .. }
            | DatalogParseError::ArgType { line, .. }
            | DatalogParseError::NonGroundFact { line, .. }
            | DatalogParseError::UngroundedVariable { line, .. } => Some(*line),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Number(String),
    Directive(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Turnstile,
    Bang,
    Cmp(CmpOp),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s}"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Number(n) => format!("number {n}"),
            Tok::Directive(d) => format!(".{d}"),
            Tok::LParen => "(".to_string(),
            Tok::RParen => ")".to_string(),
            Tok::Comma => ",".to_string(),
            Tok::Dot => ".".to_string(),
            Tok::Colon => ":".to_string(),
            Tok::Turnstile => ":-".to_string(),
            Tok::Bang => "!".to_string(),
            Tok::Cmp(op) => op.symbol().to_string(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, DatalogParseError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while let Some(&ch) = chars.peek() {
        match ch {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '/' => {
                chars.next();
                if chars.peek() == Some(&'/') {
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                            break;
                        }
                    }
                } else {
                    return Err(DatalogParseError::UnexpectedChar { line, ch: '/' });
                }
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None | Some('\n') => {
                            return Err(DatalogParseError::UnterminatedString { line })
                        }
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            other => {
                                return Err(DatalogParseError::UnexpectedChar {
                                    line,
                                    ch: other.unwrap_or('\\'),
                                })
                            }
                        },
                        Some(c) => s.push(c),
                    }
                }
                toks.push((Tok::Str(s), line));
            }
            '.' => {
                chars.next();
                match chars.peek() {
                    Some(c) if c.is_ascii_alphabetic() => {
                        let mut name = String::new();
                        while let Some(&c) = chars.peek() {
                            if c.is_ascii_alphanumeric() || c == '_' {
                                name.push(c);
                                chars.next();
                            } else {
                                break;
                            }
                        }
                        toks.push((Tok::Directive(name), line));
                    }
                    Some(c) if c.is_ascii_digit() => {
                        let mut n = String::from("0.");
                        while let Some(&c) = chars.peek() {
                            if c.is_ascii_digit() {
                                n.push(c);
                                chars.next();
                            } else {
                                break;
                            }
                        }
                        toks.push((Tok::Number(n), line));
                    }
                    _ => toks.push((Tok::Dot, line)),
                }
            }
            c if c.is_ascii_digit() || c == '-' => {
                chars.next();
                let mut n = String::new();
                n.push(c);
                if c == '-' && !chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    return Err(DatalogParseError::UnexpectedChar { line, ch: '-' });
                }
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        n.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                // A dot continues the literal only when a digit follows,
                // so a clause-final period after an integer stays a Dot.
                if chars.peek() == Some(&'.') {
                    let mut ahead = chars.clone();
                    ahead.next();
                    if ahead.peek().is_some_and(|d| d.is_ascii_digit()) {
                        chars.next();
                        n.push('.');
                        while let Some(&d) = chars.peek() {
                            if d.is_ascii_digit() {
                                n.push(d);
                                chars.next();
                            } else {
                                break;
                            }
                        }
                    }
                }
                toks.push((Tok::Number(n), line));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Ident(name), line));
            }
            '(' => {
                chars.next();
                toks.push((Tok::LParen, line));
            }
            ')' => {
                chars.next();
                toks.push((Tok::RParen, line));
            }
            ',' => {
                chars.next();
                toks.push((Tok::Comma, line));
            }
            ':' => {
                chars.next();
                if chars.peek() == Some(&'-') {
                    chars.next();
                    toks.push((Tok::Turnstile, line));
                } else {
                    toks.push((Tok::Colon, line));
                }
            }
            '!' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    toks.push((Tok::Cmp(CmpOp::Ne), line));
                } else {
                    toks.push((Tok::Bang, line));
                }
            }
            '<' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    toks.push((Tok::Cmp(CmpOp::Le), line));
                } else {
                    toks.push((Tok::Cmp(CmpOp::Lt), line));
                }
            }
            '>' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    toks.push((Tok::Cmp(CmpOp::Ge), line));
                } else {
                    toks.push((Tok::Cmp(CmpOp::Gt), line));
                }
            }
            '=' => {
                chars.next();
                toks.push((Tok::Cmp(CmpOp::Eq), line));
            }
            other => return Err(DatalogParseError::UnexpectedChar { line, ch: other }),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    program: DatalogProgram,
}

pub fn parse_datalog(text: &str) -> Result<DatalogProgram, DatalogParseError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(DatalogParseError::Empty);
    }
    let mut p = Parser {
        toks,
        pos: 0,
        program: DatalogProgram::default(),
    };
    while !p.at_end() {
        p.item()?;
    }
    Ok(p.program)
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos.min(self.toks.len() - 1))
            .map_or(1, |t| t.1)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|t| &t.0)
    }

    fn next(&mut self, expected: &'static str) -> Result<Tok, DatalogParseError> {
        let line = self.line();
        match self.toks.get(self.pos) {
            Some((tok, _)) => {
                self.pos += 1;
                Ok(tok.clone())
            }
            None => Err(DatalogParseError::Expected {
                line,
                expected,
                found: "end of input".to_string(),
            }),
        }
    }

    fn expect(&mut self, want: Tok, expected: &'static str) -> Result<(), DatalogParseError> {
        let line = self.line();
        let tok = self.next(expected)?;
        if tok == want {
            Ok(())
        } else {
            Err(DatalogParseError::Expected {
                line,
                expected,
                found: tok.describe(),
            })
        }
    }

    fn ident(&mut self, expected: &'static str) -> Result<String, DatalogParseError> {
        let line = self.line();
        match self.next(expected)? {
            Tok::Ident(s) => Ok(s),
            other => Err(DatalogParseError::Expected {
                line,
                expected,
                found: other.describe(),
            }),
        }
    }

    fn item(&mut self) -> Result<(), DatalogParseError> {
        let line = self.line();
        match self.peek() {
            Some(Tok::Directive(d)) if d == "decl" => {
                self.pos += 1;
                self.decl(line)
            }
            Some(Tok::Directive(d)) if d == "output" => {
                self.pos += 1;
                let name = self.ident("relation name")?;
                if self.program.decl(&name).is_none() {
                    return Err(DatalogParseError::Undeclared {
                        line,
                        relation: name,
                    });
                }
                self.program.outputs.push(name);
                Ok(())
            }
            Some(Tok::Directive(d)) => Err(DatalogParseError::UnknownDirective {
                line,
                name: d.clone(),
            }),
            _ => self.clause(line),
        }
    }

    fn decl(&mut self, line: usize) -> Result<(), DatalogParseError> {
        let relation = self.ident("relation name")?;
        if self.program.decl(&relation).is_some() {
            return Err(DatalogParseError::Redeclaration { line, relation });
        }
        self.expect(Tok::LParen, "(")?;
        let mut columns = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                let name = self.ident("column name")?;
                self.expect(Tok::Colon, ":")?;
                let ty_line = self.line();
                let ty_name = self.ident("column type")?;
                let ty = ColType::parse(&ty_name).ok_or(DatalogParseError::UnknownColType {
                    line: ty_line,
                    name: ty_name,
                })?;
                columns.push(Column { name, ty });
                match self.next(", or )")? {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => {
                        return Err(DatalogParseError::Expected {
                            line: self.line(),
                            expected: ", or )",
                            found: other.describe(),
                        })
                    }
                }
            }
        } else {
            self.pos += 1;
        }
        self.program.decls.push(Declaration { relation, columns });
        Ok(())
    }

    fn clause(&mut self, line: usize) -> Result<(), DatalogParseError> {
        let head = self.atom()?;
        match self.peek() {
            Some(Tok::Dot) => {
                self.pos += 1;
                for arg in &head.args {
                    if let Term::Var(v) = arg {
                        return Err(DatalogParseError::NonGroundFact {
                            line,
                            var: v.clone(),
                        });
                    }
                }
                self.program.facts.push(head);
                Ok(())
            }
            Some(Tok::Turnstile) => {
                self.pos += 1;
                let mut body = Vec::new();
                loop {
                    body.push(self.literal()?);
                    match self.next(", or .")? {
                        Tok::Comma => continue,
                        Tok::Dot => break,
                        other => {
                            return Err(DatalogParseError::Expected {
                                line: self.line(),
                                expected: ", or .",
                                found: other.describe(),
                            })
                        }
                    }
                }
                self.check_range_restriction(line, &head, &body)?;
                self.program.rules.push(Rule { head, body });
                Ok(())
            }
            other => Err(DatalogParseError::Expected {
                line: self.line(),
                expected: ". or :-",
                found: other.map_or("end of input".to_string(), |t| t.describe()),
            }),
        }
    }

    fn literal(&mut self) -> Result<Literal, DatalogParseError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Literal::Neg(self.atom()?))
            }
            Some(Tok::Ident(_)) if self.peek2() == Some(&Tok::LParen) => {
                Ok(Literal::Pos(self.atom()?))
            }
            _ => {
                let left = self.term()?;
                let line = self.line();
                let op = match self.next("comparison operator")? {
                    Tok::Cmp(op) => op,
                    other => {
                        return Err(DatalogParseError::Expected {
                            line,
                            expected: "comparison operator",
                            found: other.describe(),
                        })
                    }
                };
                let right = self.term()?;
                Ok(Literal::Cmp(op, left, right))
            }
        }
    }

    fn atom(&mut self) -> Result<Atom, DatalogParseError> {
        let line = self.line();
        let relation = self.ident("relation name")?;
        let decl = match self.program.decl(&relation) {
            Some(d) => d.clone(),
            None => return Err(DatalogParseError::Undeclared { line, relation }),
        };
        self.expect(Tok::LParen, "(")?;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
        } else {
            loop {
                args.push(self.term()?);
                match self.next(", or )")? {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => {
                        return Err(DatalogParseError::Expected {
                            line: self.line(),
                            expected: ", or )",
                            found: other.describe(),
                        })
                    }
                }
            }
        }
        if args.len() != decl.columns.len() {
            return Err(DatalogParseError::ArityMismatch {
                line,
                relation,
                expected: decl.columns.len(),
                found: args.len(),
            });
        }
        for (i, (arg, col)) in args.iter().zip(&decl.columns).enumerate() {
            if let Term::Const(value) = arg {
                if !col.ty.admits(value) {
                    return Err(DatalogParseError::ArgType {
                        line,
                        relation,
                        position: i + 1,
                        expected: col.ty.name(),
                    });
                }
            }
        }
        Ok(Atom { relation, args })
    }

    fn term(&mut self) -> Result<Term, DatalogParseError> {
        let line = self.line();
        match self.next("term")? {
            Tok::Ident(name) => Ok(Term::Var(name)),
            Tok::Str(s) => Ok(Term::Const(DatalogValue::Sym(s))),
            Tok::Number(n) => {
                let value = crate::model::parse_exact_number(&n)
                    .expect("lexer produced a malformed number literal");
                Ok(Term::Const(DatalogValue::Num(value)))
            }
            other => Err(DatalogParseError::Expected {
                line,
                expected: "term",
                found: other.describe(),
            }),
        }
    }

    /// Every variable in the head, in a comparison, or under negation
    /// must be bound by some positive body atom.
    fn check_range_restriction(
        &self,
        line: usize,
        head: &Atom,
        body: &[Literal],
    ) -> Result<(), DatalogParseError> {
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        for lit in body {
            if let Literal::Pos(atom) = lit {
                for arg in &atom.args {
                    if let Term::Var(v) = arg {
                        bound.insert(v);
                    }
                }
            }
        }
        let check = |term: &Term| -> Result<(), DatalogParseError> {
            if let Term::Var(v) = term {
                if !bound.contains(v.as_str()) {
                    return Err(DatalogParseError::UngroundedVariable {
                        line,
                        var: v.clone(),
                    });
                }
            }
            Ok(())
        };
        for arg in &head.args {
            check(arg)?;
        }
        for lit in body {
            match lit {
                Literal::Pos(_) => {}
                Literal::Neg(atom) => {
                    for arg in &atom.args {
                        check(arg)?;
                    }
                }
                Literal::Cmp(_, l, r) => {
                    check(l)?;
                    check(r)?;
                }
            }
        }
        Ok(())
    }
}

//! Goal formulas: parsing and grounding.
//!
//! The accepted grammar is a small PDDL fragment:
//!
//! ```text
//! goal    := (:goal expr+)
//! expr    := (and expr*) | (not pred) | (exists (binding+) expr+) | pred
//! binding := ?var - type
//! pred    := (at term location) | (attribute term)
//! term    := ?var | name
//! ```
//!
//! `;` starts a comment running to the end of the line. Negation wraps
//! single predicates only, and every variable must be introduced by
//! exactly one enclosing `exists`.

use super::WorldModel;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoalTerm {
    Var(String),
    Name(String),
}

impl fmt::Display for GoalTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalTerm::Var(v) => write!(f, "?{v}"),
            GoalTerm::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoalExpr {
    And(Vec<GoalExpr>),
    Not(Box<GoalExpr>),
    Exists {
        var: String,
        kind: String,
        body: Box<GoalExpr>,
    },
    At(GoalTerm, String),
    Attr(String, GoalTerm),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanGoal {
    pub expr: GoalExpr,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GoalParseError {
    #[error("goal text is empty")]
    Empty,
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("expected (:goal ...) at the top level")]
    NotGoal,
    #[error("trailing content after the goal form")]
    Trailing,
    #[error("empty ( ) form")]
    EmptyForm,
    #[error("expected a predicate or connective, found {0}")]
    BadHead(String),
    #[error("expected a (predicate ...) form, found bare {0}")]
    BareSymbol(String),
    #[error("not wraps exactly one predicate")]
    NegationScope,
    #[error("at needs an object term and a location name")]
    AtShape,
    #[error("exists needs a (?var - type) binding list and a body")]
    BadBinder,
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("variable ?{0} is not bound by any exists")]
    UnboundVariable(String),
    #[error("variable ?{0} is bound more than once")]
    ReboundVariable(String),
}

enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Result<Vec<String>, GoalParseError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            ';' => {
                while chars.next_if(|&c| c != '\n').is_some() {}
            }
            '(' | ')' => {
                chars.next();
                toks.push(c.to_string());
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                }
                toks.push(atom);
            }
        }
    }
    Ok(toks)
}

fn read_sexp(toks: &[String], pos: &mut usize) -> Result<Sexp, GoalParseError> {
    match toks.get(*pos).map(String::as_str) {
        None => Err(GoalParseError::Unbalanced),
        Some(")") => Err(GoalParseError::Unbalanced),
        Some("(") => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                match toks.get(*pos).map(String::as_str) {
                    None => return Err(GoalParseError::Unbalanced),
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(read_sexp(toks, pos)?),
                }
            }
        }
        Some(atom) => {
            *pos += 1;
            Ok(Sexp::Atom(atom.to_string()))
        }
    }
}

pub fn parse_goal(text: &str) -> Result<PlanGoal, GoalParseError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(GoalParseError::Empty);
    }
    let mut pos = 0;
    let top = read_sexp(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(GoalParseError::Trailing);
    }
    let Sexp::List(items) = top else {
        return Err(GoalParseError::NotGoal);
    };
    match items.split_first() {
        Some((Sexp::Atom(head), body)) if head == ":goal" && !body.is_empty() => {
            let mut bound = Vec::new();
            let expr = compile_body(body, &mut bound)?;
            Ok(PlanGoal { expr })
        }
        _ => Err(GoalParseError::NotGoal),
    }
}

/// One form stays itself; several become an implicit conjunction.
fn compile_body(forms: &[Sexp], bound: &mut Vec<String>) -> Result<GoalExpr, GoalParseError> {
    if forms.len() == 1 {
        compile(&forms[0], bound)
    } else {
        let children = forms
            .iter()
            .map(|f| compile(f, bound))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GoalExpr::And(children))
    }
}

fn compile(sexp: &Sexp, bound: &mut Vec<String>) -> Result<GoalExpr, GoalParseError> {
    let items = match sexp {
        Sexp::Atom(a) => return Err(GoalParseError::BareSymbol(a.clone())),
        Sexp::List(items) => items,
    };
    let Some((head, rest)) = items.split_first() else {
        return Err(GoalParseError::EmptyForm);
    };
    let head = match head {
        Sexp::Atom(a) => a.as_str(),
        Sexp::List(_) => return Err(GoalParseError::BadHead("a nested list".to_string())),
    };
    match head {
        "and" => {
            let children = rest
                .iter()
                .map(|f| compile(f, bound))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GoalExpr::And(children))
        }
        "not" => {
            let [inner] = rest else {
                return Err(GoalParseError::NegationScope);
            };
            let inner = compile(inner, bound)?;
            if !matches!(inner, GoalExpr::At(..) | GoalExpr::Attr(..)) {
                return Err(GoalParseError::NegationScope);
            }
            Ok(GoalExpr::Not(Box::new(inner)))
        }
        "exists" => {
            let [Sexp::List(binder), body @ ..] = rest else {
                return Err(GoalParseError::BadBinder);
            };
            if body.is_empty() {
                return Err(GoalParseError::BadBinder);
            }
            let bindings = parse_bindings(binder)?;
            for (var, _) in &bindings {
                if bound.contains(var) {
                    return Err(GoalParseError::ReboundVariable(var.clone()));
                }
                bound.push(var.clone());
            }
            let mut expr = compile_body(body, bound)?;
            for (var, kind) in bindings.into_iter().rev() {
                bound.pop();
                expr = GoalExpr::Exists {
                    var,
                    kind,
                    body: Box::new(expr),
                };
            }
            Ok(expr)
        }
        "at" => {
            let [obj, loc] = rest else {
                return Err(GoalParseError::AtShape);
            };
            let term = compile_term(obj, bound)?;
            let Sexp::Atom(loc) = loc else {
                return Err(GoalParseError::AtShape);
            };
            if loc.starts_with('?') {
                return Err(GoalParseError::AtShape);
            }
            Ok(GoalExpr::At(term, loc.clone()))
        }
        other if other.starts_with('?') || other == ":goal" => {
            Err(GoalParseError::BadHead(other.to_string()))
        }
        attribute => {
            let [obj] = rest else {
                return Err(GoalParseError::UnknownPredicate(attribute.to_string()));
            };
            let term = compile_term(obj, bound)?;
            Ok(GoalExpr::Attr(attribute.to_string(), term))
        }
    }
}

/// Binding lists hold one or more `?var - type` triples.
fn parse_bindings(binder: &[Sexp]) -> Result<Vec<(String, String)>, GoalParseError> {
    if binder.is_empty() || binder.len() % 3 != 0 {
        return Err(GoalParseError::BadBinder);
    }
    let mut bindings = Vec::new();
    for triple in binder.chunks(3) {
        let [Sexp::Atom(var), Sexp::Atom(dash), Sexp::Atom(kind)] = triple else {
            return Err(GoalParseError::BadBinder);
        };
        let Some(name) = var.strip_prefix('?') else {
            return Err(GoalParseError::BadBinder);
        };
        if name.is_empty() || dash != "-" || kind.starts_with('?') {
            return Err(GoalParseError::BadBinder);
        }
        bindings.push((name.to_string(), kind.clone()));
    }
    Ok(bindings)
}

fn compile_term(sexp: &Sexp, bound: &[String]) -> Result<GoalTerm, GoalParseError> {
    let Sexp::Atom(atom) = sexp else {
        return Err(GoalParseError::BadHead("a nested list".to_string()));
    };
    match atom.strip_prefix('?') {
        Some(name) => {
            if bound.iter().any(|b| b == name) {
                Ok(GoalTerm::Var(name.to_string()))
            } else {
                Err(GoalParseError::UnboundVariable(name.to_string()))
            }
        }
        None => Ok(GoalTerm::Name(atom.clone())),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroundAtom {
    At { object: String, location: String },
    Attr { name: String, object: String },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundLiteral {
    pub positive: bool,
    pub atom: GroundAtom,
}

pub type GroundConjunction = Vec<GroundLiteral>;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GroundError {
    #[error("no object of type {0} exists in the world")]
    EmptyType(String),
    #[error("{0} is not an object in the world")]
    UnknownObject(String),
    #[error("{0} is not a location in the world")]
    UnknownLocation(String),
}

/// Expands existentials over same-typed objects. Any one returned
/// conjunction being satisfied satisfies the goal.
pub fn ground_goal(goal: &PlanGoal, world: &WorldModel) -> Result<Vec<GroundConjunction>, GroundError> {
    let mut env = BTreeMap::new();
    ground(&goal.expr, world, &mut env)
}

fn ground(
    expr: &GoalExpr,
    world: &WorldModel,
    env: &mut BTreeMap<String, String>,
) -> Result<Vec<GroundConjunction>, GroundError> {
    match expr {
        GoalExpr::And(children) => {
            let mut acc: Vec<GroundConjunction> = vec![Vec::new()];
            for child in children {
                let branches = ground(child, world, env)?;
                let mut next = Vec::with_capacity(acc.len() * branches.len());
                for conj in &acc {
                    for branch in &branches {
                        let mut merged = conj.clone();
                        merged.extend(branch.iter().cloned());
                        next.push(merged);
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
        GoalExpr::Not(inner) => {
            let mut branches = ground(inner, world, env)?;
            for conj in &mut branches {
                for lit in conj {
                    lit.positive = !lit.positive;
                }
            }
            Ok(branches)
        }
        GoalExpr::Exists { var, kind, body } => {
            let candidates = world.objects_of_type(kind);
            if candidates.is_empty() {
                return Err(GroundError::EmptyType(kind.clone()));
            }
            let mut branches = Vec::new();
            for object in candidates {
                env.insert(var.clone(), object.to_string());
                branches.extend(ground(body, world, env)?);
            }
            env.remove(var);
            Ok(branches)
        }
        GoalExpr::At(term, location) => {
            let object = resolve(term, env, world)?;
            if !world.is_location(location) {
                return Err(GroundError::UnknownLocation(location.clone()));
            }
            Ok(vec![vec![GroundLiteral {
                positive: true,
                atom: GroundAtom::At {
                    object,
                    location: location.clone(),
                },
            }]])
        }
        GoalExpr::Attr(name, term) => {
            let object = resolve(term, env, world)?;
            Ok(vec![vec![GroundLiteral {
                positive: true,
                atom: GroundAtom::Attr {
                    name: name.clone(),
                    object,
                },
            }]])
        }
    }
}

fn resolve(
    term: &GoalTerm,
    env: &BTreeMap<String, String>,
    world: &WorldModel,
) -> Result<String, GroundError> {
    let name = match term {
        GoalTerm::Var(v) => env[v].clone(),
        GoalTerm::Name(n) => n.clone(),
    };
    if !world.is_object(&name) {
        return Err(GroundError::UnknownObject(name));
    }
    Ok(name)
}

/// Checks a conjunction against an object-location map; attributes are
/// static and come from the world.
pub(super) fn conjunction_holds(
    conj: &GroundConjunction,
    object_at: &BTreeMap<String, String>,
    world: &WorldModel,
) -> bool {
    conj.iter().all(|lit| {
        let truth = match &lit.atom {
            GroundAtom::At { object, location } => {
                object_at.get(object).is_some_and(|l| l == location)
            }
            GroundAtom::Attr { name, object } => world.has_attr(object, name),
        };
        truth == lit.positive
    })
}

//! Bottom-up Datalog interpreter for boolean-reasoning programs.
//!
//! The dialect covers relation declarations with typed columns, ground
//! facts, Horn rules whose bodies mix positive atoms, negated atoms, and
//! comparisons, plus `.output` directives. Evaluation is stratified
//! semi-naive iteration to a least fixpoint; the boolean verdict of a
//! program is whether its output relation ends up nonempty.

mod eval;
mod parser;

pub use eval::{boolean_answer, evaluate_datalog, stratify, DatalogEvalError, StratifyError};
pub use parser::{parse_datalog, DatalogParseError};

use num_rational::BigRational;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Column type named in a `.decl` directive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColType {
    Symbol,
    Float,
    Number,
}

impl ColType {
    pub fn name(self) -> &'static str {
        match self {
            ColType::Symbol => "symbol",
            ColType::Float => "float",
            ColType::Number => "number",
        }
    }

    pub fn parse(name: &str) -> Option<ColType> {
        match name {
            "symbol" => Some(ColType::Symbol),
            "float" => Some(ColType::Float),
            "number" => Some(ColType::Number),
            _ => None,
        }
    }

    /// Whether a ground constant may occupy a column of this type.
    /// `number` columns require integral values; `float` accepts any
    /// numeric constant, including integer literals.
    pub fn admits(self, value: &DatalogValue) -> bool {
        match (self, value) {
            (ColType::Symbol, DatalogValue::Sym(_)) => true,
            (ColType::Float, DatalogValue::Num(_)) => true,
            (ColType::Number, DatalogValue::Num(n)) => n.is_integer(),
            _ => false,
        }
    }
}

impl fmt::Display for ColType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ground constant stored in relation tuples. Numeric constants are
/// exact rationals, so decimal literals compare without rounding.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DatalogValue {
    Sym(String),
    Num(BigRational),
}

impl DatalogValue {
    pub fn kind(&self) -> &'static str {
        match self {
            DatalogValue::Sym(_) => "symbol",
            DatalogValue::Num(_) => "number",
        }
    }
}

impl fmt::Display for DatalogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatalogValue::Sym(s) => {
                write!(f, "\"")?;
                for ch in s.chars() {
                    match ch {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        _ => write!(f, "{ch}")?,
                    }
                }
                write!(f, "\"")
            }
            DatalogValue::Num(n) => f.write_str(&crate::model::rational_to_record(n)),
        }
    }
}

/// Argument position inside an atom or comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(DatalogValue),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

/// Relation application `name(t1, ..., tn)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Term>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{arg}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    /// Ordered operators are meaningless on symbols and are rejected
    /// during evaluation.
    pub fn is_ordered(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Gt | CmpOp::Le | CmpOp::Ge)
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One conjunct of a rule body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Cmp(CmpOp, Term, Term),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "!{a}"),
            Literal::Cmp(op, l, r) => write!(f, "{l} {op} {r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, lit) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{lit}")?;
        }
        write!(f, ".")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColType,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Declaration {
    pub relation: String,
    pub columns: Vec<Column>,
}

impl fmt::Display for Declaration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, ".decl {}(", self.relation)?;
        for (i, col) in self.columns.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", col.name, col.ty)?;
        }
        write!(f, ")")
    }
}

/// A parsed program. All atoms are validated against the declarations:
/// relations are declared before use, arities match, fact arguments are
/// ground constants of the declared column types, and every variable in
/// a rule head, comparison, or negated atom also occurs in a positive
/// body atom of the same rule.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DatalogProgram {
    pub decls: Vec<Declaration>,
    pub facts: Vec<Atom>,
    pub rules: Vec<Rule>,
    pub outputs: Vec<String>,
}

impl DatalogProgram {
    pub fn decl(&self, relation: &str) -> Option<&Declaration> {
        self.decls.iter().find(|d| d.relation == relation)
    }
}

pub type Tuple = Vec<DatalogValue>;

/// Materialized database after evaluation. Every declared relation is
/// present, including the ones that derived nothing.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RelationInstance {
    pub relations: BTreeMap<String, BTreeSet<Tuple>>,
}

impl RelationInstance {
    pub fn tuples(&self, relation: &str) -> Option<&BTreeSet<Tuple>> {
        self.relations.get(relation)
    }
}

/// Canonical text form: declarations, then facts, then rules, then
/// output directives. Parsing the result reproduces the same program.
pub fn render_program(p: &DatalogProgram) -> String {
    let mut out = String::new();
    for d in &p.decls {
        out.push_str(&d.to_string());
        out.push('\n');
    }
    for fact in &p.facts {
        out.push_str(&fact.to_string());
        out.push_str(".\n");
    }
    for rule in &p.rules {
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    for name in &p.outputs {
        out.push_str(".output ");
        out.push_str(name);
        out.push('\n');
    }
    out
}

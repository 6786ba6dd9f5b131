//! The straight-line program dialect: Python-shaped assignment sequences over
//! exact rationals, dates, strings, booleans, and solvable unknowns.
//!
//! The grammar is closed: no control flow, no user-defined functions, and a
//! fixed builtin set. A program is a list of assignments; its result is the
//! final binding of `answer`.

pub mod date;
mod eval;
mod lexer;
pub mod parser;
pub mod poly;
pub mod sym;

pub use date::{CivilDate, DateDelta, DateError};
pub use eval::{
    answer_from_env, eval_expr, round_half_away, run_statements, Env, EvalError, Value,
};
pub use parser::{
    parse_expr, parse_stmt, render_expr, render_stmt, Expr, SlParseError, SlStmt,
};
pub use poly::SolveError;
pub use sym::SymExpr;

use crate::model::{AnswerValue, ExecLimits};
use std::collections::BTreeSet;

/// Names an assignment may use without defining them first.
pub const BUILTIN_NAMES: &[&str] = &[
    "min",
    "max",
    "abs",
    "floor",
    "ceil",
    "round",
    "int",
    "date",
    "relativedelta",
    "strftime",
    "Symbol",
    "solve_it",
];

pub fn is_builtin(name: &str) -> bool {
    BUILTIN_NAMES.contains(&name)
}

/// Runs a whole program and reads `answer`.
pub fn evaluate_program(stmts: &[SlStmt], limits: &ExecLimits) -> Result<AnswerValue, EvalError> {
    let mut env = Env::new();
    run_statements(stmts, &mut env, limits)?;
    answer_from_env(&env)
}

/// The single name an assignment defines.
pub fn stmt_defs(stmt: &SlStmt) -> BTreeSet<String> {
    BTreeSet::from([stmt.target.clone()])
}

/// Free identifiers of the right-hand side. Builtin names, keyword-argument
/// names, and method names are not uses.
pub fn stmt_uses(stmt: &SlStmt) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_uses(&stmt.expr, &mut out);
    out
}

fn collect_uses(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Num(_) | Expr::Str(_) | Expr::Bool(_) => {}
        Expr::Ident(name) => {
            if !is_builtin(name) {
                out.insert(name.clone());
            }
        }
        Expr::Unary(_, operand) => collect_uses(operand, out),
        Expr::Binary(_, lhs, rhs) | Expr::Compare(_, lhs, rhs) | Expr::Logic(_, lhs, rhs) => {
            collect_uses(lhs, out);
            collect_uses(rhs, out);
        }
        Expr::Call { func, args, kwargs } => {
            if !is_builtin(func) {
                out.insert(func.clone());
            }
            for a in args {
                collect_uses(a, out);
            }
            for (_, v) in kwargs {
                collect_uses(v, out);
            }
        }
        Expr::Method { recv, args, .. } => {
            collect_uses(recv, out);
            for a in args {
                collect_uses(a, out);
            }
        }
        Expr::Subscript { base, index } => {
            collect_uses(base, out);
            collect_uses(index, out);
        }
        Expr::List(items) => {
            for item in items {
                collect_uses(item, out);
            }
        }
    }
}

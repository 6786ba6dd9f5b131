//! Sequential evaluator for straight-line programs.
//!
//! Numbers are exact rationals. Arithmetic touching an unsolved unknown
//! promotes to a symbolic tree; `solve_it` collapses such a tree back to a
//! number. The special variable `answer` holds the program's result.

use super::date::{CivilDate, DateDelta, DateError};
use super::parser::{BinOp, CmpOp, Expr, LogicOp, SlStmt, UnaryOp};
use super::poly::SolveError;
use super::sym::{solve_for, SymExpr};
use crate::model::{AnswerValue, ExecLimits};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(BigRational),
    Bool(bool),
    Str(String),
    Date(CivilDate),
    Delta(DateDelta),
    Sym(SymExpr),
    /// Root found by solve_it, keyed by the unknown it solves.
    Solution { unknown: String, value: BigRational },
    NumSet(BTreeSet<BigRational>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Date(_) => "date",
            Value::Delta(_) => "date offset",
            Value::Sym(_) => "symbolic expression",
            Value::Solution { .. } => "solution",
            Value::NumSet(_) => "number set",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("name {0:?} is not defined")]
    UnknownName(String),
    #[error("unknown function {0:?}")]
    UnknownBuiltin(String),
    #[error("unknown method {0:?} on {1}")]
    UnknownMethod(String, &'static str),
    #[error("{func}() expects {expected}, got {got} arguments")]
    Arity { func: &'static str, expected: &'static str, got: usize },
    #[error("{func}() got unexpected keyword argument {name:?}")]
    BadKwarg { func: &'static str, name: String },
    #[error("unsupported operand types: {0}")]
    Type(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("0 cannot be raised to a negative power")]
    ZeroToNegativePower,
    #[error("exponent {0} is out of range")]
    HugeExponent(String),
    #[error("negative base with fractional exponent")]
    NegativeBaseFractionalPower,
    #[error("numeric overflow in {0}")]
    Overflow(&'static str),
    #[error(transparent)]
    Date(#[from] DateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("solution is for {have:?}, subscripted with {want:?}")]
    WrongUnknown { have: String, want: String },
    #[error("list elements must be numbers")]
    NonNumericList,
    #[error("program leaves no variable named 'answer'")]
    NoAnswer,
    #[error("answer has unsupported type {0}")]
    UnsupportedAnswer(&'static str),
    #[error("execution deadline exceeded")]
    Timeout,
}

#[derive(Debug, Clone, Default)]
pub struct Env {
    map: HashMap<String, Value>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.map.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.map.insert(name.into(), value);
    }
}

/// Runs statements in order. Rebinding a name is allowed; each right-hand
/// side sees only bindings made before it.
pub fn run_statements(stmts: &[SlStmt], env: &mut Env, limits: &ExecLimits) -> Result<(), EvalError> {
    for stmt in stmts {
        if limits.expired() {
            return Err(EvalError::Timeout);
        }
        let value = eval_expr(&stmt.expr, env, limits)?;
        env.set(stmt.target.clone(), value);
    }
    Ok(())
}

/// Reads the conventional result variable. Dates convert to their `%m/%d/%Y`
/// text form; offsets, unsolved symbols, and raw solutions are not answers.
pub fn answer_from_env(env: &Env) -> Result<AnswerValue, EvalError> {
    match env.get("answer") {
        None => Err(EvalError::NoAnswer),
        Some(Value::Num(n)) => Ok(AnswerValue::Number(n.clone())),
        Some(Value::NumSet(s)) => Ok(AnswerValue::NumberSet(s.clone())),
        Some(Value::Bool(b)) => Ok(AnswerValue::Bool(*b)),
        Some(Value::Str(s)) => Ok(AnswerValue::Str(s.clone())),
        Some(Value::Date(d)) => Ok(AnswerValue::Str(d.strftime("%m/%d/%Y")?)),
        Some(other) => Err(EvalError::UnsupportedAnswer(other.type_name())),
    }
}

pub fn eval_expr(e: &Expr, env: &Env, limits: &ExecLimits) -> Result<Value, EvalError> {
    match e {
        Expr::Num(n) => Ok(Value::Num(n.clone())),
        Expr::Str(s) => Ok(Value::Str(s.clone())),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Ident(name) => env
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnknownName(name.clone())),
        Expr::Unary(UnaryOp::Neg, operand) => match eval_expr(operand, env, limits)? {
            Value::Num(n) => Ok(Value::Num(-n)),
            Value::Sym(s) => Ok(Value::Sym(SymExpr::Neg(Box::new(s)))),
            other => Err(EvalError::Type(format!("-{}", other.type_name()))),
        },
        Expr::Unary(UnaryOp::Not, operand) => match eval_expr(operand, env, limits)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => Err(EvalError::Type(format!("not {}", other.type_name()))),
        },
        Expr::Binary(op, lhs, rhs) => {
            let l = eval_expr(lhs, env, limits)?;
            let r = eval_expr(rhs, env, limits)?;
            binary(*op, l, r, limits)
        }
        Expr::Compare(op, lhs, rhs) => {
            let l = eval_expr(lhs, env, limits)?;
            let r = eval_expr(rhs, env, limits)?;
            compare(*op, l, r)
        }
        Expr::Logic(op, lhs, rhs) => {
            let l = eval_expr(lhs, env, limits)?;
            let r = eval_expr(rhs, env, limits)?;
            match (l, r) {
                (Value::Bool(a), Value::Bool(b)) => Ok(Value::Bool(match op {
                    LogicOp::And => a && b,
                    LogicOp::Or => a || b,
                })),
                (a, b) => Err(EvalError::Type(format!(
                    "{} {} {}",
                    a.type_name(),
                    match op {
                        LogicOp::And => "and",
                        LogicOp::Or => "or",
                    },
                    b.type_name()
                ))),
            }
        }
        Expr::Call { func, args, kwargs } => eval_call(func, args, kwargs, env, limits),
        Expr::Method { recv, name, args } => {
            let r = eval_expr(recv, env, limits)?;
            eval_method(r, name, args, env, limits)
        }
        Expr::Subscript { base, index } => {
            let b = eval_expr(base, env, limits)?;
            let i = eval_expr(index, env, limits)?;
            subscript(b, i)
        }
        Expr::List(items) => {
            let mut set = BTreeSet::new();
            for item in items {
                match eval_expr(item, env, limits)? {
                    Value::Num(n) => {
                        set.insert(n);
                    }
                    _ => return Err(EvalError::NonNumericList),
                }
            }
            Ok(Value::NumSet(set))
        }
    }
}

fn to_sym(v: Value) -> Result<SymExpr, EvalError> {
    match v {
        Value::Sym(s) => Ok(s),
        Value::Num(n) => Ok(SymExpr::Const(n)),
        other => Err(EvalError::Type(format!(
            "cannot mix {} into a symbolic expression",
            other.type_name()
        ))),
    }
}

fn binary(op: BinOp, lhs: Value, rhs: Value, limits: &ExecLimits) -> Result<Value, EvalError> {
    use Value::*;
    match (op, lhs, rhs) {
        (_, Num(a), Num(b)) => num_binary(op, a, b, limits),
        // One symbolic operand makes the whole operation symbolic.
        (_, l @ Sym(_), r) | (_, l, r @ Sym(_)) => {
            let a = to_sym(l)?;
            match op {
                BinOp::Add => Ok(Sym(SymExpr::Add(Box::new(a), Box::new(to_sym(r)?)))),
                BinOp::Sub => Ok(Sym(SymExpr::Sub(Box::new(a), Box::new(to_sym(r)?)))),
                BinOp::Mul => Ok(Sym(SymExpr::Mul(Box::new(a), Box::new(to_sym(r)?)))),
                BinOp::Div => Ok(Sym(SymExpr::Div(Box::new(a), Box::new(to_sym(r)?)))),
                BinOp::Pow => match r {
                    Num(e) if e.denom().is_one() => {
                        let exp = e
                            .numer()
                            .to_i64()
                            .ok_or_else(|| EvalError::HugeExponent(e.to_string()))?;
                        Ok(Sym(SymExpr::Pow(Box::new(a), exp)))
                    }
                    other => Err(EvalError::Type(format!(
                        "symbolic base with {} exponent",
                        other.type_name()
                    ))),
                },
                BinOp::FloorDiv | BinOp::Mod => Err(EvalError::Type(
                    "floor division and modulo are not defined on symbolic values".to_string(),
                )),
            }
        }
        (BinOp::Add, Date(d), Delta(delta)) | (BinOp::Add, Delta(delta), Date(d)) => {
            Ok(Date(d.add_delta(&delta)))
        }
        (BinOp::Sub, Date(d), Delta(delta)) => Ok(Date(d.sub_delta(&delta))),
        (BinOp::Add, Delta(a), Delta(b)) => a
            .checked_add(&b)
            .map(Delta)
            .ok_or(EvalError::Overflow("date offset addition")),
        (op, l, r) => Err(EvalError::Type(format!(
            "{} {} {}",
            l.type_name(),
            op_symbol(op),
            r.type_name()
        ))),
    }
}

fn op_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::FloorDiv => "//",
        BinOp::Mod => "%",
        BinOp::Pow => "**",
    }
}

fn num_binary(
    op: BinOp,
    a: BigRational,
    b: BigRational,
    _limits: &ExecLimits,
) -> Result<Value, EvalError> {
    let v = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            a / b
        }
        BinOp::FloorDiv => {
            if b.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            (a / b).floor()
        }
        BinOp::Mod => {
            if b.is_zero() {
                return Err(EvalError::DivisionByZero);
            }
            // Python semantics: result has the divisor's sign.
            &a - &b * (a.clone() / b.clone()).floor()
        }
        BinOp::Pow => return num_pow(a, b),
    };
    Ok(Value::Num(v))
}

fn num_pow(base: BigRational, exp: BigRational) -> Result<Value, EvalError> {
    if exp.denom().is_one() {
        let e = exp
            .numer()
            .to_i64()
            .filter(|e| e.unsigned_abs() <= 65_536)
            .ok_or_else(|| EvalError::HugeExponent(exp.to_string()))?;
        if e == 0 {
            return Ok(Value::Num(BigRational::one()));
        }
        if base.is_zero() && e < 0 {
            return Err(EvalError::ZeroToNegativePower);
        }
        let mag = e.unsigned_abs() as u32;
        let pow = BigRational::new(base.numer().pow(mag), base.denom().pow(mag));
        let v = if e < 0 { pow.recip() } else { pow };
        return Ok(Value::Num(v));
    }
    // Fractional exponents travel through the numeric path.
    if base.is_negative() {
        return Err(EvalError::NegativeBaseFractionalPower);
    }
    let bf = base.to_f64().ok_or(EvalError::Overflow("power"))?;
    let ef = exp.to_f64().ok_or(EvalError::Overflow("power"))?;
    let r = bf.powf(ef);
    BigRational::from_float(r)
        .map(Value::Num)
        .ok_or(EvalError::Overflow("power"))
}

fn compare(op: CmpOp, lhs: Value, rhs: Value) -> Result<Value, EvalError> {
    use std::cmp::Ordering;
    let ord = match (&lhs, &rhs) {
        (Value::Num(a), Value::Num(b)) => a.cmp(b),
        (Value::Date(a), Value::Date(b)) => a.cmp(b),
        (Value::Str(a), Value::Str(b)) => match op {
            CmpOp::Eq | CmpOp::Ne => a.cmp(b),
            _ => {
                return Err(EvalError::Type("strings only support == and !=".to_string()));
            }
        },
        (Value::Bool(a), Value::Bool(b)) => match op {
            CmpOp::Eq | CmpOp::Ne => a.cmp(b),
            _ => {
                return Err(EvalError::Type("bools only support == and !=".to_string()));
            }
        },
        (a, b) => {
            return Err(EvalError::Type(format!(
                "comparison between {} and {}",
                a.type_name(),
                b.type_name()
            )));
        }
    };
    let out = match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    };
    Ok(Value::Bool(out))
}

fn expect_num(v: Value, func: &'static str) -> Result<BigRational, EvalError> {
    match v {
        Value::Num(n) => Ok(n),
        other => Err(EvalError::Type(format!("{func}() on {}", other.type_name()))),
    }
}

fn expect_int(v: Value, func: &'static str) -> Result<BigInt, EvalError> {
    match v {
        Value::Num(n) if n.denom().is_one() => Ok(n.numer().clone()),
        other => Err(EvalError::Type(format!(
            "{func}() needs an integer, got {}",
            other.type_name()
        ))),
    }
}

fn eval_call(
    func: &str,
    args: &[Expr],
    kwargs: &[(String, Expr)],
    env: &Env,
    limits: &ExecLimits,
) -> Result<Value, EvalError> {
    let mut vals = Vec::with_capacity(args.len());
    for a in args {
        vals.push(eval_expr(a, env, limits)?);
    }
    let mut kwvals = Vec::with_capacity(kwargs.len());
    for (name, e) in kwargs {
        kwvals.push((name.as_str(), eval_expr(e, env, limits)?));
    }

    let no_kwargs = |func: &'static str| -> Result<(), EvalError> {
        match kwvals.first() {
            Some((name, _)) => Err(EvalError::BadKwarg { func, name: name.to_string() }),
            None => Ok(()),
        }
    };

    match func {
        "min" | "max" => {
            let f: &'static str = if func == "min" { "min" } else { "max" };
            no_kwargs(f)?;
            if vals.is_empty() {
                return Err(EvalError::Arity { func: f, expected: "at least 1", got: 0 });
            }
            let mut nums = Vec::with_capacity(vals.len());
            for v in vals {
                nums.push(expect_num(v, f)?);
            }
            let chosen = if f == "min" {
                nums.into_iter().min()
            } else {
                nums.into_iter().max()
            };
            Ok(Value::Num(chosen.expect("nonempty")))
        }
        "abs" => {
            no_kwargs("abs")?;
            let [v] = take_args::<1>("abs", vals)?;
            Ok(Value::Num(expect_num(v, "abs")?.abs()))
        }
        "floor" => {
            no_kwargs("floor")?;
            let [v] = take_args::<1>("floor", vals)?;
            Ok(Value::Num(expect_num(v, "floor")?.floor()))
        }
        "ceil" => {
            no_kwargs("ceil")?;
            let [v] = take_args::<1>("ceil", vals)?;
            Ok(Value::Num(expect_num(v, "ceil")?.ceil()))
        }
        "round" => {
            no_kwargs("round")?;
            if vals.is_empty() || vals.len() > 2 {
                return Err(EvalError::Arity { func: "round", expected: "1 or 2", got: vals.len() });
            }
            let mut it = vals.into_iter();
            let x = expect_num(it.next().expect("checked"), "round")?;
            let digits = match it.next() {
                Some(v) => expect_int(v, "round")?
                    .to_i32()
                    .filter(|d| d.unsigned_abs() <= 64)
                    .ok_or_else(|| EvalError::HugeExponent("round digits".to_string()))?,
                None => 0,
            };
            Ok(Value::Num(round_half_away(&x, digits)))
        }
        "int" => {
            no_kwargs("int")?;
            let [v] = take_args::<1>("int", vals)?;
            match v {
                Value::Num(n) => Ok(Value::Num(n.trunc())),
                Value::Bool(b) => Ok(Value::Num(if b {
                    BigRational::one()
                } else {
                    BigRational::zero()
                })),
                other => Err(EvalError::Type(format!("int() on {}", other.type_name()))),
            }
        }
        "date" => {
            no_kwargs("date")?;
            let [y, m, d] = take_args::<3>("date", vals)?;
            let y = expect_int(y, "date")?.to_i64().ok_or(EvalError::Overflow("date"))?;
            let m = expect_int(m, "date")?.to_i64().ok_or(EvalError::Overflow("date"))?;
            let d = expect_int(d, "date")?.to_i64().ok_or(EvalError::Overflow("date"))?;
            Ok(Value::Date(CivilDate::new(y, m, d)?))
        }
        "relativedelta" => {
            if !vals.is_empty() {
                return Err(EvalError::Arity {
                    func: "relativedelta",
                    expected: "keyword arguments only",
                    got: vals.len(),
                });
            }
            let mut delta = DateDelta::default();
            for (name, v) in kwvals {
                let n = expect_int(v, "relativedelta")?
                    .to_i64()
                    .ok_or(EvalError::Overflow("relativedelta"))?;
                match name {
                    "years" => delta.years = n,
                    "months" => delta.months = n,
                    "weeks" => delta.weeks = n,
                    "days" => delta.days = n,
                    other => {
                        return Err(EvalError::BadKwarg {
                            func: "relativedelta",
                            name: other.to_string(),
                        })
                    }
                }
            }
            Ok(Value::Delta(delta))
        }
        "Symbol" => {
            if vals.len() != 1 {
                return Err(EvalError::Arity { func: "Symbol", expected: "1", got: vals.len() });
            }
            let name = match vals.into_iter().next().expect("checked") {
                Value::Str(s) => s,
                other => {
                    return Err(EvalError::Type(format!(
                        "Symbol() name must be a string, got {}",
                        other.type_name()
                    )))
                }
            };
            let mut positive = false;
            for (kw, v) in kwvals {
                match (kw, v) {
                    ("positive", Value::Bool(b)) => positive = b,
                    ("positive", other) => {
                        return Err(EvalError::Type(format!(
                            "positive= must be a bool, got {}",
                            other.type_name()
                        )))
                    }
                    (other, _) => {
                        return Err(EvalError::BadKwarg { func: "Symbol", name: other.to_string() })
                    }
                }
            }
            Ok(Value::Sym(SymExpr::Unknown { name, positive }))
        }
        "solve_it" => {
            no_kwargs("solve_it")?;
            let [eq, unk] = take_args::<2>("solve_it", vals)?;
            let (name, positive) = match unk {
                Value::Sym(SymExpr::Unknown { name, positive }) => (name, positive),
                other => {
                    return Err(EvalError::Type(format!(
                        "solve_it() second argument must be an unknown, got {}",
                        other.type_name()
                    )))
                }
            };
            let eq = match eq {
                Value::Sym(s) => s,
                other => {
                    return Err(EvalError::Type(format!(
                        "solve_it() first argument must be symbolic, got {}",
                        other.type_name()
                    )))
                }
            };
            let value = solve_for(&eq, &name, positive, limits)?;
            Ok(Value::Solution { unknown: name, value })
        }
        other => Err(EvalError::UnknownBuiltin(other.to_string())),
    }
}

fn take_args<const N: usize>(
    func: &'static str,
    vals: Vec<Value>,
) -> Result<[Value; N], EvalError> {
    let got = vals.len();
    vals.try_into().map_err(|_| EvalError::Arity {
        func,
        expected: match N {
            1 => "1",
            2 => "2",
            3 => "3",
            _ => "a fixed number of",
        },
        got,
    })
}

fn eval_method(
    recv: Value,
    name: &str,
    args: &[Expr],
    env: &Env,
    limits: &ExecLimits,
) -> Result<Value, EvalError> {
    match (recv, name) {
        (Value::Date(d), "strftime") => {
            if args.len() != 1 {
                return Err(EvalError::Arity { func: "strftime", expected: "1", got: args.len() });
            }
            match eval_expr(&args[0], env, limits)? {
                Value::Str(fmt) => Ok(Value::Str(d.strftime(&fmt)?)),
                other => Err(EvalError::Type(format!(
                    "strftime() format must be a string, got {}",
                    other.type_name()
                ))),
            }
        }
        (recv, name) => Err(EvalError::UnknownMethod(name.to_string(), recv.type_name())),
    }
}

fn subscript(base: Value, index: Value) -> Result<Value, EvalError> {
    match (base, index) {
        (Value::Solution { unknown, value }, idx) => {
            let key = match idx {
                Value::Sym(SymExpr::Unknown { name, .. }) => name,
                Value::Str(s) => s,
                other => {
                    return Err(EvalError::Type(format!(
                        "solution subscript must be an unknown, got {}",
                        other.type_name()
                    )))
                }
            };
            if key == unknown {
                Ok(Value::Num(value))
            } else {
                Err(EvalError::WrongUnknown { have: unknown, want: key })
            }
        }
        (base, _) => Err(EvalError::Type(format!("{} is not subscriptable", base.type_name()))),
    }
}

/// Rounds half away from zero at the given decimal position.
pub fn round_half_away(x: &BigRational, digits: i32) -> BigRational {
    let scale = pow10(digits);
    let scaled = x * &scale;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let shifted = if scaled.is_negative() {
        -((-scaled + half).floor())
    } else {
        (scaled + half).floor()
    };
    shifted / scale
}

fn pow10(digits: i32) -> BigRational {
    let p = BigInt::from(10u32).pow(digits.unsigned_abs());
    if digits >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rat;
    use crate::straightline::parser::parse_stmt;

    fn run(program: &[&str]) -> Result<Env, EvalError> {
        let stmts: Vec<SlStmt> = program.iter().map(|s| parse_stmt(s).unwrap()).collect();
        let mut env = Env::new();
        run_statements(&stmts, &mut env, &ExecLimits::none())?;
        Ok(env)
    }

    fn answer(program: &[&str]) -> AnswerValue {
        answer_from_env(&run(program).unwrap()).unwrap()
    }

    #[test]
    fn trees_exemplar_evaluates_to_six() {
        let a = answer(&[
            "trees_begin = 15",
            "trees_end = 21",
            "trees_today = trees_end - trees_begin",
            "answer = trees_today",
        ]);
        assert_eq!(a, AnswerValue::Number(rat(6)));
    }

    #[test]
    fn exact_rational_division() {
        let a = answer(&["delay = 30 / 60", "answer = delay"]);
        assert_eq!(a, AnswerValue::Number(BigRational::new(1.into(), 2.into())));
    }

    #[test]
    fn flight_equation_solves_to_one() {
        let a = answer(&[
            "duration = Symbol('duration', positive=True)",
            "delay = 30 / 60",
            "total_distance = 600",
            "original_speed = total_distance / duration",
            "reduced_speed = total_distance / (duration + delay)",
            "solution = solve_it(original_speed - reduced_speed - 200, duration)",
            "answer = solution[duration]",
        ]);
        assert_eq!(a, AnswerValue::Number(rat(1)));
    }

    #[test]
    fn date_exemplar_formats_answer() {
        let a = answer(&[
            "date_yesterday = date(2021, 4, 30)",
            "date_today = date_yesterday + relativedelta(days=1)",
            "date_tomorrow = date_today + relativedelta(days=1)",
            "answer = date_tomorrow.strftime('%m/%d/%Y')",
        ]);
        assert_eq!(a, AnswerValue::Str("05/02/2021".to_string()));
    }

    #[test]
    fn sports_exemplar_boolean() {
        let env = run(&[
            "player_sport = 'football'",
            "playing_sport = 'hockey'",
            "plausibility = (player_sport == playing_sport)",
            "answer = int(plausibility)",
        ])
        .unwrap();
        assert_eq!(answer_from_env(&env).unwrap(), AnswerValue::Number(rat(0)));
    }

    #[test]
    fn undefined_name_reports_cleanly() {
        let err = run(&["answer = trees_begin + 1"]).unwrap_err();
        assert_eq!(err, EvalError::UnknownName("trees_begin".to_string()));
    }

    #[test]
    fn missing_answer_variable() {
        let env = run(&["x = 1"]).unwrap();
        assert_eq!(answer_from_env(&env), Err(EvalError::NoAnswer));
    }

    #[test]
    fn division_by_zero() {
        assert_eq!(run(&["x = 1 / 0"]).unwrap_err(), EvalError::DivisionByZero);
    }

    #[test]
    fn floor_div_and_mod_follow_python() {
        let env = run(&["a = 7 // 2", "b = -7 // 2", "c = 7 % 3", "d = -7 % 3"]).unwrap();
        assert_eq!(env.get("a"), Some(&Value::Num(rat(3))));
        assert_eq!(env.get("b"), Some(&Value::Num(rat(-4))));
        assert_eq!(env.get("c"), Some(&Value::Num(rat(1))));
        assert_eq!(env.get("d"), Some(&Value::Num(rat(2))));
    }

    #[test]
    fn integer_powers_are_exact() {
        let env = run(&["a = 2 ** 10", "b = 2 ** -2", "c = (-2) ** 3"]).unwrap();
        assert_eq!(env.get("a"), Some(&Value::Num(rat(1024))));
        assert_eq!(env.get("b"), Some(&Value::Num(BigRational::new(1.into(), 4.into()))));
        assert_eq!(env.get("c"), Some(&Value::Num(rat(-8))));
    }

    #[test]
    fn fractional_power_is_approximate_but_close() {
        let env = run(&["a = 2 ** 0.5"]).unwrap();
        let Some(Value::Num(a)) = env.get("a") else { panic!("not a number") };
        let sqrt2 = BigRational::new(
            "14142135623730951".parse().unwrap(),
            BigInt::from(10u64.pow(16)),
        );
        assert!((a - sqrt2).abs() < BigRational::new(1.into(), BigInt::from(10u64.pow(9))));
    }

    #[test]
    fn type_errors_are_reported() {
        assert!(matches!(run(&["x = 'a' + 1"]).unwrap_err(), EvalError::Type(_)));
        assert!(matches!(run(&["x = 1 < 'a'"]).unwrap_err(), EvalError::Type(_)));
        assert!(matches!(run(&["x = 'a' < 'b'"]).unwrap_err(), EvalError::Type(_)));
        assert!(matches!(
            run(&["x = date(2021, 1, 1) + 1"]).unwrap_err(),
            EvalError::Type(_)
        ));
    }

    #[test]
    fn invalid_date_is_an_execution_error() {
        assert!(matches!(run(&["x = date(2021, 2, 30)"]).unwrap_err(), EvalError::Date(_)));
    }

    #[test]
    fn rounding_half_away_from_zero() {
        let env = run(&["a = round(2.5)", "b = round(-2.5)", "c = round(2.44, 1)"]).unwrap();
        assert_eq!(env.get("a"), Some(&Value::Num(rat(3))));
        assert_eq!(env.get("b"), Some(&Value::Num(rat(-3))));
        assert_eq!(
            env.get("c"),
            Some(&Value::Num(BigRational::new(24.into(), 10.into())))
        );
    }

    #[test]
    fn list_literal_becomes_number_set() {
        let a = answer(&["answer = [3, 5]"]);
        let AnswerValue::NumberSet(s) = a else { panic!("not a set") };
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn solution_subscript_with_wrong_unknown() {
        let err = run(&[
            "x = Symbol('x', positive=True)",
            "y = Symbol('y', positive=True)",
            "s = solve_it(x - 3, x)",
            "answer = s[y]",
        ])
        .unwrap_err();
        assert!(matches!(err, EvalError::WrongUnknown { .. }));
    }

    #[test]
    fn rebinding_is_allowed() {
        let a = answer(&["x = 1", "x = x + 1", "answer = x"]);
        assert_eq!(a, AnswerValue::Number(rat(2)));
    }

    #[test]
    fn unknown_builtin_rejected() {
        assert_eq!(
            run(&["x = eval('1')"]).unwrap_err(),
            EvalError::UnknownBuiltin("eval".to_string())
        );
    }

    #[test]
    fn min_max_variadic() {
        let env = run(&["a = min(3, 1, 2)", "b = max(3, 1, 2)"]).unwrap();
        assert_eq!(env.get("a"), Some(&Value::Num(rat(1))));
        assert_eq!(env.get("b"), Some(&Value::Num(rat(3))));
    }
}

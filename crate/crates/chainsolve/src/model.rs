//! Shared domain types: task kinds, queries, answers, decoding parameters, and
//! the canonical text form of answers used in record files.
//!
//! Numbers are exact rationals end to end. The only place floating point enters
//! the pipeline is inside the numeric root-finding fallback of the straight-line
//! evaluator; everything in this module is exact.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Task family of a query. Decides the program dialect a chain is parsed in,
/// the answer match rule, and the default exemplar count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MathWordProblem,
    MultipleChoiceMath,
    DateUnderstanding,
    SportsUnderstanding,
    StrategyQa,
    Planning,
    RelationalInference,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::MathWordProblem,
        TaskKind::MultipleChoiceMath,
        TaskKind::DateUnderstanding,
        TaskKind::SportsUnderstanding,
        TaskKind::StrategyQa,
        TaskKind::Planning,
        TaskKind::RelationalInference,
    ];

    /// Stable lower_snake_case name used in dataset files and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::MathWordProblem => "math_word_problem",
            TaskKind::MultipleChoiceMath => "multiple_choice_math",
            TaskKind::DateUnderstanding => "date_understanding",
            TaskKind::SportsUnderstanding => "sports_understanding",
            TaskKind::StrategyQa => "strategy_qa",
            TaskKind::Planning => "planning",
            TaskKind::RelationalInference => "relational_inference",
        }
    }

    pub fn parse_name(s: &str) -> Option<TaskKind> {
        TaskKind::ALL.iter().copied().find(|t| t.name() == s)
    }

    /// Program dialect the chain body is written in.
    pub fn dialect(self) -> ProgramDialect {
        match self {
            TaskKind::MathWordProblem
            | TaskKind::MultipleChoiceMath
            | TaskKind::DateUnderstanding
            | TaskKind::SportsUnderstanding => ProgramDialect::Straightline,
            TaskKind::StrategyQa => ProgramDialect::Datalog,
            TaskKind::Planning => ProgramDialect::PlanGoal,
            TaskKind::RelationalInference => ProgramDialect::Relation,
        }
    }

    /// Number of exemplars sampled into a prompt by default.
    pub fn default_shot_count(self) -> usize {
        match self {
            TaskKind::MathWordProblem => 8,
            TaskKind::MultipleChoiceMath => 8,
            TaskKind::DateUnderstanding => 10,
            TaskKind::SportsUnderstanding => 10,
            TaskKind::StrategyQa => 6,
            TaskKind::Planning => 7,
            TaskKind::RelationalInference => 8,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Surface language of the program statements inside a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProgramDialect {
    Straightline,
    Datalog,
    Relation,
    PlanGoal,
}

/// One dataset item.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub task: TaskKind,
    pub question: String,
    /// Candidate answers for multiple-choice tasks, in presentation order.
    pub options: Option<Vec<String>>,
    pub gold: Option<GoldAnswer>,
    /// Reasoning-path length bucket, where the dataset provides one.
    pub hops: Option<u32>,
}

/// Reference answer attached to a query.
#[derive(Debug, Clone, PartialEq)]
pub enum GoldAnswer {
    /// One or more acceptable integer values (some word problems ask for
    /// several quantities at once).
    IntegerSet(BTreeSet<BigInt>),
    /// Choice letter, uppercase.
    Choice(char),
    Text(String),
    Bool(bool),
    /// Any of these plans is accepted verbatim.
    PlanSet(Vec<Plan>),
}

/// Executed answer of a single chain, or the reason there is none.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AnswerValue {
    Number(BigRational),
    NumberSet(BTreeSet<BigRational>),
    Bool(bool),
    Str(String),
    Plan(Plan),
    /// Produced only by pipeline failures. Never a voting candidate.
    Null(FailureReason),
}

impl AnswerValue {
    pub fn is_null(&self) -> bool {
        matches!(self, AnswerValue::Null(_))
    }
}

/// Why a sample produced no answer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FailureReason {
    pub stage: FailureStage,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    /// The LM call itself failed (transport, provider error, cache miss).
    Provider,
    Parse,
    Constraint,
    Execution,
    Timeout,
}

impl FailureReason {
    pub fn new(stage: FailureStage, detail: impl Into<String>) -> Self {
        FailureReason { stage, detail: detail.into() }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stage = match self.stage {
            FailureStage::Provider => "provider",
            FailureStage::Parse => "parse",
            FailureStage::Constraint => "constraint",
            FailureStage::Execution => "execution",
            FailureStage::Timeout => "timeout",
        };
        write!(f, "{stage}: {}", self.detail)
    }
}

/// An action plan: the executable answer format of planning tasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Plan {
    pub actions: Vec<PlanAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlanAction {
    /// Move the robot to the named object or location.
    Find(String),
    Pick(String),
    Put(String),
    Done,
}

impl fmt::Display for PlanAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanAction::Find(x) => write!(f, "find({x})"),
            PlanAction::Pick(x) => write!(f, "pick({x})"),
            PlanAction::Put(x) => write!(f, "put({x})"),
            PlanAction::Done => write!(f, "done()"),
        }
    }
}

impl Plan {
    /// Canonical one-line rendering: numbered actions separated by single
    /// spaces, e.g. `1.find(redbull) 2.pick(redbull) 3.find(user) 4.put(redbull) 5.done()`.
    pub fn render(&self) -> String {
        self.actions
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{}.{}", i + 1, a))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parses the canonical rendering. Step numbers are checked for order,
    /// a trailing period is tolerated.
    pub fn parse(s: &str) -> Result<Plan, RecordError> {
        let mut actions = Vec::new();
        let body = s.trim().trim_end_matches('.');
        if body.is_empty() {
            return Err(RecordError::new("empty plan"));
        }
        for (i, piece) in body.split_whitespace().enumerate() {
            let (num, rest) = piece
                .split_once('.')
                .ok_or_else(|| RecordError::new(format!("plan step missing number: {piece:?}")))?;
            let idx: usize = num
                .parse()
                .map_err(|_| RecordError::new(format!("bad plan step number: {num:?}")))?;
            if idx != i + 1 {
                return Err(RecordError::new(format!(
                    "plan steps out of order: expected {}, got {idx}",
                    i + 1
                )));
            }
            actions.push(parse_action(rest)?);
        }
        Ok(Plan { actions })
    }
}

fn parse_action(s: &str) -> Result<PlanAction, RecordError> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| RecordError::new(format!("malformed action: {s:?}")))?;
    if !s.ends_with(')') {
        return Err(RecordError::new(format!("malformed action: {s:?}")));
    }
    let name = &s[..open];
    let arg = &s[open + 1..s.len() - 1];
    match (name, arg.is_empty()) {
        ("find", false) => Ok(PlanAction::Find(arg.to_string())),
        ("pick", false) => Ok(PlanAction::Pick(arg.to_string())),
        ("put", false) => Ok(PlanAction::Put(arg.to_string())),
        ("done", true) => Ok(PlanAction::Done),
        _ => Err(RecordError::new(format!("unknown action: {s:?}"))),
    }
}

/// Sampling parameters for one translation call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub n: u32,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

/// A completion ends at two consecutive blank lines.
pub const DEFAULT_STOP: &str = "\n\n\n";

impl DecodingParams {
    /// Single deterministic sample.
    pub fn greedy() -> Self {
        DecodingParams { temperature: 0.0, n: 1, max_tokens: 1000, stop: vec![DEFAULT_STOP.to_string()] }
    }

    /// Forty diverse samples for majority voting.
    pub fn self_consistency() -> Self {
        DecodingParams { temperature: 0.4, n: 40, max_tokens: 1000, stop: vec![DEFAULT_STOP.to_string()] }
    }
}

/// Cooperative execution budget, checked inside every potentially long solver
/// loop (fixpoint iteration, plan search, root isolation).
#[derive(Debug, Clone, Copy, Default)]
pub struct ExecLimits {
    pub deadline: Option<std::time::Instant>,
}

impl ExecLimits {
    pub fn none() -> Self {
        ExecLimits { deadline: None }
    }

    pub fn with_timeout(budget: std::time::Duration) -> Self {
        ExecLimits { deadline: Some(std::time::Instant::now() + budget) }
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|t| std::time::Instant::now() >= t)
    }
}

/// Error converting between answers and their record text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("record: {0}")]
pub struct RecordError(pub String);

impl RecordError {
    pub fn new(msg: impl Into<String>) -> Self {
        RecordError(msg.into())
    }
}

/// Renders an answer as the canonical record text written to answer files.
///
/// Numbers print as integers when integral, as exact decimals when the
/// denominator divides a power of ten, and as `p/q` otherwise. Number sets
/// print ascending inside braces. Null prints as the literal `null`.
pub fn answer_to_record(a: &AnswerValue) -> String {
    match a {
        AnswerValue::Number(n) => rational_to_record(n),
        AnswerValue::NumberSet(s) => {
            let parts: Vec<String> = s.iter().map(rational_to_record).collect();
            format!("{{{}}}", parts.join(", "))
        }
        AnswerValue::Bool(b) => b.to_string(),
        AnswerValue::Str(s) => s.clone(),
        AnswerValue::Plan(p) => p.render(),
        AnswerValue::Null(_) => "null".to_string(),
    }
}

/// Parses record text into the answer shape of the given task.
pub fn record_to_answer(s: &str, task: TaskKind) -> Result<AnswerValue, RecordError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(RecordError::new("empty record"));
    }
    match task {
        TaskKind::MathWordProblem => {
            if let Some(body) = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                let mut set = BTreeSet::new();
                for part in body.split(',') {
                    set.insert(parse_rational_record(part.trim())?);
                }
                if set.is_empty() {
                    return Err(RecordError::new("empty number set"));
                }
                Ok(AnswerValue::NumberSet(set))
            } else {
                Ok(AnswerValue::Number(parse_rational_record(s)?))
            }
        }
        TaskKind::MultipleChoiceMath => {
            let up = s.to_ascii_uppercase();
            if up.len() == 1 && up.chars().all(|c| c.is_ascii_uppercase()) {
                Ok(AnswerValue::Str(up))
            } else {
                Err(RecordError::new(format!("not a choice letter: {s:?}")))
            }
        }
        TaskKind::DateUnderstanding | TaskKind::RelationalInference => {
            Ok(AnswerValue::Str(s.to_string()))
        }
        TaskKind::SportsUnderstanding | TaskKind::StrategyQa => match s.to_ascii_lowercase().as_str() {
            "0" | "false" | "no" => Ok(AnswerValue::Bool(false)),
            "1" | "true" | "yes" => Ok(AnswerValue::Bool(true)),
            other => Err(RecordError::new(format!("not a boolean record: {other:?}"))),
        },
        TaskKind::Planning => Ok(AnswerValue::Plan(Plan::parse(s)?)),
    }
}

/// Canonical text for an exact rational.
pub fn rational_to_record(r: &BigRational) -> String {
    if r.denom().is_one() {
        return r.numer().to_string();
    }
    match decimal_expansion(r) {
        Some(d) => d,
        None => format!("{}/{}", r.numer(), r.denom()),
    }
}

/// Exact decimal form when the reduced denominator is 2^a * 5^b, else None.
fn decimal_expansion(r: &BigRational) -> Option<String> {
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut d = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return None;
    }
    // Scale to denominator 10^k with k = max(twos, fives).
    let k = twos.max(fives);
    let mut numer = r.numer().clone();
    for _ in twos..k {
        numer *= &two;
    }
    for _ in fives..k {
        numer *= &five;
    }
    let neg = numer.sign() == Sign::Minus;
    let digits = numer.magnitude().to_string();
    let k = k as usize;
    let (int_part, frac_part) = if digits.len() > k {
        (digits[..digits.len() - k].to_string(), digits[digits.len() - k..].to_string())
    } else {
        ("0".to_string(), format!("{digits:0>k$}"))
    };
    let frac_part = frac_part.trim_end_matches('0');
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&int_part);
    if !frac_part.is_empty() {
        out.push('.');
        out.push_str(frac_part);
    }
    Some(out)
}

/// Parses an integer, exact decimal, or `p/q` fraction.
pub fn parse_rational_record(s: &str) -> Result<BigRational, RecordError> {
    parse_exact_number(s).ok_or_else(|| RecordError::new(format!("not a number: {s:?}")))
}

/// Exact-number parser shared by record files, program literals, and fact
/// arguments. Accepts `-12`, `3.50`, `.5`, `5.`, and `p/q`.
pub fn parse_exact_number(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).ok()?;
        let q = BigInt::from_str(q.trim()).ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => match s.strip_prefix('+') {
            Some(rest) => (1, rest),
            None => (1, s),
        },
    };
    if body.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = if digits.is_empty() { "0".to_string() } else { digits };
    let numer = BigInt::from_str(&digits).ok()?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(BigRational::new(BigInt::from(sign) * numer, denom))
}

/// Convenience constructor for integral rationals.
pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// JSON form of a gold answer as stored in dataset files and eval records.
///
/// Scalar golds render as record-text strings. Plan sets render as arrays of
/// plan strings so alternative references stay distinguishable.
pub fn gold_to_json(g: &GoldAnswer) -> serde_json::Value {
    use serde_json::Value;
    match g {
        GoldAnswer::IntegerSet(s) => {
            if s.len() == 1 {
                Value::String(s.iter().next().unwrap().to_string())
            } else {
                let parts: Vec<String> = s.iter().map(|n| n.to_string()).collect();
                Value::String(format!("{{{}}}", parts.join(", ")))
            }
        }
        GoldAnswer::Choice(c) => Value::String(c.to_string()),
        GoldAnswer::Text(t) => Value::String(t.clone()),
        GoldAnswer::Bool(b) => Value::String(b.to_string()),
        GoldAnswer::PlanSet(ps) => {
            Value::Array(ps.iter().map(|p| Value::String(p.render())).collect())
        }
    }
}

/// Parses the `gold` field of a dataset line or eval record for a task.
///
/// Accepts JSON integers, record-text strings (including `{a, b}` sets),
/// JSON booleans for boolean tasks, arrays of integers for set answers, and
/// arrays of plan strings for planning.
pub fn gold_from_json(v: &serde_json::Value, task: TaskKind) -> Result<GoldAnswer, RecordError> {
    use serde_json::Value;
    match task {
        TaskKind::MathWordProblem => match v {
            Value::Array(items) => {
                let mut set = BTreeSet::new();
                for item in items {
                    set.insert(json_integer(item)?);
                }
                if set.is_empty() {
                    return Err(RecordError::new("empty gold set"));
                }
                Ok(GoldAnswer::IntegerSet(set))
            }
            Value::String(s) if s.trim_start().starts_with('{') => {
                let body = s
                    .trim()
                    .strip_prefix('{')
                    .and_then(|r| r.strip_suffix('}'))
                    .ok_or_else(|| RecordError::new(format!("unclosed gold set: {s:?}")))?;
                let mut set = BTreeSet::new();
                for part in body.split(',') {
                    set.insert(parse_gold_integer(part)?);
                }
                if set.is_empty() {
                    return Err(RecordError::new("empty gold set"));
                }
                Ok(GoldAnswer::IntegerSet(set))
            }
            other => Ok(GoldAnswer::IntegerSet([json_integer(other)?].into_iter().collect())),
        },
        TaskKind::MultipleChoiceMath => {
            let s = json_str(v)?;
            let t = s.trim();
            let mut chars = t.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => {
                    Ok(GoldAnswer::Choice(c.to_ascii_uppercase()))
                }
                _ => Err(RecordError::new(format!("not a choice letter: {t:?}"))),
            }
        }
        TaskKind::DateUnderstanding | TaskKind::RelationalInference => {
            Ok(GoldAnswer::Text(json_str(v)?.trim().to_string()))
        }
        TaskKind::SportsUnderstanding | TaskKind::StrategyQa => match v {
            Value::Bool(b) => Ok(GoldAnswer::Bool(*b)),
            Value::String(s) => match record_to_answer(s, task)? {
                AnswerValue::Bool(b) => Ok(GoldAnswer::Bool(b)),
                _ => unreachable!("boolean task records parse to Bool"),
            },
            other => Err(RecordError::new(format!("not a boolean gold: {other}"))),
        },
        TaskKind::Planning => match v {
            Value::String(s) => Ok(GoldAnswer::PlanSet(vec![Plan::parse(s)?])),
            Value::Array(items) => {
                let mut plans = Vec::new();
                for item in items {
                    plans.push(Plan::parse(json_str(item)?)?);
                }
                if plans.is_empty() {
                    return Err(RecordError::new("empty gold plan set"));
                }
                Ok(GoldAnswer::PlanSet(plans))
            }
            other => Err(RecordError::new(format!("not a plan gold: {other}"))),
        },
    }
}

fn json_str(v: &serde_json::Value) -> Result<&str, RecordError> {
    v.as_str().ok_or_else(|| RecordError::new(format!("expected a JSON string, got {v}")))
}

fn json_integer(v: &serde_json::Value) -> Result<BigInt, RecordError> {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigInt::from(i))
            } else {
                Err(RecordError::new(format!("gold value is not an integer: {n}")))
            }
        }
        serde_json::Value::String(s) => parse_gold_integer(s),
        other => Err(RecordError::new(format!("gold value is not an integer: {other}"))),
    }
}

fn parse_gold_integer(s: &str) -> Result<BigInt, RecordError> {
    let r = parse_rational_record(s.trim())?;
    if r.denom().is_one() {
        Ok(r.numer().clone())
    } else {
        Err(RecordError::new(format!("gold value is not an integer: {s:?}")))
    }
}

/// Parses one dataset line: `{"id", "task", "question", "options"?, "gold"?, "hops"?}`.
pub fn query_from_json_line(line: &str) -> Result<Query, RecordError> {
    use serde_json::Value;
    let v: Value =
        serde_json::from_str(line).map_err(|e| RecordError::new(format!("bad JSON: {e}")))?;
    let obj =
        v.as_object().ok_or_else(|| RecordError::new("dataset line is not a JSON object"))?;
    let field = |name: &str| {
        obj.get(name)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| RecordError::new(format!("missing or non-string field {name:?}")))
    };
    let id = field("id")?;
    let task_name = field("task")?;
    let task = TaskKind::parse_name(&task_name)
        .ok_or_else(|| RecordError::new(format!("unknown task: {task_name:?}")))?;
    let question = field("question")?;
    let options = match obj.get("options") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let mut opts = Vec::new();
            for item in items {
                opts.push(json_str(item)?.to_string());
            }
            Some(opts)
        }
        Some(other) => {
            return Err(RecordError::new(format!("options must be an array, got {other}")))
        }
    };
    let gold = match obj.get("gold") {
        None | Some(Value::Null) => None,
        Some(v) => Some(gold_from_json(v, task)?),
    };
    let hops = match obj.get("hops") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| RecordError::new(format!("hops must be an integer, got {v}")))?
                as u32,
        ),
    };
    Ok(Query { id, task, question, options, gold, hops })
}

/// Parses a whole JSONL dataset. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn queries_from_jsonl(text: &str) -> Result<Vec<Query>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            query_from_json_line(line)
                .map_err(|e| RecordError::new(format!("line {}: {}", i + 1, e)))?,
        );
    }
    Ok(out)
}

//! Answer normalization, exact-match rules, and accuracy aggregation.
//!
//! Every task family scores with exactly one [`MatchRule`]. Normalization is
//! applied before voting and before matching so that equivalent raw answers
//! (6 and 6.0, "Yes" and true) pool together and score identically.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    answer_to_record, gold_from_json, gold_to_json, parse_exact_number, record_to_answer,
    AnswerValue, FailureReason, FailureStage, GoldAnswer, Plan, Query, TaskKind,
};
use crate::straightline::round_half_away;

/// How a normalized prediction is compared against the gold answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// Single integer equality after rounding the prediction.
    NearestInteger,
    /// Set-of-integers equality after rounding every member.
    NearestIntegerSet,
    /// Boolean equality after coercing both sides.
    BooleanEval,
    /// Trimmed string equality, case preserved.
    StringExact,
    /// The predicted plan must appear in the gold plan set.
    PlanSetMembership,
    /// Choice letter equality after nearest-option conversion.
    ClosestOption,
}

impl MatchRule {
    /// The scoring rule of each task family.
    ///
    /// Word problems use the set rule so multi-value items share one code
    /// path; a singleton gold under `NearestIntegerSet` behaves exactly like
    /// `NearestInteger`.
    pub fn for_task(task: TaskKind) -> MatchRule {
        match task {
            TaskKind::MathWordProblem => MatchRule::NearestIntegerSet,
            TaskKind::MultipleChoiceMath => MatchRule::ClosestOption,
            TaskKind::DateUnderstanding | TaskKind::RelationalInference => MatchRule::StringExact,
            TaskKind::SportsUnderstanding | TaskKind::StrategyQa => MatchRule::BooleanEval,
            TaskKind::Planning => MatchRule::PlanSetMembership,
        }
    }
}

/// A raw answer that cannot be coerced into the task's answer shape.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct NormalizeError(pub String);

/// Rounds to the nearest integer, halves away from zero.
fn round0(x: &BigRational) -> BigInt {
    round_half_away(x, 0).to_integer()
}

/// The closed boolean coercion vocabulary: numbers map by zero test, strings
/// by the same word list the record format accepts. Anything else is None.
fn coerce_bool(v: &AnswerValue) -> Option<bool> {
    match v {
        AnswerValue::Bool(b) => Some(*b),
        AnswerValue::Number(n) => Some(!n.is_zero()),
        AnswerValue::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
            "0" | "false" | "no" => Some(false),
            "1" | "true" | "yes" => Some(true),
            _ => None,
        },
        _ => None,
    }
}

fn uncoercible(v: &AnswerValue, wanted: &str) -> NormalizeError {
    NormalizeError(format!("cannot normalize {:?} into {wanted}", answer_to_record(v)))
}

/// Brings a raw executed answer into the task's canonical shape.
///
/// Word-problem numbers round half away from zero to integers. Boolean tasks
/// coerce through [`coerce_bool`]'s closed vocabulary. Plans parse from text
/// into structural form. Strings trim. Multiple-choice answers stay numeric
/// here; the option conversion needs the query's option list and happens in
/// [`score`].
pub fn normalize_answer(raw: &AnswerValue, task: TaskKind) -> Result<AnswerValue, NormalizeError> {
    if let AnswerValue::Null(reason) = raw {
        return Err(NormalizeError(format!("null answer: {reason}")));
    }
    match MatchRule::for_task(task) {
        MatchRule::NearestInteger | MatchRule::NearestIntegerSet => match raw {
            AnswerValue::Number(n) => {
                Ok(AnswerValue::Number(BigRational::from_integer(round0(n))))
            }
            AnswerValue::NumberSet(s) => Ok(AnswerValue::NumberSet(
                s.iter().map(|n| BigRational::from_integer(round0(n))).collect(),
            )),
            other => Err(uncoercible(other, "a number")),
        },
        MatchRule::ClosestOption => match raw {
            AnswerValue::Number(n) => Ok(AnswerValue::Number(n.clone())),
            AnswerValue::Str(s) => {
                let t = s.trim();
                let mut chars = t.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii_alphabetic() => {
                        Ok(AnswerValue::Str(c.to_ascii_uppercase().to_string()))
                    }
                    _ => match parse_exact_number(t) {
                        Some(n) => Ok(AnswerValue::Number(n)),
                        None => Err(uncoercible(raw, "a number or choice letter")),
                    },
                }
            }
            other => Err(uncoercible(other, "a number or choice letter")),
        },
        MatchRule::BooleanEval => {
            coerce_bool(raw).map(AnswerValue::Bool).ok_or_else(|| uncoercible(raw, "a boolean"))
        }
        MatchRule::StringExact => match raw {
            AnswerValue::Str(s) => Ok(AnswerValue::Str(s.trim().to_string())),
            other => Err(uncoercible(other, "text")),
        },
        MatchRule::PlanSetMembership => match raw {
            AnswerValue::Plan(p) => Ok(AnswerValue::Plan(p.clone())),
            AnswerValue::Str(s) => match Plan::parse(s) {
                Ok(p) => Ok(AnswerValue::Plan(p)),
                Err(e) => Err(NormalizeError(format!("not a plan: {e}"))),
            },
            other => Err(uncoercible(other, "a plan")),
        },
    }
}

/// Compares a normalized prediction against the gold answer under a rule.
///
/// Null predictions and shape mismatches are false, never errors.
pub fn exact_match(pred: &AnswerValue, gold: &GoldAnswer, rule: MatchRule) -> bool {
    if pred.is_null() {
        return false;
    }
    match rule {
        MatchRule::NearestInteger => match (pred, gold) {
            (AnswerValue::Number(n), GoldAnswer::IntegerSet(g)) if g.len() == 1 => {
                round0(n) == *g.iter().next().unwrap()
            }
            _ => false,
        },
        MatchRule::NearestIntegerSet => {
            let rounded: BTreeSet<BigInt> = match pred {
                AnswerValue::Number(n) => [round0(n)].into_iter().collect(),
                AnswerValue::NumberSet(s) => s.iter().map(round0).collect(),
                _ => return false,
            };
            matches!(gold, GoldAnswer::IntegerSet(g) if *g == rounded)
        }
        MatchRule::BooleanEval => {
            let g = match gold {
                GoldAnswer::Bool(b) => Some(*b),
                GoldAnswer::Text(t) => coerce_bool(&AnswerValue::Str(t.clone())),
                _ => None,
            };
            match (coerce_bool(pred), g) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            }
        }
        MatchRule::StringExact => match (pred, gold) {
            (AnswerValue::Str(s), GoldAnswer::Text(t)) => s.trim() == t.trim(),
            _ => false,
        },
        MatchRule::PlanSetMembership => match (pred, gold) {
            (AnswerValue::Plan(p), GoldAnswer::PlanSet(set)) => set.contains(p),
            _ => false,
        },
        MatchRule::ClosestOption => match (pred, gold) {
            (AnswerValue::Str(s), GoldAnswer::Choice(c)) => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(p), None) => p.eq_ignore_ascii_case(c),
                    _ => false,
                }
            }
            _ => false,
        },
    }
}

/// No option could be converted to a comparison value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct OptionError(pub String);

/// Picks the choice whose first numeric token is nearest to `x`.
///
/// Labels come from a leading `A)` / `A.` / `A:` marker when present and from
/// the option's position otherwise. Options without any numeric token are
/// skipped; ties go to the lower index.
pub fn closest_option(x: &BigRational, options: &[String]) -> Result<char, OptionError> {
    if options.is_empty() {
        return Err(OptionError("empty option list".to_string()));
    }
    let mut best: Option<(BigRational, char)> = None;
    for (i, opt) in options.iter().enumerate() {
        let Some(v) = first_numeric_token(opt) else { continue };
        let dist = (x - v).abs();
        let better = match &best {
            None => true,
            Some((d, _)) => dist < *d,
        };
        if better {
            best = Some((dist, option_label(opt, i)));
        }
    }
    match best {
        Some((_, label)) => Ok(label),
        None => Err(OptionError("no numeric token in any option".to_string())),
    }
}

/// Label letter of one option: its leading `X)` / `X.` / `X:` marker, else
/// the letter at its position (A for index 0, B for 1, ...).
fn option_label(opt: &str, index: usize) -> char {
    let mut chars = opt.trim_start().chars();
    if let (Some(c), Some(sep)) = (chars.next(), chars.next()) {
        if c.is_ascii_alphabetic() && matches!(sep, ')' | '.' | ':') {
            return c.to_ascii_uppercase();
        }
    }
    (b'A' + (index % 26) as u8) as char
}

/// First integer or decimal token in the text.
///
/// A sign or decimal point only starts a token when it directly precedes a
/// digit and does not continue a word (so `Rs.500` reads 500, not 0.5).
/// Commas flanked by digits read as thousands separators, so `1,000` is one
/// token.
fn first_numeric_token(text: &str) -> Option<BigRational> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let after_word = i > 0 && chars[i - 1].is_ascii_alphanumeric();
        let starts = c.is_ascii_digit()
            || ((c == '-' || c == '.')
                && !after_word
                && chars.get(i + 1).is_some_and(char::is_ascii_digit));
        if !starts {
            i += 1;
            continue;
        }
        let mut tok = String::new();
        let mut j = i;
        if chars[j] == '-' {
            tok.push('-');
            j += 1;
        }
        let mut seen_dot = false;
        while j < chars.len() {
            let c = chars[j];
            if c.is_ascii_digit() {
                tok.push(c);
                j += 1;
            } else if c == '.'
                && !seen_dot
                && chars.get(j + 1).is_some_and(char::is_ascii_digit)
            {
                seen_dot = true;
                tok.push('.');
                j += 1;
            } else if c == ','
                && j > i
                && chars[j - 1].is_ascii_digit()
                && chars.get(j + 1).is_some_and(char::is_ascii_digit)
            {
                j += 1;
            } else {
                break;
            }
        }
        return parse_exact_number(&tok);
    }
    None
}

/// Scored outcome of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub task: TaskKind,
    /// Normalized (and for multiple choice, option-converted) prediction.
    /// Null when the pipeline, normalization, or conversion failed.
    pub pred: AnswerValue,
    pub gold: Option<GoldAnswer>,
    pub correct: bool,
    /// Present exactly when `pred` is Null.
    pub failure: Option<String>,
}

/// Scores one prediction against its query.
///
/// Normalization failures and option-conversion failures downgrade the
/// prediction to Null; Null predictions and queries without a gold answer
/// score incorrect. The record stream therefore stays total: every query in
/// produces exactly one record out.
pub fn score(q: &Query, raw: &AnswerValue) -> EvalRecord {
    let (pred, failure) = match raw {
        AnswerValue::Null(reason) => (raw.clone(), Some(reason.to_string())),
        _ => match normalize_answer(raw, q.task) {
            Ok(v) => convert_choice(q, v),
            Err(e) => fail(FailureStage::Execution, format!("normalize: {e}")),
        },
    };
    let correct = match &q.gold {
        Some(g) if !pred.is_null() => exact_match(&pred, g, MatchRule::for_task(q.task)),
        _ => false,
    };
    EvalRecord { id: q.id.clone(), task: q.task, pred, gold: q.gold.clone(), correct, failure }
}

/// Multiple-choice answers that are still numeric become the nearest option's
/// letter. Other tasks and already-lettered answers pass through.
fn convert_choice(q: &Query, v: AnswerValue) -> (AnswerValue, Option<String>) {
    if q.task != TaskKind::MultipleChoiceMath {
        return (v, None);
    }
    let AnswerValue::Number(n) = &v else { return (v, None) };
    match q.options.as_deref() {
        Some(opts) => match closest_option(n, opts) {
            Ok(c) => (AnswerValue::Str(c.to_string()), None),
            Err(e) => fail(FailureStage::Execution, format!("option conversion: {e}")),
        },
        None => fail(FailureStage::Execution, "option conversion: query has no option list"),
    }
}

fn fail(stage: FailureStage, detail: impl Into<String>) -> (AnswerValue, Option<String>) {
    let reason = FailureReason::new(stage, detail);
    let text = reason.to_string();
    (AnswerValue::Null(reason), Some(text))
}

/// Wire form of one record line. Field order here is the emitted key order.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    task: TaskKind,
    pred: String,
    gold: serde_json::Value,
    correct: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    failure: Option<String>,
}

/// A record line that does not parse back into an [`EvalRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct RecordLineError(pub String);

impl EvalRecord {
    /// One JSONL line: `{"id", "task", "pred", "gold", "correct", "failure"?}`.
    pub fn to_json_line(&self) -> String {
        let line = RecordLine {
            id: self.id.clone(),
            task: self.task,
            pred: answer_to_record(&self.pred),
            gold: match &self.gold {
                Some(g) => gold_to_json(g),
                None => serde_json::Value::Null,
            },
            correct: self.correct,
            failure: self.failure.clone(),
        };
        serde_json::to_string(&line).expect("record lines serialize")
    }

    pub fn from_json_line(line: &str) -> Result<EvalRecord, RecordLineError> {
        let raw: RecordLine = serde_json::from_str(line)
            .map_err(|e| RecordLineError(format!("bad record line: {e}")))?;
        let pred = if raw.pred == "null" {
            let detail = raw.failure.clone().unwrap_or_else(|| "unspecified".to_string());
            AnswerValue::Null(FailureReason::new(FailureStage::Execution, detail))
        } else {
            record_to_answer(&raw.pred, raw.task)
                .map_err(|e| RecordLineError(format!("bad pred field: {e}")))?
        };
        let gold = match &raw.gold {
            serde_json::Value::Null => None,
            v => Some(
                gold_from_json(v, raw.task)
                    .map_err(|e| RecordLineError(format!("bad gold field: {e}")))?,
            ),
        };
        Ok(EvalRecord {
            id: raw.id,
            task: raw.task,
            pred,
            gold,
            correct: raw.correct,
            failure: raw.failure,
        })
    }
}

/// Correct and total counts with the percent they reduce to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    /// Percent to one decimal, rounded half away from zero.
    pub percent: f64,
}

impl Accuracy {
    fn of(correct: usize, total: usize) -> Accuracy {
        let percent = if total == 0 {
            0.0
        } else {
            (correct as f64 * 1000.0 / total as f64).round() / 10.0
        };
        Accuracy { correct, total, percent }
    }
}

/// Per-task and overall accuracy over a batch of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Only tasks that appear in the records; empty buckets are omitted.
    pub per_task: BTreeMap<TaskKind, Accuracy>,
    pub overall: Accuracy,
}

/// Folds records into accuracy counts. Null predictions stay in the
/// denominator. Merging is associative, so shards can aggregate separately
/// and sum.
pub fn aggregate(records: &[EvalRecord]) -> Summary {
    let mut per_task: BTreeMap<TaskKind, (usize, usize)> = BTreeMap::new();
    let mut correct = 0usize;
    for r in records {
        let bucket = per_task.entry(r.task).or_insert((0, 0));
        bucket.1 += 1;
        if r.correct {
            bucket.0 += 1;
            correct += 1;
        }
    }
    Summary {
        per_task: per_task.into_iter().map(|(t, (c, n))| (t, Accuracy::of(c, n))).collect(),
        overall: Accuracy::of(correct, records.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rat;

    fn ratio(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    fn int_set(xs: &[i64]) -> GoldAnswer {
        GoldAnswer::IntegerSet(xs.iter().map(|&x| BigInt::from(x)).collect())
    }

    #[test]
    fn rounding_at_half_boundaries() {
        let cases = [
            (ratio(5, 2), 3),
            (ratio(-5, 2), -3),
            (ratio(49, 10), 5),
            (ratio(51, 10), 5),
            (ratio(49, 20), 2),
            (ratio(-49, 20), -2),
        ];
        for (x, want) in cases {
            let got = normalize_answer(&AnswerValue::Number(x.clone()), TaskKind::MathWordProblem)
                .unwrap();
            assert_eq!(got, AnswerValue::Number(rat(want)), "rounding {x}");
            assert!(exact_match(
                &AnswerValue::Number(x),
                &int_set(&[want]),
                MatchRule::NearestInteger
            ));
        }
        assert!(!exact_match(
            &AnswerValue::Number(ratio(5, 2)),
            &int_set(&[2]),
            MatchRule::NearestInteger
        ));
    }

    #[test]
    fn set_matching() {
        let pred =
            AnswerValue::NumberSet([ratio(16, 5), ratio(24, 5)].into_iter().collect());
        assert!(exact_match(&pred, &int_set(&[3, 5]), MatchRule::NearestIntegerSet));
        assert!(!exact_match(&pred, &int_set(&[3]), MatchRule::NearestIntegerSet));
        // A scalar prediction is the singleton set.
        assert!(exact_match(
            &AnswerValue::Number(rat(6)),
            &int_set(&[6]),
            MatchRule::NearestIntegerSet
        ));
        assert!(!exact_match(
            &AnswerValue::Number(rat(6)),
            &int_set(&[3, 6]),
            MatchRule::NearestIntegerSet
        ));
    }

    #[test]
    fn boolean_coercion_vocabulary() {
        let t = TaskKind::SportsUnderstanding;
        assert_eq!(
            normalize_answer(&AnswerValue::Number(rat(0)), t).unwrap(),
            AnswerValue::Bool(false)
        );
        assert_eq!(
            normalize_answer(&AnswerValue::Number(rat(2)), t).unwrap(),
            AnswerValue::Bool(true)
        );
        for (s, want) in [("No", false), ("YES", true), ("true", true), ("0", false)] {
            assert_eq!(
                normalize_answer(&AnswerValue::Str(s.to_string()), t).unwrap(),
                AnswerValue::Bool(want),
                "coercing {s:?}"
            );
        }
        assert!(normalize_answer(&AnswerValue::Str("maybe".to_string()), t).is_err());
        assert!(exact_match(
            &AnswerValue::Bool(false),
            &GoldAnswer::Bool(false),
            MatchRule::BooleanEval
        ));
        assert!(!exact_match(
            &AnswerValue::Bool(false),
            &GoldAnswer::Bool(true),
            MatchRule::BooleanEval
        ));
    }

    #[test]
    fn plans_normalize_from_text_and_match_by_membership() {
        let text = "1.find(redbull) 2.pick(redbull) 3.find(user) 4.put(redbull) 5.done()";
        let plan = Plan::parse(text).unwrap();
        let got =
            normalize_answer(&AnswerValue::Str(format!("  {text} ")), TaskKind::Planning).unwrap();
        assert_eq!(got, AnswerValue::Plan(plan.clone()));
        let other = Plan::parse("1.find(user) 2.done()").unwrap();
        let gold = GoldAnswer::PlanSet(vec![other.clone(), plan.clone()]);
        assert!(exact_match(&AnswerValue::Plan(plan), &gold, MatchRule::PlanSetMembership));
        let missing = GoldAnswer::PlanSet(vec![other]);
        let text_plan = normalize_answer(&AnswerValue::Str(text.to_string()), TaskKind::Planning)
            .unwrap();
        assert!(!exact_match(&text_plan, &missing, MatchRule::PlanSetMembership));
        assert!(normalize_answer(
            &AnswerValue::Str("1.fly(moon)".to_string()),
            TaskKind::Planning
        )
        .is_err());
    }

    #[test]
    fn strings_trim_and_compare_exactly() {
        let got = normalize_answer(
            &AnswerValue::Str(" grandson ".to_string()),
            TaskKind::RelationalInference,
        )
        .unwrap();
        assert_eq!(got, AnswerValue::Str("grandson".to_string()));
        assert!(exact_match(
            &got,
            &GoldAnswer::Text("grandson".to_string()),
            MatchRule::StringExact
        ));
        assert!(!exact_match(
            &got,
            &GoldAnswer::Text("Grandson".to_string()),
            MatchRule::StringExact
        ));
    }

    #[test]
    fn nearest_option_basics() {
        let opts: Vec<String> =
            ["A)1 hour", "B)2 hours", "C)3 hours", "D)4 hours", "E)5 hours"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        assert_eq!(closest_option(&rat(1), &opts).unwrap(), 'A');
        assert_eq!(closest_option(&rat(3), &opts).unwrap(), 'C');
        // Equidistant between A and B resolves to the lower index.
        assert_eq!(closest_option(&ratio(3, 2), &opts).unwrap(), 'A');
        assert_eq!(closest_option(&rat(100), &opts).unwrap(), 'E');
    }

    #[test]
    fn nearest_option_token_extraction() {
        let opts: Vec<String> = ["A)Rs.7500", "B)Rs.1,000", "C)-2.5 degrees", "D)none of these"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(closest_option(&rat(7499), &opts).unwrap(), 'A');
        assert_eq!(closest_option(&rat(1001), &opts).unwrap(), 'B');
        assert_eq!(closest_option(&ratio(-5, 2), &opts).unwrap(), 'C');
        let tokenless = vec!["A)none".to_string(), "B)all".to_string()];
        assert!(closest_option(&rat(1), &tokenless).is_err());
        assert!(closest_option(&rat(1), &[]).is_err());
        // Unlabeled options fall back to positional letters.
        let bare = vec!["10 km".to_string(), "20 km".to_string()];
        assert_eq!(closest_option(&rat(19), &bare).unwrap(), 'B');
    }

    #[test]
    fn score_converts_choice_answers() {
        let q = Query {
            id: "aqua-1".to_string(),
            task: TaskKind::MultipleChoiceMath,
            question: "How long?".to_string(),
            options: Some(
                ["A)1 hour", "B)2 hours", "C)3 hours"].iter().map(|s| s.to_string()).collect(),
            ),
            gold: Some(GoldAnswer::Choice('A')),
            hops: None,
        };
        let rec = score(&q, &AnswerValue::Number(rat(1)));
        assert_eq!(rec.pred, AnswerValue::Str("A".to_string()));
        assert!(rec.correct);
        assert_eq!(rec.failure, None);

        let mut no_opts = q.clone();
        no_opts.options = None;
        let rec = score(&no_opts, &AnswerValue::Number(rat(1)));
        assert!(rec.pred.is_null());
        assert!(!rec.correct);
        assert!(rec.failure.as_deref().unwrap().contains("option conversion"));
    }

    #[test]
    fn score_downgrades_failures_to_incorrect_records() {
        let q = Query {
            id: "s-1".to_string(),
            task: TaskKind::SportsUnderstanding,
            question: "Plausible?".to_string(),
            options: None,
            gold: Some(GoldAnswer::Bool(false)),
            hops: None,
        };
        let null = AnswerValue::Null(FailureReason::new(FailureStage::Parse, "bad chain"));
        let rec = score(&q, &null);
        assert!(!rec.correct);
        assert_eq!(rec.failure.as_deref(), Some("parse: bad chain"));

        let rec = score(&q, &AnswerValue::Str("maybe".to_string()));
        assert!(rec.pred.is_null());
        assert!(rec.failure.as_deref().unwrap().starts_with("execution: normalize"));

        let rec = score(&q, &AnswerValue::Number(rat(0)));
        assert!(rec.correct);
        assert_eq!(rec.failure, None);
    }

    #[test]
    fn record_lines_round_trip() {
        let rec = EvalRecord {
            id: "q7".to_string(),
            task: TaskKind::MathWordProblem,
            pred: AnswerValue::Number(rat(6)),
            gold: Some(int_set(&[6])),
            correct: true,
            failure: None,
        };
        let line = rec.to_json_line();
        assert!(line.starts_with(r#"{"id":"q7","task":"math_word_problem","pred":"6""#), "{line}");
        assert!(!line.contains("failure"));
        assert_eq!(EvalRecord::from_json_line(&line).unwrap(), rec);

        let failed = EvalRecord {
            id: "q8".to_string(),
            task: TaskKind::StrategyQa,
            pred: AnswerValue::Null(FailureReason::new(FailureStage::Execution, "boom")),
            gold: Some(GoldAnswer::Bool(true)),
            correct: false,
            failure: Some("execution: boom".to_string()),
        };
        let line = failed.to_json_line();
        assert!(line.contains(r#""pred":"null""#), "{line}");
        assert!(line.contains(r#""failure":"execution: boom""#), "{line}");
        let back = EvalRecord::from_json_line(&line).unwrap();
        assert!(back.pred.is_null());
        assert_eq!(back.failure, failed.failure);
    }

    #[test]
    fn aggregate_accuracy() {
        let rec = |task, correct| EvalRecord {
            id: "x".to_string(),
            task,
            pred: AnswerValue::Bool(true),
            gold: Some(GoldAnswer::Bool(true)),
            correct,
            failure: None,
        };
        let records = vec![
            rec(TaskKind::StrategyQa, true),
            rec(TaskKind::StrategyQa, false),
            rec(TaskKind::StrategyQa, false),
            rec(TaskKind::SportsUnderstanding, true),
        ];
        let summary = aggregate(&records);
        assert_eq!(summary.overall.correct, 2);
        assert_eq!(summary.overall.total, 4);
        assert_eq!(summary.overall.percent, 50.0);
        assert_eq!(summary.per_task[&TaskKind::StrategyQa].percent, 33.3);
        assert_eq!(summary.per_task[&TaskKind::SportsUnderstanding].percent, 100.0);
        assert!(!summary.per_task.contains_key(&TaskKind::Planning));
        assert_eq!(aggregate(&[]).overall.percent, 0.0);
    }

    #[test]
    fn every_task_has_one_rule() {
        for t in TaskKind::ALL {
            let _ = MatchRule::for_task(t);
        }
        assert_eq!(MatchRule::for_task(TaskKind::MathWordProblem), MatchRule::NearestIntegerSet);
        assert_eq!(MatchRule::for_task(TaskKind::MultipleChoiceMath), MatchRule::ClosestOption);
        assert_eq!(MatchRule::for_task(TaskKind::Planning), MatchRule::PlanSetMembership);
    }
}

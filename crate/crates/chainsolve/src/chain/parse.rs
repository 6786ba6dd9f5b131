//! Chain text to [`ReasoningChain`], one entry point for every dialect.
//!
//! The straight-line and relation layouts interleave `#` annotation
//! lines with statements. The Datalog layout answers subquestions in
//! prose first, restates them as facts, and derives the answer in a
//! marked final block; parsing folds the three blocks into one step
//! list. The plan layout is a query line followed by a goal form.
//!
//! A generation cut off by the token limit or a stop sequence is
//! salvaged when the damage is confined to the last line, at least one
//! complete step remains, and the chain still contains its answer
//! construct. Anything malformed earlier is an error carrying the
//! offending line number.

use super::{
    ChainFormError, Dependency, RawChain, ReasoningChain, Step, DATALOG_DERIVE, DATALOG_REPRESENT,
    PLAN_GOAL_MARKER, PLAN_QUERY_PREFIX,
};
use crate::model::ProgramDialect;
use crate::model::TaskKind;
use crate::relation::{parse_relation_statement, RelationStatement};
use crate::straightline;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedChain {
    pub chain: ReasoningChain,
    /// Salvage notes; empty for a clean parse.
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ChainParseError {
    #[error("chain text is empty")]
    Empty,
    #[error("line {line}: {reason}")]
    Header { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    Statement { line: usize, reason: String },
    #[error("generation truncated near line {line}")]
    Truncated { line: usize },
    #[error("chain structure: {0}")]
    Structure(#[from] ChainFormError),
}

pub fn parse_chain(raw: &RawChain) -> Result<ParsedChain, ChainParseError> {
    if raw.text.trim().is_empty() {
        return Err(ChainParseError::Empty);
    }
    match raw.task.dialect() {
        ProgramDialect::Straightline | ProgramDialect::Relation => {
            parse_commented(raw.task, &raw.text)
        }
        ProgramDialect::Datalog => parse_datalog_chain(raw.task, &raw.text),
        ProgramDialect::PlanGoal => parse_plangoal(raw.task, &raw.text),
    }
}

/// Nonblank lines with their 1-based positions, ends trimmed.
fn significant_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let t = l.trim();
            (!t.is_empty()).then_some((i + 1, t))
        })
        .collect()
}

fn header_err(line: usize, reason: impl Into<String>) -> ChainParseError {
    ChainParseError::Header {
        line,
        reason: reason.into(),
    }
}

/// Splits `12. rest of the line`. The dot must be followed by
/// whitespace or end the text, so decimals never look like headers.
fn parse_number_prefix(text: &str) -> Option<(usize, &str)> {
    let digits_end = text
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(text.len());
    if digits_end == 0 {
        return None;
    }
    let index: usize = text[..digits_end].parse().ok()?;
    let rest = text[digits_end..].strip_prefix('.')?;
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some((index, rest.trim_start()))
}

/// Separates the subquestion from the trailing dependency clause.
///
/// The clause is the rightmost parenthesized suffix that parses as
/// `independent` or `depends on ...` with an optional support list.
/// Candidates that merely start like a clause (a parenthesis inside a
/// support string, say) fail to parse and are skipped. A line with
/// clause-like candidates none of which parse is an error; a line with
/// no candidates is a bare subquestion.
fn parse_header_clause(
    rest: &str,
    line: usize,
) -> Result<(String, Dependency, Vec<String>), ChainParseError> {
    if rest.ends_with(')') {
        let candidates: Vec<usize> = rest
            .char_indices()
            .filter(|&(i, c)| {
                c == '(' && {
                    let inner = rest[i + 1..rest.len() - 1].trim_start();
                    inner.starts_with("independent") || inner.starts_with("depends on")
                }
            })
            .map(|(i, _)| i)
            .collect();
        let mut leftmost_err = None;
        for &i in candidates.iter().rev() {
            match parse_clause(&rest[i + 1..rest.len() - 1], line) {
                Ok((dependency, support)) => {
                    return Ok((rest[..i].trim_end().to_string(), dependency, support));
                }
                Err(e) => leftmost_err = Some(e),
            }
        }
        if let Some(e) = leftmost_err {
            return Err(e);
        }
    }
    Ok((rest.trim().to_string(), Dependency::Independent, Vec::new()))
}

/// Drops a trailing dependency clause from annotation text, keeping
/// the text as written when no clause parses. Prompt rendering uses
/// this to strip rationales without touching the subquestion.
pub(crate) fn without_header_clause(text: &str) -> String {
    match parse_header_clause(text, 0) {
        Ok((kept, _, _)) => kept,
        Err(_) => text.trim().to_string(),
    }
}

fn parse_clause(
    content: &str,
    line: usize,
) -> Result<(Dependency, Vec<String>), ChainParseError> {
    let content = content.trim();
    let (dependency, rest) = if let Some(r) = content.strip_prefix("independent") {
        (Dependency::Independent, r)
    } else if let Some(r) = content.strip_prefix("depends on") {
        let (deps, r) = parse_dep_list(r, line)?;
        (Dependency::DependsOn(deps), r)
    } else {
        return Err(header_err(line, "expected `independent` or `depends on`"));
    };
    let mut rest = rest.trim_start();
    if let Some(r) = rest.strip_prefix(',') {
        rest = r.trim_start();
    }
    if rest.is_empty() {
        return Ok((dependency, Vec::new()));
    }
    let Some(value) = rest.strip_prefix("support:") else {
        return Err(header_err(line, "unexpected text after the dependency list"));
    };
    let support = parse_support_value(value.trim_start(), line)?;
    Ok((dependency, support))
}

/// Reads step references separated by commas, whitespace, or `and`,
/// returning the text after the last one.
fn parse_dep_list(
    text: &str,
    line: usize,
) -> Result<(std::collections::BTreeSet<usize>, &str), ChainParseError> {
    let mut deps = std::collections::BTreeSet::new();
    let mut i = 0;
    let mut last_end = 0;
    loop {
        loop {
            let rest = &text[i..];
            if let Some(c) = rest.chars().next().filter(|c| c.is_whitespace()) {
                i += c.len_utf8();
            } else if rest.starts_with(',') {
                i += 1;
            } else if rest.starts_with("and")
                && !text[i + 3..]
                    .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
            {
                i += 3;
            } else {
                break;
            }
        }
        let digits: &str = &text[i..][..text[i..]
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(text.len() - i)];
        if digits.is_empty() {
            break;
        }
        let value: usize = digits
            .parse()
            .map_err(|_| header_err(line, "step reference out of range"))?;
        deps.insert(value);
        i += digits.len();
        last_end = i;
    }
    if deps.is_empty() {
        return Err(header_err(line, "empty dependency list"));
    }
    Ok((deps, &text[last_end..]))
}

fn parse_support_value(text: &str, line: usize) -> Result<Vec<String>, ChainParseError> {
    if let Some(body) = text.strip_prefix('[') {
        let mut items = Vec::new();
        let mut rest = body.trim_start();
        if let Some(r) = rest.strip_prefix(']') {
            return if r.trim().is_empty() {
                Ok(items)
            } else {
                Err(header_err(line, "unexpected text after the support list"))
            };
        }
        loop {
            let (item, r) = read_quoted(rest, line)?;
            items.push(item);
            rest = r.trim_start();
            if let Some(r) = rest.strip_prefix(',') {
                rest = r.trim_start();
                continue;
            }
            if let Some(r) = rest.strip_prefix(']') {
                return if r.trim().is_empty() {
                    Ok(items)
                } else {
                    Err(header_err(line, "unexpected text after the support list"))
                };
            }
            return Err(header_err(line, "unterminated support list"));
        }
    }
    if text.starts_with('"') {
        let (item, rest) = read_quoted(text, line)?;
        if !rest.trim().is_empty() {
            return Err(header_err(line, "unexpected text after the support string"));
        }
        return Ok(vec![item]);
    }
    Err(header_err(line, "support must be a quoted string or a list"))
}

/// Reads one `"..."` with backslash escapes, returning the remainder.
fn read_quoted(text: &str, line: usize) -> Result<(String, &str), ChainParseError> {
    let mut chars = text.char_indices();
    if !matches!(chars.next(), Some((_, '"'))) {
        return Err(header_err(line, "expected a quoted string"));
    }
    let mut out = String::new();
    let mut escaped = false;
    for (i, c) in chars {
        if escaped {
            out.push(c);
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '"' {
            return Ok((out, &text[i + 1..]));
        } else {
            out.push(c);
        }
    }
    Err(header_err(line, "unterminated string"))
}

fn validate_statement(dialect: ProgramDialect, line: &str) -> Result<(), String> {
    match dialect {
        ProgramDialect::Straightline => straightline::parse_stmt(line)
            .map(|_| ())
            .map_err(|e| e.to_string()),
        ProgramDialect::Relation => parse_relation_statement(line)
            .map(|_| ())
            .map_err(|e| e.to_string()),
        ProgramDialect::Datalog | ProgramDialect::PlanGoal => Ok(()),
    }
}

struct Failure {
    pos: usize,
    line: usize,
    error: ChainParseError,
    in_statements: bool,
}

/// The `#`-annotated layouts: straight-line programs and relation
/// chains. Lines before the first step header form the preamble;
/// import lines stay there too. A chain with statements but no headers
/// at all folds into a single independent step.
fn parse_commented(task: TaskKind, text: &str) -> Result<ParsedChain, ChainParseError> {
    let dialect = task.dialect();
    let lines = significant_lines(text);
    let mut preamble: Vec<String> = Vec::new();
    let mut loose: Vec<String> = Vec::new();
    let mut loose_start = 0usize;
    let mut steps: Vec<Step> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut failure: Option<Failure> = None;
    let mut last_header_line = 0usize;

    for (pos, &(line_no, line)) in lines.iter().enumerate() {
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim_start();
            if let Some((index, rest)) = parse_number_prefix(comment) {
                last_header_line = line_no;
                if !loose.is_empty() {
                    failure = Some(Failure {
                        pos,
                        line: loose_start,
                        error: ChainParseError::Statement {
                            line: loose_start,
                            reason: "statement before the first step header".into(),
                        },
                        in_statements: false,
                    });
                    break;
                }
                match parse_header_clause(rest, line_no) {
                    Ok((subquestion, dependency, support)) => steps.push(Step {
                        index,
                        subquestion,
                        dependency,
                        support,
                        statements: Vec::new(),
                    }),
                    Err(error) => {
                        failure = Some(Failure {
                            pos,
                            line: line_no,
                            error,
                            in_statements: false,
                        });
                        break;
                    }
                }
            } else if steps.is_empty() {
                preamble.push(line.to_string());
            } else {
                failure = Some(Failure {
                    pos,
                    line: line_no,
                    error: header_err(line_no, "expected a numbered step header"),
                    in_statements: false,
                });
                break;
            }
        } else if steps.is_empty() && (line.starts_with("from ") || line.starts_with("import ")) {
            preamble.push(line.to_string());
        } else {
            match validate_statement(dialect, line) {
                Ok(()) => match steps.last_mut() {
                    Some(step) => step.statements.push(line.to_string()),
                    None => {
                        if loose.is_empty() {
                            loose_start = line_no;
                        }
                        loose.push(line.to_string());
                    }
                },
                Err(reason) => {
                    failure = Some(Failure {
                        pos,
                        line: line_no,
                        error: ChainParseError::Statement {
                            line: line_no,
                            reason,
                        },
                        in_statements: !steps.is_empty(),
                    });
                    break;
                }
            }
        }
    }

    if let Some(fail) = failure {
        if fail.pos + 1 != lines.len() {
            return Err(fail.error);
        }
        let mut kept = steps;
        if fail.in_statements {
            kept.pop();
        }
        let candidate = if kept.is_empty() && !loose.is_empty() {
            vec![loose_step(loose)]
        } else {
            kept
        };
        let has_answer_construct = dialect != ProgramDialect::Relation
            || candidate.iter().flat_map(|s| &s.statements).any(|l| {
                matches!(
                    parse_relation_statement(l),
                    Ok(RelationStatement::Compose { .. })
                )
            });
        return match ReasoningChain::assemble(task, preamble, candidate) {
            Ok(chain) if has_answer_construct => {
                warnings.push(format!("dropped truncated content at line {}", fail.line));
                Ok(ParsedChain { chain, warnings })
            }
            _ => Err(ChainParseError::Truncated { line: fail.line }),
        };
    }

    if steps.is_empty() && !loose.is_empty() {
        steps.push(loose_step(loose));
    } else if !loose.is_empty() {
        return Err(ChainParseError::Statement {
            line: loose_start,
            reason: "statement before the first step header".into(),
        });
    }
    // A header with no statements under it at the very end is a
    // cutoff right after the annotation line.
    if steps.last().is_some_and(|s| s.statements.is_empty()) {
        steps.pop();
        if steps.is_empty() {
            return Err(ChainParseError::Truncated {
                line: last_header_line,
            });
        }
        warnings.push(format!(
            "dropped truncated content at line {last_header_line}"
        ));
    }
    let chain = ReasoningChain::assemble(task, preamble, steps)?;
    Ok(ParsedChain { chain, warnings })
}

fn loose_step(statements: Vec<String>) -> Step {
    Step {
        index: 1,
        subquestion: String::new(),
        dependency: Dependency::Independent,
        support: Vec::new(),
        statements,
    }
}

enum Ev<'a> {
    Comment(usize, &'a str),
    Stmt(usize, &'a str),
}

/// The `//`-annotated Datalog layout. Subquestions answered in prose,
/// the same answers restated as numbered fact groups, then a marked
/// final block deriving the answer. Prose and fact groups fold into
/// one step per number; the final block becomes the last step.
fn parse_datalog_chain(task: TaskKind, text: &str) -> Result<ParsedChain, ChainParseError> {
    let lines = significant_lines(text);
    let mut warnings: Vec<String> = Vec::new();
    let events: Vec<Ev> = lines
        .iter()
        .map(|&(n, l)| match l.strip_prefix("//") {
            Some(c) => Ev::Comment(n, c.trim()),
            None => Ev::Stmt(n, l),
        })
        .collect();

    let represent_at = events
        .iter()
        .position(|e| matches!(e, Ev::Comment(_, t) if *t == DATALOG_REPRESENT));
    let derive_at = events
        .iter()
        .position(|e| matches!(e, Ev::Comment(_, t) if t.starts_with(DATALOG_DERIVE)));
    let derive_idx = derive_at.unwrap_or(events.len());
    if let Some(r) = represent_at {
        if r > derive_idx {
            let line = match events[r] {
                Ev::Comment(n, _) | Ev::Stmt(n, _) => n,
            };
            return Err(header_err(line, "misplaced block marker"));
        }
    }
    let (nl_end, prog_start) = match represent_at {
        Some(r) => (r, r + 1),
        None => {
            let stmts_early = events[..derive_idx].iter().any(|e| matches!(e, Ev::Stmt(..)));
            if stmts_early {
                (0, 0)
            } else {
                (derive_idx, derive_idx)
            }
        }
    };

    let mut preamble: Vec<String> = Vec::new();
    let mut nl_sub: std::collections::BTreeMap<usize, String> = Default::default();
    let mut nl_answers: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
    let mut nl_current: Option<usize> = None;
    for ev in &events[..nl_end] {
        match *ev {
            Ev::Comment(_, t) => {
                if let Some((ix, rest)) = parse_number_prefix(t) {
                    nl_sub.insert(ix, rest.to_string());
                    nl_current = Some(ix);
                } else if let Some(ix) = nl_current {
                    nl_answers.entry(ix).or_default().push(t.to_string());
                } else {
                    preamble.push(format!("// {t}"));
                }
            }
            Ev::Stmt(n, _) => {
                return Err(ChainParseError::Statement {
                    line: n,
                    reason: "statement before the Datalog block".into(),
                });
            }
        }
    }

    struct Seg {
        number: usize,
        comment: String,
        stmts: Vec<(usize, String)>,
    }
    let mut segs: Vec<Seg> = Vec::new();
    let mut buffer: Vec<(usize, String)> = Vec::new();
    for ev in &events[prog_start..derive_idx] {
        match *ev {
            Ev::Comment(n, t) => {
                if let Some((ix, rest)) = parse_number_prefix(t) {
                    segs.push(Seg {
                        number: ix,
                        comment: rest.to_string(),
                        stmts: Vec::new(),
                    });
                } else {
                    warnings.push(format!("ignored stray comment at line {n}"));
                }
            }
            Ev::Stmt(n, s) => match segs.last_mut() {
                Some(seg) => seg.stmts.push((n, s.to_string())),
                None => buffer.push((n, s.to_string())),
            },
        }
    }
    if !segs.is_empty() && !buffer.is_empty() {
        return Err(ChainParseError::Statement {
            line: buffer[0].0,
            reason: "statement before the first numbered comment".into(),
        });
    }

    let mut final_subq = String::new();
    let mut final_support: Vec<String> = Vec::new();
    let mut final_stmts: Vec<(usize, String)> = Vec::new();
    if derive_at.is_some() {
        if let Ev::Comment(_, t) = events[derive_idx] {
            final_subq = t[DATALOG_DERIVE.len()..].trim().to_string();
        }
        for ev in &events[derive_idx + 1..] {
            match *ev {
                Ev::Comment(_, t) => final_support.push(t.to_string()),
                Ev::Stmt(n, s) => final_stmts.push((n, s.to_string())),
            }
        }
    }

    let mut steps: Vec<Step> = Vec::new();
    let mut stmt_lines: Vec<usize> = Vec::new();
    if segs.is_empty() && !buffer.is_empty() {
        stmt_lines.extend(buffer.iter().map(|(n, _)| *n));
        steps.push(loose_step(buffer.into_iter().map(|(_, s)| s).collect()));
    } else {
        for seg in segs {
            let subquestion = nl_sub
                .get(&seg.number)
                .cloned()
                .unwrap_or_else(|| seg.comment.clone());
            let support = match nl_answers.get(&seg.number) {
                Some(lines) => lines.clone(),
                None if nl_sub.contains_key(&seg.number) => Vec::new(),
                None => vec![seg.comment.clone()],
            };
            stmt_lines.extend(seg.stmts.iter().map(|(n, _)| *n));
            steps.push(Step {
                index: seg.number,
                subquestion,
                dependency: Dependency::Independent,
                support,
                statements: seg.stmts.into_iter().map(|(_, s)| s).collect(),
            });
        }
    }
    if derive_at.is_some() {
        stmt_lines.extend(final_stmts.iter().map(|(n, _)| *n));
        steps.push(Step {
            index: steps.len() + 1,
            subquestion: final_subq,
            dependency: Dependency::Independent,
            support: final_support,
            statements: final_stmts.into_iter().map(|(_, s)| s).collect(),
        });
    }

    if stmt_lines.is_empty() {
        let line = lines.first().map(|&(n, _)| n).unwrap_or(1);
        return Err(ChainParseError::Statement {
            line,
            reason: "no Datalog statements".into(),
        });
    }

    let program: String = steps
        .iter()
        .flat_map(|s| s.statements.iter())
        .cloned()
        .collect::<Vec<_>>()
        .join("\n");
    if let Err(e) = crate::datalog::parse_datalog(&program) {
        let orig = e
            .line()
            .and_then(|l| stmt_lines.get(l - 1))
            .copied()
            .unwrap_or_else(|| *stmt_lines.last().expect("nonempty"));
        let last_input = lines.last().map(|&(n, _)| n).unwrap_or(orig);
        if orig != last_input {
            return Err(ChainParseError::Statement {
                line: orig,
                reason: e.to_string(),
            });
        }
        let last = steps.last_mut().expect("nonempty");
        last.statements.pop();
        if last.statements.is_empty() {
            steps.pop();
        }
        let retry: String = steps
            .iter()
            .flat_map(|s| s.statements.iter())
            .cloned()
            .collect::<Vec<_>>()
            .join("\n");
        let has_output = steps
            .iter()
            .flat_map(|s| s.statements.iter())
            .any(|l| l.trim_start().starts_with(".output"));
        if steps.is_empty() || !has_output || crate::datalog::parse_datalog(&retry).is_err() {
            return Err(ChainParseError::Truncated { line: orig });
        }
        warnings.push(format!("dropped truncated content at line {orig}"));
    }

    let chain = ReasoningChain::assemble(task, preamble, steps)?;
    Ok(ParsedChain { chain, warnings })
}

/// The plan layout: an optional `User query:` line, an optional goal
/// marker, then the goal form with its interleaved `;` rationale
/// comments. The comment texts double as the step's support.
fn parse_plangoal(task: TaskKind, text: &str) -> Result<ParsedChain, ChainParseError> {
    let lines = significant_lines(text);
    let mut subquestion = String::new();
    let mut start = 0usize;
    if let Some(q) = lines
        .first()
        .and_then(|&(_, l)| l.strip_prefix(PLAN_QUERY_PREFIX))
    {
        subquestion = q.trim().to_string();
        start = 1;
    }
    if lines.get(start).is_some_and(|&(_, l)| l == PLAN_GOAL_MARKER) {
        start += 1;
    }
    let stmt_lines = &lines[start..];
    let Some(&(first_line, _)) = stmt_lines.first() else {
        let line = lines.last().map(|&(n, _)| n).unwrap_or(1);
        return Err(ChainParseError::Statement {
            line,
            reason: "missing goal text".into(),
        });
    };
    let statements: Vec<String> = stmt_lines.iter().map(|&(_, l)| l.to_string()).collect();
    let support: Vec<String> = stmt_lines
        .iter()
        .filter_map(|&(_, l)| l.split_once(';').map(|(_, c)| c.trim().to_string()))
        .collect();
    let joined = statements.join("\n");
    match crate::plan::parse_goal(&joined) {
        Ok(_) => {}
        Err(crate::plan::GoalParseError::Unbalanced) => {
            let line = stmt_lines.last().map(|&(n, _)| n).unwrap_or(first_line);
            return Err(ChainParseError::Truncated { line });
        }
        Err(e) => {
            return Err(ChainParseError::Statement {
                line: first_line,
                reason: e.to_string(),
            });
        }
    }
    let step = Step {
        index: 1,
        subquestion,
        dependency: Dependency::Independent,
        support,
        statements,
    };
    let chain = ReasoningChain::assemble(task, Vec::new(), vec![step])?;
    Ok(ParsedChain {
        chain,
        warnings: Vec::new(),
    })
}

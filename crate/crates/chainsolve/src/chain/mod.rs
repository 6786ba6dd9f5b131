//! Reasoning chains: interleaved natural-language annotations and
//! symbolic statements, one of four dialect layouts.
//!
//! A chain is a preamble (question and framing lines kept verbatim)
//! followed by numbered steps. Each step carries a subquestion, a
//! dependency declaration, optional supporting rationale strings, and
//! the dialect statements answering it. Parsing accepts the layouts
//! produced during translation; rendering emits one canonical layout
//! per dialect such that parse(render(parse(text))) == parse(text).

mod parse;

pub use parse::{parse_chain, ChainParseError, ParsedChain};
pub(crate) use parse::without_header_clause;

use crate::model::{ProgramDialect, TaskKind};
use crate::relation::RelationStatement;
use crate::straightline;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// A completion as it came back from translation, before parsing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawChain {
    pub text: String,
    pub task: TaskKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dependency {
    Independent,
    DependsOn(BTreeSet<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub index: usize,
    pub subquestion: String,
    pub dependency: Dependency,
    pub support: Vec<String>,
    pub statements: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReasoningChain {
    pub task: TaskKind,
    pub dialect: ProgramDialect,
    pub preamble: Vec<String>,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ChainFormError {
    #[error("chain has no steps")]
    NoSteps,
    #[error("step {found} appears where step {expected} was expected")]
    NonContiguous { expected: usize, found: usize },
    #[error("step {step} declares an empty dependency list")]
    EmptyDependsOn { step: usize },
    #[error("no step defines the identifier `answer`")]
    MissingAnswer,
}

impl ReasoningChain {
    /// The only constructor. Indices must run 1..=n in order, declared
    /// dependency sets must be nonempty, and straight-line chains must
    /// bind `answer` somewhere.
    pub fn assemble(
        task: TaskKind,
        preamble: Vec<String>,
        steps: Vec<Step>,
    ) -> Result<ReasoningChain, ChainFormError> {
        if steps.is_empty() {
            return Err(ChainFormError::NoSteps);
        }
        for (i, step) in steps.iter().enumerate() {
            if step.index != i + 1 {
                return Err(ChainFormError::NonContiguous {
                    expected: i + 1,
                    found: step.index,
                });
            }
            if let Dependency::DependsOn(deps) = &step.dependency {
                if deps.is_empty() {
                    return Err(ChainFormError::EmptyDependsOn { step: step.index });
                }
            }
        }
        let dialect = task.dialect();
        if dialect == ProgramDialect::Straightline {
            let binds_answer = steps.iter().any(|s| {
                s.statements.iter().any(|line| {
                    straightline::parse_stmt(line)
                        .map(|stmt| straightline::stmt_defs(&stmt).contains("answer"))
                        .unwrap_or(false)
                })
            });
            if !binds_answer {
                return Err(ChainFormError::MissingAnswer);
            }
        }
        Ok(ReasoningChain {
            task,
            dialect,
            preamble,
            steps,
        })
    }

    /// All statements in step order, for whole-program dialects.
    pub fn program_text(&self) -> String {
        let mut lines = Vec::new();
        for step in &self.steps {
            lines.extend(step.statements.iter().cloned());
        }
        lines.join("\n")
    }
}

impl fmt::Display for Dependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dependency::Independent => f.write_str("independent"),
            Dependency::DependsOn(deps) => {
                f.write_str("depends on ")?;
                let deps: Vec<usize> = deps.iter().copied().collect();
                match deps.as_slice() {
                    [one] => write!(f, "{one}"),
                    [a, b] => write!(f, "{a} and {b}"),
                    many => {
                        let (last, front) = many.split_last().expect("nonempty");
                        for d in front {
                            write!(f, "{d}, ")?;
                        }
                        write!(f, "and {last}")
                    }
                }
            }
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn render_support_list(support: &[String]) -> String {
    let items: Vec<String> = support.iter().map(|s| quote(s)).collect();
    format!("[{}]", items.join(", "))
}

/// Canonical text for a chain. Each dialect has one layout;
/// annotations the parser folded away (block markers, numbering
/// styles) come back in canonical form.
pub fn render_chain(chain: &ReasoningChain) -> String {
    match chain.dialect {
        ProgramDialect::Straightline => render_commented(chain, true),
        ProgramDialect::Relation => render_commented(chain, false),
        ProgramDialect::Datalog => render_datalog(chain),
        ProgramDialect::PlanGoal => render_plangoal(chain),
    }
}

/// Straight-line and relation chains share the `#` layout. The list
/// style always writes a bracketed support list; the bare style keeps
/// the relation conventions: single rationale as a bare string, empty
/// support omitted, comma-separated dependency lists.
fn render_commented(chain: &ReasoningChain, list_style: bool) -> String {
    let mut out = String::new();
    for line in &chain.preamble {
        out.push_str(line);
        out.push('\n');
    }
    for step in &chain.steps {
        out.push_str(&format!("# {}. {}", step.index, step.subquestion));
        let clause = if list_style {
            format!(
                " ({}, support: {})",
                step.dependency,
                render_support_list(&step.support)
            )
        } else {
            let dep = match &step.dependency {
                Dependency::Independent => "independent".to_string(),
                Dependency::DependsOn(deps) => {
                    let list: Vec<String> = deps.iter().map(|d| d.to_string()).collect();
                    format!("depends on {}", list.join(", "))
                }
            };
            match step.support.as_slice() {
                [] => format!(" ({dep})"),
                [one] => format!(" ({dep}, support: {})", quote(one)),
                many => format!(" ({dep}, support: {})", render_support_list(many)),
            }
        };
        out.push_str(&clause);
        out.push('\n');
        for stmt in &step.statements {
            out.push_str(stmt);
            out.push('\n');
        }
    }
    out
}

pub(crate) const DATALOG_REPRESENT: &str = "Then, we represent these answers in Datalog:";
pub(crate) const DATALOG_DERIVE: &str = "Now, we derive the final answer:";

fn render_datalog(chain: &ReasoningChain) -> String {
    let mut out = String::new();
    for line in &chain.preamble {
        out.push_str(line);
        out.push('\n');
    }
    let (final_step, body) = match chain.steps.split_last() {
        Some((last, front)) => (last, front),
        None => return out,
    };
    for step in body {
        out.push_str(&format!("// {}. {}\n", step.index, step.subquestion));
        for line in &step.support {
            out.push_str(&format!("// {line}\n"));
        }
    }
    out.push('\n');
    out.push_str(&format!("// {DATALOG_REPRESENT}\n"));
    for step in body {
        let comment = step.support.first().unwrap_or(&step.subquestion);
        out.push_str(&format!("// {}. {}\n", step.index, comment));
        for stmt in &step.statements {
            out.push_str(stmt);
            out.push('\n');
        }
    }
    out.push('\n');
    out.push_str(&format!("// {DATALOG_DERIVE} {}\n", final_step.subquestion));
    for line in &final_step.support {
        out.push_str(&format!("// {line}\n"));
    }
    for stmt in &final_step.statements {
        out.push_str(stmt);
        out.push('\n');
    }
    out
}

pub(crate) const PLAN_QUERY_PREFIX: &str = "User query:";
pub(crate) const PLAN_GOAL_MARKER: &str = "Goal in PDDL:";

fn render_plangoal(chain: &ReasoningChain) -> String {
    let mut out = String::new();
    let Some(step) = chain.steps.first() else {
        return out;
    };
    if !step.subquestion.is_empty() {
        out.push_str(&format!("{PLAN_QUERY_PREFIX} {}\n", step.subquestion));
        out.push_str(PLAN_GOAL_MARKER);
        out.push('\n');
    }
    for stmt in &step.statements {
        out.push_str(stmt);
        out.push('\n');
    }
    out
}

/// Per-statement defined and used identifiers, in statement order.
///
/// Identifiers are dialect-specific: variables for straight-line
/// statements, relation names for Datalog, `relation(A, B)` pair keys
/// for relation statements. Plan goals bind nothing. Builtins never
/// appear in either set.
pub fn extract_def_use(
    dialect: ProgramDialect,
    statements: &[String],
) -> Vec<(BTreeSet<String>, BTreeSet<String>)> {
    statements
        .iter()
        .map(|line| match dialect {
            ProgramDialect::Straightline => match straightline::parse_stmt(line) {
                Ok(stmt) => (
                    straightline::stmt_defs(&stmt),
                    straightline::stmt_uses(&stmt),
                ),
                Err(_) => (BTreeSet::new(), BTreeSet::new()),
            },
            ProgramDialect::Relation => match crate::relation::parse_relation_statement(line) {
                Ok(RelationStatement::Assert { left, right, .. }) => {
                    ([pair_key(&left, &right)].into(), BTreeSet::new())
                }
                Ok(RelationStatement::Compose { target, expression }) => {
                    let defs = [pair_key(&target.0, &target.1)].into();
                    let uses = expression
                        .iter()
                        .map(|(l, r)| pair_key(l, r))
                        .collect();
                    (defs, uses)
                }
                Err(_) => (BTreeSet::new(), BTreeSet::new()),
            },
            ProgramDialect::Datalog => datalog_def_use(line),
            ProgramDialect::PlanGoal => (BTreeSet::new(), BTreeSet::new()),
        })
        .collect()
}

fn pair_key(left: &str, right: &str) -> String {
    format!("relation({left}, {right})")
}

/// Relation names in a Datalog line: a declaration or fact head
/// defines its relation, a rule defines its head and uses every
/// relation in its body, an output directive uses its relation.
fn datalog_def_use(line: &str) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut defs = BTreeSet::new();
    let mut uses = BTreeSet::new();
    let trimmed = line.trim();
    if let Some(rest) = trimmed.strip_prefix(".decl") {
        if let Some(name) = leading_ident(rest.trim_start()) {
            defs.insert(name);
        }
    } else if let Some(rest) = trimmed.strip_prefix(".output") {
        if let Some(name) = leading_ident(rest.trim_start()) {
            uses.insert(name);
        }
    } else if let Some((head, body)) = split_rule(trimmed) {
        if let Some(name) = leading_ident(head.trim_start()) {
            defs.insert(name);
        }
        uses.extend(applied_idents(body));
    } else if let Some(name) = leading_ident(trimmed) {
        defs.insert(name);
    }
    (defs, uses)
}

/// Splits `head :- body.` outside of string literals.
fn split_rule(line: &str) -> Option<(&str, &str)> {
    let bytes = line.as_bytes();
    let mut in_quote = false;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if in_quote => i += 1,
            b'"' => in_quote = !in_quote,
            b':' if !in_quote && bytes.get(i + 1) == Some(&b'-') => {
                return Some((&line[..i], &line[i + 2..]));
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn leading_ident(text: &str) -> Option<String> {
    let mut chars = text.chars();
    let first = chars.next()?;
    if !(first.is_ascii_alphabetic() || first == '_') {
        return None;
    }
    let ident: String = std::iter::once(first)
        .chain(chars.take_while(|c| c.is_ascii_alphanumeric() || *c == '_'))
        .collect();
    Some(ident)
}

/// Identifiers immediately followed by `(`, skipping string literals.
fn applied_idents(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut current = String::new();
    let mut in_quote = false;
    let mut escaped = false;
    for c in text.chars() {
        if in_quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quote = false;
            }
            continue;
        }
        match c {
            '"' => {
                current.clear();
                in_quote = true;
            }
            c if c.is_ascii_alphanumeric() || c == '_' => current.push(c),
            '(' if !current.is_empty() => {
                if current
                    .chars()
                    .next()
                    .is_some_and(|f| f.is_ascii_alphabetic() || f == '_')
                {
                    out.insert(std::mem::take(&mut current));
                } else {
                    current.clear();
                }
            }
            _ => current.clear(),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(index: usize, statements: &[&str]) -> Step {
        Step {
            index,
            subquestion: format!("subquestion {index}"),
            dependency: Dependency::Independent,
            support: Vec::new(),
            statements: statements.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn assemble_rejects_bad_shapes() {
        assert_eq!(
            ReasoningChain::assemble(TaskKind::MathWordProblem, Vec::new(), Vec::new()),
            Err(ChainFormError::NoSteps)
        );

        let steps = vec![step(1, &["x = 1"]), step(3, &["answer = x"])];
        assert_eq!(
            ReasoningChain::assemble(TaskKind::MathWordProblem, Vec::new(), steps),
            Err(ChainFormError::NonContiguous {
                expected: 2,
                found: 3
            })
        );

        let mut bad_dep = step(1, &["answer = 1"]);
        bad_dep.dependency = Dependency::DependsOn(BTreeSet::new());
        assert_eq!(
            ReasoningChain::assemble(TaskKind::MathWordProblem, Vec::new(), vec![bad_dep]),
            Err(ChainFormError::EmptyDependsOn { step: 1 })
        );

        assert_eq!(
            ReasoningChain::assemble(TaskKind::MathWordProblem, Vec::new(), vec![step(1, &["x = 1"])]),
            Err(ChainFormError::MissingAnswer)
        );
    }

    #[test]
    fn answer_requirement_is_straightline_only() {
        let chain = ReasoningChain::assemble(
            TaskKind::RelationalInference,
            Vec::new(),
            vec![step(1, &["relation(A, B) = father"])],
        );
        assert!(chain.is_ok());
    }

    #[test]
    fn dependency_lists_render_with_a_serial_and() {
        let dep = |ix: &[usize]| Dependency::DependsOn(ix.iter().copied().collect());
        assert_eq!(dep(&[3]).to_string(), "depends on 3");
        assert_eq!(dep(&[1, 2]).to_string(), "depends on 1 and 2");
        assert_eq!(dep(&[1, 4, 5]).to_string(), "depends on 1, 4, and 5");
        assert_eq!(Dependency::Independent.to_string(), "independent");
    }

    #[test]
    fn straightline_def_use_follows_statements() {
        let stmts = vec![
            "trees_begin = 15".to_string(),
            "trees_today = trees_end - trees_begin".to_string(),
            "answer = solution[duration]".to_string(),
        ];
        let pairs = extract_def_use(ProgramDialect::Straightline, &stmts);
        assert_eq!(pairs[0].0, ["trees_begin".to_string()].into());
        assert!(pairs[0].1.is_empty());
        assert_eq!(
            pairs[1].1,
            ["trees_begin".to_string(), "trees_end".to_string()].into()
        );
        assert_eq!(
            pairs[2].1,
            ["duration".to_string(), "solution".to_string()].into()
        );
    }

    #[test]
    fn relation_def_use_tracks_pair_keys() {
        let stmts = vec![
            "relation(Jason, Guillermina) = grandfather".to_string(),
            "relation(Jason, Myrna) = relation(Jason, Guillermina) @ relation(Guillermina, Myrna)"
                .to_string(),
        ];
        let pairs = extract_def_use(ProgramDialect::Relation, &stmts);
        assert_eq!(
            pairs[0].0,
            ["relation(Jason, Guillermina)".to_string()].into()
        );
        assert_eq!(pairs[1].0, ["relation(Jason, Myrna)".to_string()].into());
        assert_eq!(
            pairs[1].1,
            [
                "relation(Guillermina, Myrna)".to_string(),
                "relation(Jason, Guillermina)".to_string()
            ]
            .into()
        );
    }

    #[test]
    fn datalog_def_use_tracks_relation_names() {
        let decl = datalog_def_use(".decl Has_density(Object:symbol, Density:float)");
        assert_eq!(decl.0, ["Has_density".to_string()].into());
        let fact = datalog_def_use("Has_density(\"pear\", 0.6).");
        assert_eq!(fact.0, ["Has_density".to_string()].into());
        let rule = datalog_def_use(
            "Answer() :- Has_density(\"pear\", d1), Has_density(\"water\", d2), d1 > d2.",
        );
        assert_eq!(rule.0, ["Answer".to_string()].into());
        assert_eq!(rule.1, ["Has_density".to_string()].into());
        let output = datalog_def_use(".output Answer");
        assert_eq!(output.1, ["Answer".to_string()].into());
    }

    #[test]
    fn quoted_text_never_contributes_identifiers() {
        let rule = datalog_def_use("Answer() :- Mentions(\"see Also(here)\", x), Other(x).");
        assert_eq!(
            rule.1,
            ["Mentions".to_string(), "Other".to_string()].into()
        );
    }
}

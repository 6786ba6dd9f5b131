//! Kinship relation programs and their composition semantics.
//!
//! A relation program asserts pairwise family relations between named
//! people and asks for the relation between two endpoints, written as
//! a chain of `relation(A, X) @ relation(X, B)` compositions. Solving
//! folds the chain left to right through a composition table: an entry
//! `(r1, r2) -> r` states that when A is X's r1 and X is B's r2, A is
//! B's r. The shipped table is generated and certified by a family
//! tree sampling oracle in [`tree`].

pub mod tree;

pub use tree::{
    generate_table, random_tree, verify_table, AmbiguousFinding, FamilyTree, Person, VerifyReport,
    Violation,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

/// The relation vocabulary. The first argument of `relation(A, B) = r`
/// is the person the relation describes, so `gender(r)` is A's gender.
/// The two `*InLaw` grand variants are recognized by the parser but
/// carry no inverse and never appear in the shipped table, because
/// their own inverses (a spouse's grandparent) fall outside the
/// vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KinRelation {
    Father,
    Mother,
    Son,
    Daughter,
    Brother,
    Sister,
    Grandfather,
    Grandmother,
    Grandson,
    Granddaughter,
    Uncle,
    Aunt,
    Nephew,
    Niece,
    Husband,
    Wife,
    FatherInLaw,
    MotherInLaw,
    SonInLaw,
    DaughterInLaw,
    BrotherInLaw,
    SisterInLaw,
    GrandsonInLaw,
    GranddaughterInLaw,
}

use KinRelation::*;

impl KinRelation {
    pub const ALL: [KinRelation; 24] = [
        Father,
        Mother,
        Son,
        Daughter,
        Brother,
        Sister,
        Grandfather,
        Grandmother,
        Grandson,
        Granddaughter,
        Uncle,
        Aunt,
        Nephew,
        Niece,
        Husband,
        Wife,
        FatherInLaw,
        MotherInLaw,
        SonInLaw,
        DaughterInLaw,
        BrotherInLaw,
        SisterInLaw,
        GrandsonInLaw,
        GranddaughterInLaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Father => "father",
            Mother => "mother",
            Son => "son",
            Daughter => "daughter",
            Brother => "brother",
            Sister => "sister",
            Grandfather => "grandfather",
            Grandmother => "grandmother",
            Grandson => "grandson",
            Granddaughter => "granddaughter",
            Uncle => "uncle",
            Aunt => "aunt",
            Nephew => "nephew",
            Niece => "niece",
            Husband => "husband",
            Wife => "wife",
            FatherInLaw => "father-in-law",
            MotherInLaw => "mother-in-law",
            SonInLaw => "son-in-law",
            DaughterInLaw => "daughter-in-law",
            BrotherInLaw => "brother-in-law",
            SisterInLaw => "sister-in-law",
            GrandsonInLaw => "grandson-in-law",
            GranddaughterInLaw => "granddaughter-in-law",
        }
    }

    pub fn parse_name(s: &str) -> Option<KinRelation> {
        KinRelation::ALL.into_iter().find(|r| r.name() == s)
    }

    pub fn gender(self) -> Gender {
        match self {
            Father | Son | Brother | Grandfather | Grandson | Uncle | Nephew | Husband
            | FatherInLaw | SonInLaw | BrotherInLaw | GrandsonInLaw => Gender::Male,
            _ => Gender::Female,
        }
    }

    /// Reserved vocabulary: parsed but never produced by composition.
    pub fn is_reserved(self) -> bool {
        matches!(self, GrandsonInLaw | GranddaughterInLaw)
    }

    /// Blood relations win over in-law readings when a composition is
    /// ambiguous between the two.
    pub fn is_blood(self) -> bool {
        matches!(
            self,
            Father
                | Mother
                | Son
                | Daughter
                | Brother
                | Sister
                | Grandfather
                | Grandmother
                | Grandson
                | Granddaughter
                | Uncle
                | Aunt
                | Nephew
                | Niece
        )
    }

    /// The relation B has to A when A is B's `self` and B has gender
    /// `other`. None when that gender cannot occur (a husband's spouse
    /// is never male here) or for the reserved variants.
    pub fn inverse(self, other: Gender) -> Option<KinRelation> {
        use Gender::*;
        Some(match (self, other) {
            (Father | Mother, Male) => Son,
            (Father | Mother, Female) => Daughter,
            (Son | Daughter, Male) => Father,
            (Son | Daughter, Female) => Mother,
            (Brother | Sister, Male) => Brother,
            (Brother | Sister, Female) => Sister,
            (Grandfather | Grandmother, Male) => Grandson,
            (Grandfather | Grandmother, Female) => Granddaughter,
            (Grandson | Granddaughter, Male) => Grandfather,
            (Grandson | Granddaughter, Female) => Grandmother,
            (Uncle | Aunt, Male) => Nephew,
            (Uncle | Aunt, Female) => Niece,
            (Nephew | Niece, Male) => Uncle,
            (Nephew | Niece, Female) => Aunt,
            (Husband, Female) => Wife,
            (Wife, Male) => Husband,
            (FatherInLaw | MotherInLaw, Male) => SonInLaw,
            (FatherInLaw | MotherInLaw, Female) => DaughterInLaw,
            (SonInLaw | DaughterInLaw, Male) => FatherInLaw,
            (SonInLaw | DaughterInLaw, Female) => MotherInLaw,
            (BrotherInLaw | SisterInLaw, Male) => BrotherInLaw,
            (BrotherInLaw | SisterInLaw, Female) => SisterInLaw,
            _ => return None,
        })
    }
}

impl fmt::Display for KinRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguousEntry {
    pub left: KinRelation,
    pub right: KinRelation,
    /// Every conclusion the oracle observed for this premise pair.
    pub observed: Vec<KinRelation>,
    /// The conclusion the table adopted, when one reading won.
    pub resolved: Option<KinRelation>,
}

/// Partial map from relation pairs to their composition. Immutable
/// after construction; lookups are pure.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CompositionTable {
    entries: BTreeMap<(KinRelation, KinRelation), KinRelation>,
    ambiguous: Vec<AmbiguousEntry>,
    pruned: Vec<EntryRow>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    entries: Vec<EntryRow>,
    ambiguous: Vec<AmbiguousEntry>,
    #[serde(default)]
    pruned: Vec<EntryRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryRow {
    pub left: KinRelation,
    pub right: KinRelation,
    pub result: KinRelation,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("composition table is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read composition table: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate table entry for {left} @ {right}")]
    Duplicate { left: KinRelation, right: KinRelation },
}

impl CompositionTable {
    pub fn new() -> CompositionTable {
        CompositionTable::default()
    }

    /// The table generated by `generate_table` and checked in as JSON.
    pub fn builtin() -> &'static CompositionTable {
        static TABLE: OnceLock<CompositionTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            CompositionTable::from_json(include_str!("../../data/kinship_table.json"))
                .expect("bundled table parses")
        })
    }

    pub fn from_json(text: &str) -> Result<CompositionTable, TableError> {
        let file: TableFile = serde_json::from_str(text)?;
        let mut table = CompositionTable {
            entries: BTreeMap::new(),
            ambiguous: file.ambiguous,
            pruned: file.pruned,
        };
        for row in file.entries {
            if table
                .entries
                .insert((row.left, row.right), row.result)
                .is_some()
            {
                return Err(TableError::Duplicate {
                    left: row.left,
                    right: row.right,
                });
            }
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            entries: self
                .entries
                .iter()
                .map(|(&(left, right), &result)| EntryRow {
                    left,
                    right,
                    result,
                })
                .collect(),
            ambiguous: self.ambiguous.clone(),
            pruned: self.pruned.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("table serializes");
        text.push('\n');
        text
    }

    pub fn load(path: &std::path::Path) -> Result<CompositionTable, TableError> {
        CompositionTable::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, left: KinRelation, right: KinRelation) -> Option<KinRelation> {
        self.entries.get(&(left, right)).copied()
    }

    pub fn insert(&mut self, left: KinRelation, right: KinRelation, result: KinRelation) {
        self.entries.insert((left, right), result);
    }

    pub fn remove(&mut self, left: KinRelation, right: KinRelation) {
        self.entries.remove(&(left, right));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (KinRelation, KinRelation, KinRelation)> + '_ {
        self.entries.iter().map(|(&(l, r), &c)| (l, r, c))
    }

    pub fn ambiguous(&self) -> &[AmbiguousEntry] {
        &self.ambiguous
    }

    pub fn set_ambiguous(&mut self, entries: Vec<AmbiguousEntry>) {
        self.ambiguous = entries;
    }

    /// Entries the generator removed to keep composition associative.
    /// Each was individually sound but disagreed with another bracketing
    /// of some three-way composition.
    pub fn pruned(&self) -> &[EntryRow] {
        &self.pruned
    }

    pub fn set_pruned(&mut self, entries: Vec<EntryRow>) {
        self.pruned = entries;
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RelationError {
    #[error("no composition is defined for {left} @ {right}")]
    CompositionUndefined { left: KinRelation, right: KinRelation },
    #[error("expression pair ({left}, {right}) has no asserted relation")]
    UnresolvedPair { left: String, right: String },
    #[error("expression does not connect {want_left} to {want_right}: broken at ({at_left}, {at_right})")]
    DisconnectedPath {
        want_left: String,
        want_right: String,
        at_left: String,
        at_right: String,
    },
    #[error("program has no composition goal")]
    NoGoal,
    #[error("composition expression is empty")]
    EmptyExpression,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RelationParseError {
    #[error("expected `relation(A, B)`, found {found:?}")]
    MalformedPair { found: String },
    #[error("missing `=` after the relation pair")]
    MissingEquals,
    #[error("unknown relation name {name:?}")]
    UnknownRelation { name: String },
    #[error("empty person name in relation pair")]
    EmptyName,
    #[error("trailing input after statement: {rest:?}")]
    TrailingInput { rest: String },
}

/// One pairwise assertion, `relation(A, B) = r`, optionally carrying
/// the narrative sentence that supports it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assertion {
    pub left: String,
    pub right: String,
    pub relation: KinRelation,
    pub rationale: Option<String>,
}

/// A full program: assertions plus one goal that composes asserted
/// pairs along a path from the goal's left person to its right person.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationProgram {
    pub assertions: Vec<Assertion>,
    pub goal: (String, String),
    pub expression: Vec<(String, String)>,
}

impl RelationProgram {
    /// Number of hops in the composition expression.
    pub fn hops(&self) -> usize {
        self.expression.len()
    }
}

/// A single parsed statement line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RelationStatement {
    Assert {
        left: String,
        right: String,
        relation: KinRelation,
    },
    Compose {
        target: (String, String),
        expression: Vec<(String, String)>,
    },
}

impl fmt::Display for RelationStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationStatement::Assert {
                left,
                right,
                relation,
            } => write!(f, "relation({left}, {right}) = {relation}"),
            RelationStatement::Compose { target, expression } => {
                write!(f, "relation({}, {}) = ", target.0, target.1)?;
                for (i, (l, r)) in expression.iter().enumerate() {
                    if i > 0 {
                        write!(f, " @ ")?;
                    }
                    write!(f, "relation({l}, {r})")?;
                }
                Ok(())
            }
        }
    }
}

/// Strips the bracket decoration CLUTRR stories put around names, so
/// `[Vincent]` and `Vincent` refer to the same person.
fn clean_name(raw: &str) -> Result<String, RelationParseError> {
    let trimmed = raw.trim();
    let stripped = trimmed
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(trimmed)
        .trim();
    if stripped.is_empty() {
        return Err(RelationParseError::EmptyName);
    }
    Ok(stripped.to_string())
}

/// Parses `relation(A, B)` starting at `text`, returning the pair and
/// the remainder.
fn parse_pair(text: &str) -> Result<((String, String), &str), RelationParseError> {
    let malformed = |t: &str| RelationParseError::MalformedPair {
        found: t.chars().take(40).collect(),
    };
    let rest = text.trim_start();
    let rest = rest.strip_prefix("relation").ok_or_else(|| malformed(rest))?;
    let rest = rest.trim_start();
    let rest = rest.strip_prefix('(').ok_or_else(|| malformed(rest))?;
    let close = rest.find(')').ok_or_else(|| malformed(rest))?;
    let inside = &rest[..close];
    let comma = inside.find(',').ok_or_else(|| malformed(inside))?;
    let left = clean_name(&inside[..comma])?;
    let right = clean_name(&inside[comma + 1..])?;
    Ok(((left, right), &rest[close + 1..]))
}

/// Parses one statement line, either an assertion or a composition.
pub fn parse_relation_statement(line: &str) -> Result<RelationStatement, RelationParseError> {
    let (target, rest) = parse_pair(line)?;
    let rest = rest.trim_start();
    let rest = rest
        .strip_prefix('=')
        .ok_or(RelationParseError::MissingEquals)?;
    let rhs = rest.trim();
    if rhs.starts_with("relation") {
        let mut expression = Vec::new();
        let mut cursor = rhs;
        loop {
            let (pair, rest) = parse_pair(cursor)?;
            expression.push(pair);
            let rest = rest.trim_start();
            match rest.strip_prefix('@') {
                Some(next) => cursor = next,
                None => {
                    if !rest.is_empty() {
                        return Err(RelationParseError::TrailingInput {
                            rest: rest.chars().take(40).collect(),
                        });
                    }
                    break;
                }
            }
        }
        Ok(RelationStatement::Compose { target, expression })
    } else {
        let relation =
            KinRelation::parse_name(rhs).ok_or_else(|| RelationParseError::UnknownRelation {
                name: rhs.to_string(),
            })?;
        Ok(RelationStatement::Assert {
            left: target.0,
            right: target.1,
            relation,
        })
    }
}

/// Assembles a program from parsed statements. The last composition
/// statement is the goal; when the same pair is asserted twice, the
/// later assertion wins.
pub fn build_relation_program(
    statements: &[RelationStatement],
) -> Result<RelationProgram, RelationError> {
    let mut assertions: Vec<Assertion> = Vec::new();
    let mut goal = None;
    for stmt in statements {
        match stmt {
            RelationStatement::Assert {
                left,
                right,
                relation,
            } => assertions.push(Assertion {
                left: left.clone(),
                right: right.clone(),
                relation: *relation,
                rationale: None,
            }),
            RelationStatement::Compose { target, expression } => {
                goal = Some((target.clone(), expression.clone()));
            }
        }
    }
    let (goal, expression) = goal.ok_or(RelationError::NoGoal)?;
    Ok(RelationProgram {
        assertions,
        goal,
        expression,
    })
}

/// Looks up `r1 @ r2`.
pub fn compose(
    r1: KinRelation,
    r2: KinRelation,
    table: &CompositionTable,
) -> Result<KinRelation, RelationError> {
    table
        .get(r1, r2)
        .ok_or(RelationError::CompositionUndefined { left: r1, right: r2 })
}

/// Resolves each expression pair against the assertions, checks that
/// the pairs form a path from the goal's left endpoint to its right
/// endpoint, and left-folds the composition table over the path. A
/// K-hop expression performs exactly K-1 compositions.
pub fn solve_relation_chain(
    program: &RelationProgram,
    table: &CompositionTable,
) -> Result<KinRelation, RelationError> {
    if program.expression.is_empty() {
        return Err(RelationError::EmptyExpression);
    }
    let mut relations = Vec::with_capacity(program.expression.len());
    for (left, right) in &program.expression {
        let assertion = program
            .assertions
            .iter()
            .rev()
            .find(|a| &a.left == left && &a.right == right)
            .ok_or_else(|| RelationError::UnresolvedPair {
                left: left.clone(),
                right: right.clone(),
            })?;
        relations.push(assertion.relation);
    }
    let disconnected = |at: &(String, String)| RelationError::DisconnectedPath {
        want_left: program.goal.0.clone(),
        want_right: program.goal.1.clone(),
        at_left: at.0.clone(),
        at_right: at.1.clone(),
    };
    let first = &program.expression[0];
    if first.0 != program.goal.0 {
        return Err(disconnected(first));
    }
    for window in program.expression.windows(2) {
        if window[0].1 != window[1].0 {
            return Err(disconnected(&window[1]));
        }
    }
    let last = &program.expression[program.expression.len() - 1];
    if last.1 != program.goal.1 {
        return Err(disconnected(last));
    }
    let mut acc = relations[0];
    for &next in &relations[1..] {
        acc = compose(acc, next, table)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_stmt(line: &str) -> RelationStatement {
        parse_relation_statement(line).unwrap()
    }

    #[test]
    fn parses_assertion() {
        assert_eq!(
            assert_stmt("relation(Vincent, Dorothy) = son"),
            RelationStatement::Assert {
                left: "Vincent".to_string(),
                right: "Dorothy".to_string(),
                relation: Son,
            }
        );
    }

    #[test]
    fn strips_bracket_decorations() {
        assert_eq!(
            assert_stmt("relation([Vincent], [Dorothy]) = son"),
            assert_stmt("relation(Vincent, Dorothy) = son")
        );
    }

    #[test]
    fn parses_composition() {
        let stmt = assert_stmt(
            "relation(Jason, Myrna) = relation(Jason, Guillermina) @ relation(Guillermina, Myrna)",
        );
        match stmt {
            RelationStatement::Compose { target, expression } => {
                assert_eq!(target, ("Jason".to_string(), "Myrna".to_string()));
                assert_eq!(expression.len(), 2);
                assert_eq!(
                    expression[0],
                    ("Jason".to_string(), "Guillermina".to_string())
                );
            }
            other => panic!("expected composition, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_relation_name() {
        assert_eq!(
            parse_relation_statement("relation(A, B) = cousin").unwrap_err(),
            RelationParseError::UnknownRelation {
                name: "cousin".to_string()
            }
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_relation_statement("rel(A, B) = son").is_err());
        assert!(parse_relation_statement("relation(A B) = son").is_err());
        assert!(parse_relation_statement("relation(A, B) son").is_err());
        assert!(parse_relation_statement("relation(, B) = son").is_err());
        assert!(parse_relation_statement("relation(A, B) = relation(A, B) extra").is_err());
    }

    #[test]
    fn statement_display_round_trips() {
        for line in [
            "relation(Vincent, Dorothy) = son",
            "relation(Jason, Myrna) = relation(Jason, Guillermina) @ relation(Guillermina, Myrna)",
        ] {
            let stmt = assert_stmt(line);
            assert_eq!(assert_stmt(&stmt.to_string()), stmt);
        }
    }

    fn program(statements: &[&str]) -> RelationProgram {
        let parsed: Vec<RelationStatement> =
            statements.iter().map(|s| assert_stmt(s)).collect();
        build_relation_program(&parsed).unwrap()
    }

    fn two_hop_table() -> CompositionTable {
        let mut t = CompositionTable::new();
        t.insert(Son, Daughter, Grandson);
        t
    }

    #[test]
    fn solves_two_hop_chain() {
        let p = program(&[
            "relation(Vincent, Dorothy) = son",
            "relation(Dorothy, Gabrielle) = daughter",
            "relation(Vincent, Gabrielle) = relation(Vincent, Dorothy) @ relation(Dorothy, Gabrielle)",
        ]);
        assert_eq!(solve_relation_chain(&p, &two_hop_table()), Ok(Grandson));
    }

    #[test]
    fn single_pair_expression_needs_no_table() {
        let p = program(&[
            "relation(A, B) = aunt",
            "relation(A, B) = relation(A, B)",
        ]);
        assert_eq!(
            solve_relation_chain(&p, &CompositionTable::new()),
            Ok(Aunt)
        );
    }

    #[test]
    fn later_assertion_wins() {
        let p = program(&[
            "relation(A, B) = aunt",
            "relation(A, B) = niece",
            "relation(A, B) = relation(A, B)",
        ]);
        assert_eq!(
            solve_relation_chain(&p, &CompositionTable::new()),
            Ok(Niece)
        );
    }

    #[test]
    fn missing_assertion_is_reported() {
        let p = program(&[
            "relation(Vincent, Dorothy) = son",
            "relation(Vincent, Gabrielle) = relation(Vincent, Dorothy) @ relation(Dorothy, Gabrielle)",
        ]);
        assert_eq!(
            solve_relation_chain(&p, &two_hop_table()),
            Err(RelationError::UnresolvedPair {
                left: "Dorothy".to_string(),
                right: "Gabrielle".to_string()
            })
        );
    }

    #[test]
    fn disconnected_expression_is_reported() {
        let p = program(&[
            "relation(A, B) = son",
            "relation(C, D) = daughter",
            "relation(A, D) = relation(A, B) @ relation(C, D)",
        ]);
        assert!(matches!(
            solve_relation_chain(&p, &two_hop_table()),
            Err(RelationError::DisconnectedPath { .. })
        ));
        let wrong_start = program(&[
            "relation(A, B) = son",
            "relation(Z, B) = relation(A, B)",
        ]);
        assert!(matches!(
            solve_relation_chain(&wrong_start, &CompositionTable::new()),
            Err(RelationError::DisconnectedPath { .. })
        ));
    }

    #[test]
    fn undefined_composition_is_reported() {
        let p = program(&[
            "relation(A, B) = husband",
            "relation(B, C) = husband",
            "relation(A, C) = relation(A, B) @ relation(B, C)",
        ]);
        assert_eq!(
            solve_relation_chain(&p, &two_hop_table()),
            Err(RelationError::CompositionUndefined {
                left: Husband,
                right: Husband
            })
        );
    }

    #[test]
    fn chain_without_goal_is_rejected() {
        let stmt = assert_stmt("relation(A, B) = son");
        assert_eq!(
            build_relation_program(&[stmt]).unwrap_err(),
            RelationError::NoGoal
        );
    }

    #[test]
    fn fold_touches_exactly_k_minus_one_entries() {
        // A 4-hop chain over a table holding only the entries the left
        // fold needs; removing any one of them breaks the solve.
        let p = program(&[
            "relation(A, B) = son",
            "relation(B, C) = brother",
            "relation(C, D) = brother",
            "relation(D, E) = daughter",
            "relation(A, E) = relation(A, B) @ relation(B, C) @ relation(C, D) @ relation(D, E)",
        ]);
        let mut t = CompositionTable::new();
        t.insert(Son, Brother, Son);
        t.insert(Son, Daughter, Grandson);
        assert_eq!(p.hops(), 4);
        assert_eq!(solve_relation_chain(&p, &t), Ok(Grandson));
        for (l, r) in [(Son, Brother), (Son, Daughter)] {
            let mut crippled = t.clone();
            crippled.remove(l, r);
            assert!(matches!(
                solve_relation_chain(&p, &crippled),
                Err(RelationError::CompositionUndefined { .. })
            ));
        }
    }

    #[test]
    fn inverse_gender_agrees_with_result() {
        for r in KinRelation::ALL {
            for g in [Gender::Male, Gender::Female] {
                if let Some(inv) = r.inverse(g) {
                    assert_eq!(inv.gender(), g, "{r} inverted for {g:?}");
                }
            }
        }
    }

    #[test]
    fn active_relations_have_an_inverse() {
        for r in KinRelation::ALL {
            let has_inverse =
                r.inverse(Gender::Male).is_some() || r.inverse(Gender::Female).is_some();
            assert_eq!(has_inverse, !r.is_reserved(), "{r}");
        }
    }

    #[test]
    fn names_round_trip() {
        for r in KinRelation::ALL {
            assert_eq!(KinRelation::parse_name(r.name()), Some(r));
            let json = serde_json::to_string(&r).unwrap();
            assert_eq!(json, format!("\"{}\"", r.name()));
        }
        assert_eq!(KinRelation::parse_name("cousin"), None);
    }

    #[test]
    fn table_json_round_trips() {
        let mut t = CompositionTable::new();
        t.insert(Son, Daughter, Grandson);
        t.insert(Grandfather, Daughter, Father);
        t.set_ambiguous(vec![AmbiguousEntry {
            left: Grandmother,
            right: Son,
            observed: vec![Mother, MotherInLaw],
            resolved: Some(Mother),
        }]);
        let again = CompositionTable::from_json(&t.to_json()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn duplicate_table_rows_rejected() {
        let text = r#"{
            "entries": [
                {"left": "son", "right": "daughter", "result": "grandson"},
                {"left": "son", "right": "daughter", "result": "granddaughter"}
            ],
            "ambiguous": []
        }"#;
        assert!(matches!(
            CompositionTable::from_json(text),
            Err(TableError::Duplicate { .. })
        ));
    }
}

//! Stratification and semi-naive bottom-up evaluation.

use super::{
    Atom, CmpOp, DatalogProgram, DatalogValue, Literal, RelationInstance, Rule, Term, Tuple,
};
use crate::model::ExecLimits;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum StratifyError {
    #[error("relation {relation} depends on its own negation")]
    NegationCycle { relation: String },
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DatalogEvalError {
    #[error(transparent)]
    Stratify(#[from] StratifyError),
    #[error("cannot compare {left} with {right}")]
    CmpTypeMismatch {
        left: &'static str,
        right: &'static str,
    },
    #[error("operator {op} is not defined on symbols")]
    SymbolOrdering { op: &'static str },
    #[error("derived tuple violates column {column} of {relation}")]
    TupleType { relation: String, column: String },
    #[error("output relation {relation} is not declared")]
    UndeclaredOutput { relation: String },
    #[error("evaluation exceeded the time budget")]
    Timeout,
}

/// Assigns every relation a stratum such that positive dependencies
/// stay within or below the head's stratum and negated dependencies
/// sit strictly below. Returns the strata in evaluation order; a
/// negation-free program collapses to a single stratum.
pub fn stratify(p: &DatalogProgram) -> Result<Vec<Vec<String>>, StratifyError> {
    let mut stratum: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &p.decls {
        stratum.insert(&d.relation, 0);
    }
    let max = p.decls.len();
    loop {
        let mut changed = false;
        for rule in &p.rules {
            let head = rule.head.relation.as_str();
            for lit in &rule.body {
                let required = match lit {
                    Literal::Pos(a) => stratum[a.relation.as_str()],
                    Literal::Neg(a) => stratum[a.relation.as_str()] + 1,
                    Literal::Cmp(..) => continue,
                };
                if stratum[head] < required {
                    if required > max {
                        return Err(StratifyError::NegationCycle {
                            relation: head.to_string(),
                        });
                    }
                    stratum.insert(head, required);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut by_level: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (name, level) in stratum {
        by_level.entry(level).or_default().push(name.to_string());
    }
    Ok(by_level.into_values().collect())
}

/// Evaluates the program to its least fixpoint, stratum by stratum.
/// The result holds every declared relation, empty or not.
pub fn evaluate_datalog(
    p: &DatalogProgram,
    limits: &ExecLimits,
) -> Result<RelationInstance, DatalogEvalError> {
    if limits.expired() {
        return Err(DatalogEvalError::Timeout);
    }
    let strata = stratify(p)?;
    let mut inst = RelationInstance::default();
    for d in &p.decls {
        inst.relations.insert(d.relation.clone(), BTreeSet::new());
    }
    for fact in &p.facts {
        let tuple: Tuple = fact
            .args
            .iter()
            .map(|t| match t {
                Term::Const(v) => v.clone(),
                Term::Var(_) => unreachable!("facts are ground after parsing"),
            })
            .collect();
        inst.relations
            .get_mut(&fact.relation)
            .expect("facts reference declared relations")
            .insert(tuple);
    }
    let mut ev = Evaluator {
        program: p,
        limits,
        work: 0,
    };
    for names in &strata {
        let members: BTreeSet<&str> = names.iter().map(String::as_str).collect();
        let rules: Vec<&Rule> = p
            .rules
            .iter()
            .filter(|r| members.contains(r.head.relation.as_str()))
            .collect();
        if rules.is_empty() {
            continue;
        }
        ev.fixpoint(&rules, &members, &mut inst)?;
    }
    Ok(inst)
}

/// True when the named output relation derived at least one tuple.
pub fn boolean_answer(inst: &RelationInstance, output: &str) -> Result<bool, DatalogEvalError> {
    match inst.relations.get(output) {
        Some(tuples) => Ok(!tuples.is_empty()),
        None => Err(DatalogEvalError::UndeclaredOutput {
            relation: output.to_string(),
        }),
    }
}

type DeltaMap = BTreeMap<String, BTreeSet<Tuple>>;

struct Evaluator<'a> {
    program: &'a DatalogProgram,
    limits: &'a ExecLimits,
    work: u64,
}

impl Evaluator<'_> {
    /// Semi-naive iteration for one stratum. The first pass evaluates
    /// every rule against the full database; later passes require each
    /// derivation to consume at least one tuple from the previous
    /// pass's delta, so work is proportional to new tuples.
    fn fixpoint(
        &mut self,
        rules: &[&Rule],
        members: &BTreeSet<&str>,
        inst: &mut RelationInstance,
    ) -> Result<(), DatalogEvalError> {
        let mut delta: DeltaMap = BTreeMap::new();
        for rule in rules {
            let derived = self.eval_rule(rule, inst, None)?;
            self.absorb(rule, derived, inst, &mut delta)?;
        }
        while !delta.is_empty() {
            self.tick()?;
            let mut next: DeltaMap = BTreeMap::new();
            for rule in rules {
                for (i, lit) in rule.body.iter().enumerate() {
                    let atom = match lit {
                        Literal::Pos(a) if members.contains(a.relation.as_str()) => a,
                        _ => continue,
                    };
                    if !delta.contains_key(&atom.relation) {
                        continue;
                    }
                    let derived = self.eval_rule(rule, inst, Some((i, &delta)))?;
                    self.absorb(rule, derived, inst, &mut next)?;
                }
            }
            delta = next;
        }
        Ok(())
    }

    /// Inserts freshly derived tuples, type-checking them against the
    /// head declaration; tuples already present are dropped.
    fn absorb(
        &self,
        rule: &Rule,
        derived: BTreeSet<Tuple>,
        inst: &mut RelationInstance,
        delta: &mut DeltaMap,
    ) -> Result<(), DatalogEvalError> {
        let relation = &rule.head.relation;
        let decl = self
            .program
            .decl(relation)
            .expect("rule heads reference declared relations");
        let existing = inst
            .relations
            .get_mut(relation)
            .expect("instance holds every declared relation");
        for tuple in derived {
            for (value, col) in tuple.iter().zip(&decl.columns) {
                if !col.ty.admits(value) {
                    return Err(DatalogEvalError::TupleType {
                        relation: relation.clone(),
                        column: col.name.clone(),
                    });
                }
            }
            if existing.insert(tuple.clone()) {
                delta.entry(relation.clone()).or_default().insert(tuple);
            }
        }
        Ok(())
    }

    /// Joins the rule body and returns the instantiated heads. When
    /// `delta_at` names a body position, that atom reads from the delta
    /// instead of the full database. Positive atoms are joined first;
    /// comparisons and negated atoms then filter fully bound rows.
    fn eval_rule(
        &mut self,
        rule: &Rule,
        inst: &RelationInstance,
        delta_at: Option<(usize, &DeltaMap)>,
    ) -> Result<BTreeSet<Tuple>, DatalogEvalError> {
        let mut positives: Vec<(usize, &Atom)> = Vec::new();
        let mut filters: Vec<&Literal> = Vec::new();
        for (i, lit) in rule.body.iter().enumerate() {
            match lit {
                Literal::Pos(a) => positives.push((i, a)),
                other => filters.push(other),
            }
        }
        let mut out = BTreeSet::new();
        let mut env: BTreeMap<&str, DatalogValue> = BTreeMap::new();
        self.join(
            rule, inst, delta_at, &positives, &filters, 0, &mut env, &mut out,
        )?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn join<'r>(
        &mut self,
        rule: &'r Rule,
        inst: &RelationInstance,
        delta_at: Option<(usize, &DeltaMap)>,
        positives: &[(usize, &'r Atom)],
        filters: &[&Literal],
        depth: usize,
        env: &mut BTreeMap<&'r str, DatalogValue>,
        out: &mut BTreeSet<Tuple>,
    ) -> Result<(), DatalogEvalError> {
        self.tick()?;
        if depth == positives.len() {
            for lit in filters {
                let pass = match lit {
                    Literal::Cmp(op, l, r) => {
                        compare(*op, &resolve(l, env), &resolve(r, env))?
                    }
                    Literal::Neg(atom) => {
                        let tuple: Tuple =
                            atom.args.iter().map(|t| resolve(t, env)).collect();
                        !inst.relations[&atom.relation].contains(&tuple)
                    }
                    Literal::Pos(_) => unreachable!("positives are joined, not filtered"),
                };
                if !pass {
                    return Ok(());
                }
            }
            let head: Tuple = rule.head.args.iter().map(|t| resolve(t, env)).collect();
            out.insert(head);
            return Ok(());
        }
        let (body_index, atom) = positives[depth];
        let source = match delta_at {
            Some((i, delta)) if i == body_index => &delta[&atom.relation],
            _ => &inst.relations[&atom.relation],
        };
        'tuples: for tuple in source {
            let mut bound_here: Vec<&str> = Vec::new();
            for (term, value) in atom.args.iter().zip(tuple) {
                match term {
                    Term::Const(c) => {
                        if c != value {
                            for name in bound_here.drain(..) {
                                env.remove(name);
                            }
                            continue 'tuples;
                        }
                    }
                    Term::Var(v) => match env.get(v.as_str()) {
                        Some(existing) if existing != value => {
                            for name in bound_here.drain(..) {
                                env.remove(name);
                            }
                            continue 'tuples;
                        }
                        Some(_) => {}
                        None => {
                            env.insert(v, value.clone());
                            bound_here.push(v);
                        }
                    },
                }
            }
            self.join(
                rule,
                inst,
                delta_at,
                positives,
                filters,
                depth + 1,
                env,
                out,
            )?;
            for name in bound_here {
                env.remove(name);
            }
        }
        Ok(())
    }

    fn tick(&mut self) -> Result<(), DatalogEvalError> {
        self.work += 1;
        if self.work % 1024 == 0 && self.limits.expired() {
            return Err(DatalogEvalError::Timeout);
        }
        Ok(())
    }
}

fn resolve(term: &Term, env: &BTreeMap<&str, DatalogValue>) -> DatalogValue {
    match term {
        Term::Const(c) => c.clone(),
        Term::Var(v) => env[v.as_str()].clone(),
    }
}

fn compare(op: CmpOp, left: &DatalogValue, right: &DatalogValue) -> Result<bool, DatalogEvalError> {
    match (left, right) {
        (DatalogValue::Num(a), DatalogValue::Num(b)) => Ok(match op {
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }),
        (DatalogValue::Sym(a), DatalogValue::Sym(b)) => {
            if op.is_ordered() {
                Err(DatalogEvalError::SymbolOrdering { op: op.symbol() })
            } else {
                Ok((a == b) == (op == CmpOp::Eq))
            }
        }
        _ => Err(DatalogEvalError::CmpTypeMismatch {
            left: left.kind(),
            right: right.kind(),
        }),
    }
}

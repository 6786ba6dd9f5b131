//! Property tests pitting the semi-naive engine against an independent
//! naive-iteration oracle, plus monotonicity and reachability checks.

use chainsolve::datalog::{
    evaluate_datalog, parse_datalog, Atom, CmpOp, ColType, Column, DatalogProgram, DatalogValue,
    Declaration, Literal, Rule, Term, Tuple,
};
use chainsolve::model::ExecLimits;
use num_rational::BigRational;
use num_traits::FromPrimitive;
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

fn num(v: i64) -> DatalogValue {
    DatalogValue::Num(BigRational::from_i64(v).expect("i64 converts"))
}

/// Reference evaluator: applies every rule against the full database
/// and repeats until nothing changes. Negation-free programs only.
fn naive_eval(p: &DatalogProgram) -> BTreeMap<String, BTreeSet<Tuple>> {
    let mut db: BTreeMap<String, BTreeSet<Tuple>> = BTreeMap::new();
    for d in &p.decls {
        db.insert(d.relation.clone(), BTreeSet::new());
    }
    for fact in &p.facts {
        let tuple: Tuple = fact
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.clone(),
                Term::Var(_) => panic!("fact with variable"),
            })
            .collect();
        db.get_mut(&fact.relation).unwrap().insert(tuple);
    }
    loop {
        let mut added = false;
        for rule in &p.rules {
            for tuple in rule_consequences(rule, &db) {
                if db.get_mut(&rule.head.relation).unwrap().insert(tuple) {
                    added = true;
                }
            }
        }
        if !added {
            return db;
        }
    }
}

fn rule_consequences(rule: &Rule, db: &BTreeMap<String, BTreeSet<Tuple>>) -> Vec<Tuple> {
    let mut atoms = Vec::new();
    let mut cmps = Vec::new();
    for lit in &rule.body {
        match lit {
            Literal::Pos(a) => atoms.push(a),
            Literal::Cmp(op, l, r) => cmps.push((op, l, r)),
            Literal::Neg(_) => panic!("oracle handles negation-free programs only"),
        }
    }
    let mut out = Vec::new();
    let mut stack = vec![(0usize, BTreeMap::<String, DatalogValue>::new())];
    while let Some((depth, env)) = stack.pop() {
        if depth == atoms.len() {
            let ok = cmps.iter().all(|(op, l, r)| {
                let (a, b) = (lookup(l, &env), lookup(r, &env));
                match (a, b) {
                    (DatalogValue::Num(x), DatalogValue::Num(y)) => match op {
                        CmpOp::Lt => x < y,
                        CmpOp::Gt => x > y,
                        CmpOp::Le => x <= y,
                        CmpOp::Ge => x >= y,
                        CmpOp::Eq => x == y,
                        CmpOp::Ne => x != y,
                    },
                    _ => panic!("oracle compares numbers only"),
                }
            });
            if ok {
                out.push(rule.head.args.iter().map(|t| lookup(t, &env)).collect());
            }
            continue;
        }
        let atom = atoms[depth];
        'tuples: for tuple in &db[&atom.relation] {
            let mut next = env.clone();
            for (term, value) in atom.args.iter().zip(tuple) {
                match term {
                    Term::Const(c) => {
                        if c != value {
                            continue 'tuples;
                        }
                    }
                    Term::Var(v) => {
                        if let Some(bound) = next.get(v) {
                            if bound != value {
                                continue 'tuples;
                            }
                        } else {
                            next.insert(v.clone(), value.clone());
                        }
                    }
                }
            }
            stack.push((depth + 1, next));
        }
    }
    out
}

fn lookup(term: &Term, env: &BTreeMap<String, DatalogValue>) -> DatalogValue {
    match term {
        Term::Const(c) => c.clone(),
        Term::Var(v) => env[v].clone(),
    }
}

#[derive(Clone, Debug)]
enum TermSeed {
    Var(usize),
    Const(i64),
}

#[derive(Clone, Debug)]
struct AtomSeed {
    rel: usize,
    terms: Vec<TermSeed>,
}

#[derive(Clone, Debug)]
struct RuleSeed {
    head: usize,
    head_terms: Vec<TermSeed>,
    body: Vec<AtomSeed>,
    cmp: Option<(u8, usize, usize)>,
}

fn term_seed() -> impl Strategy<Value = TermSeed> {
    prop_oneof![
        (0usize..4).prop_map(TermSeed::Var),
        (0i64..5).prop_map(TermSeed::Const),
    ]
}

fn atom_seed() -> impl Strategy<Value = AtomSeed> {
    (0usize..5, prop::collection::vec(term_seed(), 2))
        .prop_map(|(rel, terms)| AtomSeed { rel, terms })
}

fn rule_seed() -> impl Strategy<Value = RuleSeed> {
    (
        0usize..5,
        prop::collection::vec(term_seed(), 2),
        prop::collection::vec(atom_seed(), 1..=2),
        prop::option::of((0u8..6, 0usize..4, 0usize..4)),
    )
        .prop_map(|(head, head_terms, body, cmp)| RuleSeed {
            head,
            head_terms,
            body,
            cmp,
        })
}

fn program_seed() -> impl Strategy<Value = DatalogProgram> {
    (
        prop::collection::vec(1usize..=2, 1..=5),
        prop::collection::vec((0usize..5, prop::collection::vec(0i64..5, 2)), 0..=30),
        prop::collection::vec(rule_seed(), 0..=5),
    )
        .prop_map(|(arities, facts, rules)| build_program(&arities, &facts, &rules))
}

/// Assembles a valid negation-free program from raw seeds. Head and
/// comparison variables that the seeds left unbound are repaired by
/// substituting a bound variable or a constant, so range restriction
/// holds by construction.
fn build_program(arities: &[usize], facts: &[(usize, Vec<i64>)], rules: &[RuleSeed]) -> DatalogProgram {
    let n = arities.len();
    let var = |i: usize| format!("v{i}");
    let decls: Vec<Declaration> = arities
        .iter()
        .enumerate()
        .map(|(i, &arity)| Declaration {
            relation: format!("r{i}"),
            columns: (0..arity)
                .map(|c| Column {
                    name: format!("c{c}"),
                    ty: ColType::Number,
                })
                .collect(),
        })
        .collect();
    let fact_atoms: Vec<Atom> = facts
        .iter()
        .map(|(rel, values)| {
            let rel = rel % n;
            Atom {
                relation: format!("r{rel}"),
                args: values
                    .iter()
                    .take(arities[rel])
                    .map(|&v| Term::Const(num(v)))
                    .collect(),
            }
        })
        .collect();
    let rule_asts: Vec<Rule> = rules
        .iter()
        .map(|seed| {
            let head_rel = seed.head % n;
            let body: Vec<AtomSeed> = seed
                .body
                .iter()
                .map(|a| AtomSeed {
                    rel: a.rel % n,
                    terms: a.terms.iter().take(arities[a.rel % n]).cloned().collect(),
                })
                .collect();
            let mut bound: Vec<usize> = Vec::new();
            for atom in &body {
                for t in &atom.terms {
                    if let TermSeed::Var(i) = t {
                        if !bound.contains(i) {
                            bound.push(*i);
                        }
                    }
                }
            }
            let ground = |seed: &TermSeed| match seed {
                TermSeed::Const(c) => Term::Const(num(*c)),
                TermSeed::Var(i) => {
                    if bound.contains(i) {
                        Term::Var(var(*i))
                    } else if bound.is_empty() {
                        Term::Const(num(0))
                    } else {
                        Term::Var(var(bound[i % bound.len()]))
                    }
                }
            };
            let head = Atom {
                relation: format!("r{head_rel}"),
                args: seed
                    .head_terms
                    .iter()
                    .take(arities[head_rel])
                    .map(&ground)
                    .collect(),
            };
            let mut lits: Vec<Literal> = body
                .iter()
                .map(|a| {
                    Literal::Pos(Atom {
                        relation: format!("r{}", a.rel),
                        args: a
                            .terms
                            .iter()
                            .map(|t| match t {
                                TermSeed::Const(c) => Term::Const(num(*c)),
                                TermSeed::Var(i) => Term::Var(var(*i)),
                            })
                            .collect(),
                    })
                })
                .collect();
            if let Some((op, a, b)) = &seed.cmp {
                let op = [CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne]
                    [*op as usize % 6];
                let pick = |i: usize| ground(&TermSeed::Var(i));
                lits.push(Literal::Cmp(op, pick(*a), pick(*b)));
            }
            Rule { head, body: lits }
        })
        .collect();
    DatalogProgram {
        decls,
        facts: fact_atoms,
        rules: rule_asts,
        outputs: Vec::new(),
    }
}

/// Directed reachability in one or more steps, computed by repeated
/// frontier expansion per source node.
fn closure(nodes: usize, edges: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for start in 0..nodes {
        let mut seen = BTreeSet::new();
        let mut frontier = vec![start];
        while let Some(x) = frontier.pop() {
            for &(a, b) in edges {
                if a == x && seen.insert(b) {
                    frontier.push(b);
                }
            }
        }
        for b in seen {
            out.insert((start, b));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semi_naive_matches_naive_oracle(p in program_seed()) {
        let expected = naive_eval(&p);
        let got = evaluate_datalog(&p, &ExecLimits::none()).expect("generated programs evaluate");
        prop_assert_eq!(got.relations, expected);
    }

    #[test]
    fn adding_a_fact_is_monotone(
        p in program_seed(),
        rel in 0usize..5,
        values in prop::collection::vec(0i64..5, 2),
    ) {
        let base = evaluate_datalog(&p, &ExecLimits::none()).expect("base evaluates");
        let mut grown = p.clone();
        let rel = rel % grown.decls.len();
        let arity = grown.decls[rel].columns.len();
        grown.facts.push(Atom {
            relation: format!("r{rel}"),
            args: values.iter().take(arity).map(|&v| Term::Const(num(v))).collect(),
        });
        let bigger = evaluate_datalog(&grown, &ExecLimits::none()).expect("grown evaluates");
        for (name, tuples) in &base.relations {
            prop_assert!(tuples.is_subset(&bigger.relations[name]), "relation {} shrank", name);
        }
    }

    #[test]
    fn path_program_computes_reachability(
        edges in prop::collection::btree_set((0usize..8, 0usize..8), 0..20),
    ) {
        let mut text = String::from(
            ".decl edge(a:number, b:number)\n.decl path(a:number, b:number)\n",
        );
        for (a, b) in &edges {
            text.push_str(&format!("edge({a}, {b}).\n"));
        }
        text.push_str("path(x, y) :- edge(x, y).\n");
        text.push_str("path(x, z) :- path(x, y), edge(y, z).\n");
        let p = parse_datalog(&text).unwrap();
        let inst = evaluate_datalog(&p, &ExecLimits::none()).unwrap();
        let got: BTreeSet<(usize, usize)> = inst.tuples("path").unwrap().iter().map(|t| {
            match (&t[0], &t[1]) {
                (DatalogValue::Num(a), DatalogValue::Num(b)) => (
                    a.to_integer().try_into().unwrap(),
                    b.to_integer().try_into().unwrap(),
                ),
                _ => panic!("numeric tuples expected"),
            }
        }).collect();
        prop_assert_eq!(got, closure(8, &edges));
    }
}

//! Dependency-structure constraints over parsed chains and the
//! candidate filter built on them.
//!
//! Three checks, individually toggleable: declared dependency graphs
//! must be well formed and acyclic (G), a step may only use
//! identifiers coming from its declared dependencies or its own
//! earlier statements (O), and every declared dependency must
//! contribute at least one used identifier (U). O and U read the
//! per-dialect def-use sets, so they extend beyond straight-line
//! programs unchanged.
//!
//! O and U assume G passed. On a chain with out-of-range or self
//! references they still return verdicts (no panics), but those
//! verdicts ignore the broken references, which are G's to report.

use crate::chain::{extract_def_use, Dependency, ReasoningChain};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConstraintSet {
    pub graph_validity: bool,
    pub no_over_dependency: bool,
    pub no_under_dependency: bool,
}

impl ConstraintSet {
    pub const NONE: ConstraintSet = ConstraintSet {
        graph_validity: false,
        no_over_dependency: false,
        no_under_dependency: false,
    };
    pub const ALL: ConstraintSet = ConstraintSet {
        graph_validity: true,
        no_over_dependency: true,
        no_under_dependency: true,
    };

    /// Parses a comma-separated flag list such as `g,o,u` or `G,U`.
    /// The empty string enables nothing.
    pub fn parse_list(text: &str) -> Result<ConstraintSet, String> {
        let mut set = ConstraintSet::NONE;
        for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token.to_ascii_lowercase().as_str() {
                "g" => set.graph_validity = true,
                "o" => set.no_over_dependency = true,
                "u" => set.no_under_dependency = true,
                other => return Err(format!("unknown constraint flag {other:?}")),
            }
        }
        Ok(set)
    }

    pub fn is_subset_of(&self, other: &ConstraintSet) -> bool {
        (!self.graph_validity || other.graph_validity)
            && (!self.no_over_dependency || other.no_over_dependency)
            && (!self.no_under_dependency || other.no_under_dependency)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    GraphValidity,
    NoOverDependency,
    NoUnderDependency,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::GraphValidity => "G",
            ConstraintKind::NoOverDependency => "O",
            ConstraintKind::NoUnderDependency => "U",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DiagnosticKind {
    /// A declared dependency names a step outside 1..=n.
    MissingStep { reference: usize },
    /// A step declares itself as a dependency.
    SelfLoop,
    /// The declared dependencies form a cycle; the path repeats its
    /// first element at the end.
    Cycle { path: Vec<usize> },
    /// A used identifier is not provided by any declared dependency,
    /// earlier statement of the same step, or builtin.
    UndeclaredUse { identifier: String },
    /// A declared dependency contributes no used identifier.
    UnusedDependency { dependency: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub step: usize,
    pub constraint: ConstraintKind,
    #[serde(flatten)]
    pub detail: DiagnosticKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstraintReport {
    pub constraint: ConstraintKind,
    pub passed: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl ConstraintReport {
    fn from_diagnostics(constraint: ConstraintKind, diagnostics: Vec<Diagnostic>) -> Self {
        ConstraintReport {
            constraint,
            passed: diagnostics.is_empty(),
            diagnostics,
        }
    }
}

fn deps_of(step: &crate::chain::Step) -> Vec<usize> {
    match &step.dependency {
        Dependency::Independent => Vec::new(),
        Dependency::DependsOn(deps) => deps.iter().copied().collect(),
    }
}

pub fn check_graph_validity(chain: &ReasoningChain) -> ConstraintReport {
    let n = chain.steps.len();
    let mut diagnostics = Vec::new();
    for step in &chain.steps {
        for dep in deps_of(step) {
            if dep == step.index {
                diagnostics.push(Diagnostic {
                    step: step.index,
                    constraint: ConstraintKind::GraphValidity,
                    detail: DiagnosticKind::SelfLoop,
                });
            } else if dep < 1 || dep > n {
                diagnostics.push(Diagnostic {
                    step: step.index,
                    constraint: ConstraintKind::GraphValidity,
                    detail: DiagnosticKind::MissingStep { reference: dep },
                });
            }
        }
    }
    if let Some(path) = find_cycle(chain) {
        diagnostics.push(Diagnostic {
            step: path[0],
            constraint: ConstraintKind::GraphValidity,
            detail: DiagnosticKind::Cycle { path },
        });
    }
    ConstraintReport::from_diagnostics(ConstraintKind::GraphValidity, diagnostics)
}

/// One cycle through the in-range, non-self dependency edges, if any.
/// Iterative three-color DFS; the returned path starts and ends at
/// the same step.
fn find_cycle(chain: &ReasoningChain) -> Option<Vec<usize>> {
    let n = chain.steps.len();
    let adj: Vec<Vec<usize>> = chain
        .steps
        .iter()
        .map(|s| {
            deps_of(s)
                .into_iter()
                .filter(|&d| d >= 1 && d <= n && d != s.index)
                .collect()
        })
        .collect();
    // 0 unvisited, 1 on stack, 2 done
    let mut color = vec![0u8; n + 1];
    for start in 1..=n {
        if color[start] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        color[start] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let edges = &adj[node - 1];
            if *next < edges.len() {
                let target = edges[*next];
                *next += 1;
                match color[target] {
                    0 => {
                        color[target] = 1;
                        stack.push((target, 0));
                    }
                    1 => {
                        let mut path: Vec<usize> = stack
                            .iter()
                            .map(|&(v, _)| v)
                            .skip_while(|&v| v != target)
                            .collect();
                        path.push(target);
                        return Some(path);
                    }
                    _ => {}
                }
            } else {
                color[node] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Union of defined identifiers across a step's statements.
fn step_defs(chain: &ReasoningChain, index: usize) -> BTreeSet<String> {
    let step = &chain.steps[index - 1];
    extract_def_use(chain.dialect, &step.statements)
        .into_iter()
        .flat_map(|(defs, _)| defs)
        .collect()
}

fn step_uses(chain: &ReasoningChain, index: usize) -> BTreeSet<String> {
    let step = &chain.steps[index - 1];
    extract_def_use(chain.dialect, &step.statements)
        .into_iter()
        .flat_map(|(_, uses)| uses)
        .collect()
}

pub fn check_over_dependency(chain: &ReasoningChain) -> ConstraintReport {
    let n = chain.steps.len();
    let mut diagnostics = Vec::new();
    for step in &chain.steps {
        let mut allowed: BTreeSet<String> = BTreeSet::new();
        for dep in deps_of(step) {
            if dep >= 1 && dep <= n {
                allowed.extend(step_defs(chain, dep));
            }
        }
        let mut flagged: BTreeSet<String> = BTreeSet::new();
        for (defs, uses) in extract_def_use(chain.dialect, &step.statements) {
            for used in uses {
                if !allowed.contains(&used) && flagged.insert(used.clone()) {
                    diagnostics.push(Diagnostic {
                        step: step.index,
                        constraint: ConstraintKind::NoOverDependency,
                        detail: DiagnosticKind::UndeclaredUse { identifier: used },
                    });
                }
            }
            allowed.extend(defs);
        }
    }
    ConstraintReport::from_diagnostics(ConstraintKind::NoOverDependency, diagnostics)
}

pub fn check_under_dependency(chain: &ReasoningChain) -> ConstraintReport {
    let n = chain.steps.len();
    let mut diagnostics = Vec::new();
    for step in &chain.steps {
        let uses = step_uses(chain, step.index);
        for dep in deps_of(step) {
            if dep < 1 || dep > n || dep == step.index {
                continue;
            }
            if step_defs(chain, dep).is_disjoint(&uses) {
                diagnostics.push(Diagnostic {
                    step: step.index,
                    constraint: ConstraintKind::NoUnderDependency,
                    detail: DiagnosticKind::UnusedDependency { dependency: dep },
                });
            }
        }
    }
    ConstraintReport::from_diagnostics(ConstraintKind::NoUnderDependency, diagnostics)
}

/// Reports for the enabled constraints, in G, O, U order.
pub fn check_chain(chain: &ReasoningChain, cs: &ConstraintSet) -> Vec<ConstraintReport> {
    let mut reports = Vec::new();
    if cs.graph_validity {
        reports.push(check_graph_validity(chain));
    }
    if cs.no_over_dependency {
        reports.push(check_over_dependency(chain));
    }
    if cs.no_under_dependency {
        reports.push(check_under_dependency(chain));
    }
    reports
}

pub fn chain_passes(chain: &ReasoningChain, cs: &ConstraintSet) -> bool {
    check_chain(chain, cs).iter().all(|r| r.passed)
}

/// Keeps exactly the chains passing every enabled constraint, in
/// input order. An empty constraint set keeps everything.
pub fn filter_generations(chains: &[ReasoningChain], cs: &ConstraintSet) -> Vec<ReasoningChain> {
    chains
        .iter()
        .filter(|c| chain_passes(c, cs))
        .cloned()
        .collect()
}

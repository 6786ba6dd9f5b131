//! Per-query pipeline: sample chains, filter, execute, and vote.
//!
//! Each sampled completion goes through parse, optional constraint checking,
//! dialect execution, and normalization; failures at any stage turn the
//! sample into a discarded Null with its reason attached. The surviving
//! answers are pooled by majority vote on their normalized form.

use std::collections::BTreeMap;
use std::time::Duration;

use crate::chain::{parse_chain, RawChain, ReasoningChain};
use crate::constraints::{check_chain, ConstraintKind, ConstraintSet};
use crate::datalog::{boolean_answer, evaluate_datalog, parse_datalog, DatalogEvalError};
use crate::metrics::normalize_answer;
use crate::model::{
    answer_to_record, record_to_answer, AnswerValue, DecodingParams, ExecLimits, FailureReason,
    FailureStage, ProgramDialect, Query, TaskKind,
};
use crate::plan::{parse_goal, plan_with_budget, PlanError, WorldModel, DEFAULT_STATE_BUDGET};
use crate::relation::{
    build_relation_program, parse_relation_statement, solve_relation_chain, CompositionTable,
};
use crate::straightline::{answer_from_env, parse_stmt, run_statements, Env, EvalError, SlStmt};

/// Produces completion texts for a query. Implemented by the translator's
/// live and replay providers; tests implement it with closures over fixed
/// strings.
pub trait ChainSource {
    /// Returns `params.n` completions in sample order.
    fn sample(&self, q: &Query, params: &DecodingParams) -> Result<Vec<String>, FailureReason>;
}

impl<F> ChainSource for F
where
    F: Fn(&Query, &DecodingParams) -> Result<Vec<String>, FailureReason>,
{
    fn sample(&self, q: &Query, params: &DecodingParams) -> Result<Vec<String>, FailureReason> {
        self(q, params)
    }
}

/// Task-specific resources the executors draw on.
#[derive(Debug, Clone)]
pub struct SolverContext {
    /// Planning world. Planning chains fail without one.
    pub world: Option<WorldModel>,
    /// Kinship composition table; the certified builtin when absent.
    pub table: Option<CompositionTable>,
    /// Wall-clock budget per executed sample. None disables the deadline.
    pub sample_timeout: Option<Duration>,
    /// Maximum states the planner may expand per sample.
    pub state_budget: usize,
}

impl Default for SolverContext {
    fn default() -> SolverContext {
        SolverContext {
            world: None,
            table: None,
            sample_timeout: Some(Duration::from_secs(2)),
            state_budget: DEFAULT_STATE_BUDGET,
        }
    }
}

impl SolverContext {
    fn limits(&self) -> ExecLimits {
        match self.sample_timeout {
            Some(d) => ExecLimits::with_timeout(d),
            None => ExecLimits::none(),
        }
    }
}

/// Runs one parsed chain under its dialect's executor. The raw answer is
/// not yet normalized.
pub fn execute_chain(
    chain: &ReasoningChain,
    ctx: &SolverContext,
) -> Result<AnswerValue, FailureReason> {
    let limits = ctx.limits();
    match chain.dialect {
        ProgramDialect::Straightline => execute_straightline(chain, &limits),
        ProgramDialect::Datalog => execute_datalog(chain, &limits),
        ProgramDialect::Relation => execute_relation(chain, ctx),
        ProgramDialect::PlanGoal => execute_plangoal(chain, ctx, &limits),
    }
}

fn execute_straightline(
    chain: &ReasoningChain,
    limits: &ExecLimits,
) -> Result<AnswerValue, FailureReason> {
    let mut stmts: Vec<SlStmt> = Vec::new();
    for step in &chain.steps {
        for line in &step.statements {
            let stmt = parse_stmt(line).map_err(|e| {
                FailureReason::new(FailureStage::Parse, format!("step {}: {e}", step.index))
            })?;
            stmts.push(stmt);
        }
    }
    let mut env = Env::new();
    run_statements(&stmts, &mut env, limits).map_err(eval_failure)?;
    answer_from_env(&env).map_err(eval_failure)
}

fn eval_failure(e: EvalError) -> FailureReason {
    let stage = match e {
        EvalError::Timeout => FailureStage::Timeout,
        _ => FailureStage::Execution,
    };
    FailureReason::new(stage, e.to_string())
}

fn execute_datalog(
    chain: &ReasoningChain,
    limits: &ExecLimits,
) -> Result<AnswerValue, FailureReason> {
    let program = parse_datalog(&chain.program_text())
        .map_err(|e| FailureReason::new(FailureStage::Parse, e.to_string()))?;
    let output = program.outputs.last().cloned().ok_or_else(|| {
        FailureReason::new(FailureStage::Execution, "program has no .output directive")
    })?;
    let inst = evaluate_datalog(&program, limits).map_err(datalog_failure)?;
    let derived = boolean_answer(&inst, &output).map_err(datalog_failure)?;
    Ok(AnswerValue::Bool(derived == datalog_polarity(chain)))
}

fn datalog_failure(e: DatalogEvalError) -> FailureReason {
    let stage = match e {
        DatalogEvalError::Timeout => FailureStage::Timeout,
        _ => FailureStage::Execution,
    };
    FailureReason::new(stage, e.to_string())
}

/// Reading of a nonempty output relation. The final step's annotation says
/// which way the query's result maps to yes or no ("The answer is Yes only
/// if ..."); an inverted annotation flips the verdict, and the default is
/// the positive reading.
fn datalog_polarity(chain: &ReasoningChain) -> bool {
    let Some(last) = chain.steps.last() else { return true };
    for line in &last.support {
        let lower = line.to_ascii_lowercase();
        if lower.contains("answer is yes") {
            return true;
        }
        if lower.contains("answer is no") {
            return false;
        }
    }
    true
}

fn execute_relation(
    chain: &ReasoningChain,
    ctx: &SolverContext,
) -> Result<AnswerValue, FailureReason> {
    let mut statements = Vec::new();
    for step in &chain.steps {
        for line in &step.statements {
            let stmt = parse_relation_statement(line).map_err(|e| {
                FailureReason::new(FailureStage::Parse, format!("step {}: {e}", step.index))
            })?;
            statements.push(stmt);
        }
    }
    let program = build_relation_program(&statements)
        .map_err(|e| FailureReason::new(FailureStage::Execution, e.to_string()))?;
    let table = ctx.table.as_ref().unwrap_or_else(|| CompositionTable::builtin());
    let relation = solve_relation_chain(&program, table)
        .map_err(|e| FailureReason::new(FailureStage::Execution, e.to_string()))?;
    Ok(AnswerValue::Str(relation.name().to_string()))
}

fn execute_plangoal(
    chain: &ReasoningChain,
    ctx: &SolverContext,
    limits: &ExecLimits,
) -> Result<AnswerValue, FailureReason> {
    let world = ctx.world.as_ref().ok_or_else(|| {
        FailureReason::new(FailureStage::Execution, "planning requires a world model")
    })?;
    let goal = parse_goal(&chain.program_text())
        .map_err(|e| FailureReason::new(FailureStage::Parse, e.to_string()))?;
    let plan = plan_with_budget(world, &goal, ctx.state_budget, limits).map_err(|e| {
        let stage = match e {
            PlanError::Timeout => FailureStage::Timeout,
            _ => FailureStage::Execution,
        };
        FailureReason::new(stage, e.to_string())
    })?;
    Ok(AnswerValue::Plan(plan))
}

/// One answer's standing in a vote.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteEntry {
    /// The normalized answer the votes were cast for.
    pub answer: AnswerValue,
    pub count: usize,
    /// Smallest sample index that produced this answer; the tie-breaker.
    pub first_seen: usize,
}

/// Vote counts over one query's samples, keyed by the canonical record text
/// of each normalized answer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoteTally {
    pub entries: BTreeMap<String, VoteEntry>,
    /// Samples that produced no candidate: parse, constraint, execution, or
    /// normalization failures. Counts plus discards equal the sample count.
    pub discarded: usize,
}

impl VoteTally {
    pub fn total_votes(&self) -> usize {
        self.entries.values().map(|e| e.count).sum()
    }
}

/// Pools indexed answers by their normalized record text and picks the
/// plurality winner; ties go to the answer with the smallest sample index.
/// Null answers count as discarded. An empty or fully discarded input
/// yields a Null winner.
pub fn majority_vote(answers: &[(usize, AnswerValue)]) -> (AnswerValue, VoteTally) {
    let mut tally = VoteTally::default();
    for (index, answer) in answers {
        if answer.is_null() {
            tally.discarded += 1;
            continue;
        }
        let entry = tally
            .entries
            .entry(answer_to_record(answer))
            .or_insert_with(|| VoteEntry { answer: answer.clone(), count: 0, first_seen: *index });
        entry.count += 1;
        entry.first_seen = entry.first_seen.min(*index);
    }
    let winner = tally
        .entries
        .values()
        .max_by(|a, b| a.count.cmp(&b.count).then(b.first_seen.cmp(&a.first_seen)));
    let chosen = match winner {
        Some(e) => e.answer.clone(),
        None => AnswerValue::Null(FailureReason::new(
            FailureStage::Execution,
            format!("vote: no valid samples among {}", answers.len()),
        )),
    };
    (chosen, tally)
}

/// Stage trace of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub index: usize,
    /// Normalized answer, or Null carrying the failing stage and reason.
    pub answer: AnswerValue,
    /// Constraints the chain violated, when constraint filtering rejected it.
    pub violations: Vec<ConstraintKind>,
    /// Parser salvage notes.
    pub warnings: Vec<String>,
}

/// Everything the pipeline produced for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub id: String,
    /// The vote winner; Null exactly when every sample was discarded.
    pub chosen: AnswerValue,
    pub tally: VoteTally,
    pub samples: Vec<SampleOutcome>,
}

/// How a completion becomes an answer candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnswerMode {
    /// Parse the chain, filter on constraints, execute the program.
    #[default]
    ExecuteChain,
    /// Read the final `Answer:` line from the completion text. Used
    /// with prompts that ask for the answer outright; completions
    /// carry no program, so constraint filtering does not apply.
    DirectAnswer,
}

/// Samples `params.n` completions, turns each into an answer candidate
/// per `mode`, and majority-votes the survivors. A provider failure
/// discards the whole batch.
pub fn run_pipeline(
    q: &Query,
    source: &dyn ChainSource,
    ctx: &SolverContext,
    params: &DecodingParams,
    cs: &ConstraintSet,
    mode: AnswerMode,
) -> PipelineResult {
    let completions = match source.sample(q, params) {
        Ok(c) => c,
        Err(reason) => {
            let samples: Vec<SampleOutcome> = (0..params.n as usize)
                .map(|index| SampleOutcome {
                    index,
                    answer: AnswerValue::Null(reason.clone()),
                    violations: Vec::new(),
                    warnings: Vec::new(),
                })
                .collect();
            let votes: Vec<(usize, AnswerValue)> =
                samples.iter().map(|s| (s.index, s.answer.clone())).collect();
            let (chosen, tally) = majority_vote(&votes);
            return PipelineResult { id: q.id.clone(), chosen, tally, samples };
        }
    };
    let mut samples = Vec::with_capacity(completions.len());
    for (index, text) in completions.iter().enumerate() {
        samples.push(match mode {
            AnswerMode::ExecuteChain => process_sample(q, index, text, ctx, cs),
            AnswerMode::DirectAnswer => process_direct(q, index, text),
        });
    }
    let votes: Vec<(usize, AnswerValue)> =
        samples.iter().map(|s| (s.index, s.answer.clone())).collect();
    let (chosen, tally) = majority_vote(&votes);
    PipelineResult { id: q.id.clone(), chosen, tally, samples }
}

/// Samples `params.n` chains, pipelines each one, and majority-votes the
/// survivors. A provider failure discards the whole batch.
pub fn run_self_consistency(
    q: &Query,
    source: &dyn ChainSource,
    ctx: &SolverContext,
    params: &DecodingParams,
    cs: &ConstraintSet,
) -> PipelineResult {
    run_pipeline(q, source, ctx, params, cs, AnswerMode::ExecuteChain)
}

/// One completion at greedy settings, no constraint filtering. Identical to
/// `run_self_consistency` with n = 1 and the empty constraint set.
pub fn run_greedy(q: &Query, source: &dyn ChainSource, ctx: &SolverContext) -> PipelineResult {
    run_self_consistency(q, source, ctx, &DecodingParams::greedy(), &ConstraintSet::NONE)
}

/// Reads the answer a completion states in its last `Answer:` line.
pub fn extract_direct_answer(text: &str, task: TaskKind) -> Result<AnswerValue, FailureReason> {
    let stated = text
        .lines()
        .rev()
        .find_map(|l| l.trim_start().strip_prefix("Answer:"))
        .ok_or_else(|| {
            FailureReason::new(FailureStage::Parse, "completion has no Answer: line")
        })?;
    record_to_answer(stated.trim(), task)
        .map_err(|e| FailureReason::new(FailureStage::Parse, e.to_string()))
}

fn process_direct(q: &Query, index: usize, text: &str) -> SampleOutcome {
    let answer = match extract_direct_answer(text, q.task) {
        Ok(v) => match normalize_answer(&v, q.task) {
            Ok(v) => v,
            Err(e) => AnswerValue::Null(FailureReason::new(
                FailureStage::Execution,
                format!("normalize: {e}"),
            )),
        },
        Err(reason) => AnswerValue::Null(reason),
    };
    SampleOutcome { index, answer, violations: Vec::new(), warnings: Vec::new() }
}

fn process_sample(
    q: &Query,
    index: usize,
    text: &str,
    ctx: &SolverContext,
    cs: &ConstraintSet,
) -> SampleOutcome {
    let raw = RawChain { text: text.to_string(), task: q.task };
    let parsed = match parse_chain(&raw) {
        Ok(p) => p,
        Err(e) => {
            return SampleOutcome {
                index,
                answer: AnswerValue::Null(FailureReason::new(FailureStage::Parse, e.to_string())),
                violations: Vec::new(),
                warnings: Vec::new(),
            }
        }
    };
    let violations: Vec<ConstraintKind> = check_chain(&parsed.chain, cs)
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.constraint)
        .collect();
    if !violations.is_empty() {
        let names: Vec<String> = violations.iter().map(|c| c.to_string()).collect();
        return SampleOutcome {
            index,
            answer: AnswerValue::Null(FailureReason::new(
                FailureStage::Constraint,
                format!("violated {}", names.join(", ")),
            )),
            violations,
            warnings: parsed.warnings,
        };
    }
    let answer = match execute_chain(&parsed.chain, ctx) {
        Ok(raw_answer) => match normalize_answer(&raw_answer, q.task) {
            Ok(v) => v,
            Err(e) => AnswerValue::Null(FailureReason::new(
                FailureStage::Execution,
                format!("normalize: {e}"),
            )),
        },
        Err(reason) => AnswerValue::Null(reason),
    };
    SampleOutcome { index, answer, violations: Vec::new(), warnings: parsed.warnings }
}

//! The translation stage: few-shot prompt assembly and completion
//! providers.
//!
//! A prompt is a sequence of exemplar blocks joined by two blank
//! lines (the same separator the default stop sequence watches for),
//! followed by the query rendered in the task's framing. Each
//! exemplar block lives in one text file holding the framing lines,
//! an optional nudge line, and the chain body; every ablation
//! variant is derived from that single file at render time, never
//! stored separately.
//!
//! Pool construction parses and executes every exemplar chain, so a
//! pool that loads at all is known to be runnable, and the answer
//! each chain produces is kept for the variant that appends answers
//! instead of executing programs.
//!
//! Completions come from a [`CompletionProvider`]: either a live
//! HTTP endpoint behind a token-budget rate limiter with backoff on
//! throttling, or a replay cache keyed by a stable digest of the
//! request, which makes evaluation runs hermetic and byte-identical.

use crate::chain::{self, parse_chain, ChainParseError, RawChain};
use crate::decoder::{execute_chain, ChainSource, SolverContext};
use crate::metrics::{closest_option, normalize_answer};
use crate::model::{
    answer_to_record, AnswerValue, DecodingParams, FailureReason, FailureStage, ProgramDialect,
    Query, TaskKind, DEFAULT_STOP,
};
use crate::plan::WorldModel;
use crate::straightline::round_half_away;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Which parts of each exemplar the prompt keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PromptVariant {
    /// The exemplar files verbatim.
    Full,
    /// Annotation lines kept, trailing dependency clauses removed.
    NoRationale,
    /// Annotation lines removed except the nudge.
    NoNlButNudge,
    /// All annotation lines removed.
    NoNl,
    /// Full text plus an `Answer:` line; answers are then read from
    /// the completion directly instead of executing a program.
    NoSolver,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 5] = [
        PromptVariant::Full,
        PromptVariant::NoRationale,
        PromptVariant::NoNlButNudge,
        PromptVariant::NoNl,
        PromptVariant::NoSolver,
    ];

    pub fn parse(name: &str) -> Option<PromptVariant> {
        match name {
            "full" => Some(PromptVariant::Full),
            "no-rationale" => Some(PromptVariant::NoRationale),
            "no-nl-nudge" => Some(PromptVariant::NoNlButNudge),
            "no-nl" => Some(PromptVariant::NoNl),
            "no-solver" => Some(PromptVariant::NoSolver),
            _ => None,
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            PromptVariant::Full => "full",
            PromptVariant::NoRationale => "no-rationale",
            PromptVariant::NoNlButNudge => "no-nl-nudge",
            PromptVariant::NoNl => "no-nl",
            PromptVariant::NoSolver => "no-solver",
        }
    }

    /// Completions under this variant carry a final answer rather
    /// than a runnable chain.
    pub fn skips_execution(self) -> bool {
        matches!(self, PromptVariant::NoSolver)
    }

    fn keeps_nudge(self) -> bool {
        !matches!(self, PromptVariant::NoNl)
    }
}

/// One few-shot example: the verbatim file text, its split into
/// framing, nudge, and body lines, and the answer its chain executes
/// to. The split is lossless; joining the parts restores the text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exemplar {
    pub id: String,
    text: String,
    framing: Vec<String>,
    nudge: Option<String>,
    body: Vec<String>,
    /// Canonical record of the executed answer. For choice tasks
    /// this is the option letter after conversion.
    pub answer: String,
    /// Numeric answer rendered to fourteen decimal places; present
    /// only for choice tasks, feeding the conversion prompt.
    prediction: Option<String>,
}

impl Exemplar {
    pub fn text(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("pool has no exemplars")]
    Empty,
    #[error("{id}: {detail}")]
    Layout { id: String, detail: String },
    #[error("{id}: {source}")]
    Chain {
        id: String,
        #[source]
        source: ChainParseError,
    },
    #[error("{id}: {detail}")]
    Execution { id: String, detail: String },
    #[error("reading {path}: {detail}")]
    Io { path: String, detail: String },
}

/// The per-task exemplar set, in prompt order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExemplarPool {
    pub task: TaskKind,
    exemplars: Vec<Exemplar>,
}

macro_rules! shots {
    ($dir:literal : $($n:literal),+ $(,)?) => {
        &[$(($n, include_str!(concat!("../exemplars/", $dir, "/", $n, ".txt")))),+]
    };
}

fn builtin_source(task: TaskKind) -> &'static [(&'static str, &'static str)] {
    match task {
        TaskKind::MathWordProblem => {
            shots!("math_word_problem": "01", "02", "03", "04", "05", "06", "07", "08")
        }
        TaskKind::MultipleChoiceMath => {
            shots!("multiple_choice_math": "01", "02", "03", "04", "05", "06", "07", "08")
        }
        TaskKind::DateUnderstanding => {
            shots!("date_understanding": "01", "02", "03", "04", "05", "06", "07", "08", "09", "10")
        }
        TaskKind::SportsUnderstanding => {
            shots!("sports_understanding": "01", "02", "03", "04", "05", "06", "07", "08", "09", "10")
        }
        TaskKind::StrategyQa => shots!("strategy_qa": "01", "02", "03", "04", "05", "06"),
        TaskKind::Planning => shots!("planning": "01", "02", "03", "04", "05", "06", "07"),
        TaskKind::RelationalInference => {
            shots!("relational_inference": "01", "02", "03", "04", "05", "06", "07", "08")
        }
    }
}

/// The kitchen world the builtin planning exemplars are written
/// against.
pub fn builtin_world() -> &'static WorldModel {
    static WORLD: OnceLock<WorldModel> = OnceLock::new();
    WORLD.get_or_init(|| {
        WorldModel::from_json(include_str!("../data/worlds/kitchen.json"))
            .expect("embedded world parses")
    })
}

impl ExemplarPool {
    /// The embedded pool for a task. Built once; construction
    /// executes every chain, so the pools are known runnable.
    pub fn builtin(task: TaskKind) -> &'static ExemplarPool {
        static POOLS: OnceLock<Vec<(TaskKind, ExemplarPool)>> = OnceLock::new();
        let pools = POOLS.get_or_init(|| {
            let ctx = SolverContext {
                world: Some(builtin_world().clone()),
                ..SolverContext::default()
            };
            TaskKind::ALL
                .iter()
                .map(|&task| {
                    let entries = builtin_source(task).iter().map(|&(n, text)| {
                        (format!("{}/{}", task.name(), n), text.to_string())
                    });
                    let pool = ExemplarPool::from_texts(task, entries, &ctx)
                        .expect("embedded exemplars load");
                    (task, pool)
                })
                .collect()
        });
        &pools
            .iter()
            .find(|(t, _)| *t == task)
            .expect("every task has a pool")
            .1
    }

    /// Builds a pool from (id, block text) pairs, validating each
    /// block by parsing and executing its chain.
    pub fn from_texts(
        task: TaskKind,
        entries: impl IntoIterator<Item = (String, String)>,
        ctx: &SolverContext,
    ) -> Result<ExemplarPool, PoolError> {
        let mut exemplars = Vec::new();
        for (id, raw) in entries {
            exemplars.push(build_exemplar(task, id, raw.trim_end(), ctx)?);
        }
        if exemplars.is_empty() {
            return Err(PoolError::Empty);
        }
        Ok(ExemplarPool { task, exemplars })
    }

    /// Loads every `*.txt` in a directory, in filename order.
    pub fn from_dir(
        task: TaskKind,
        dir: &Path,
        ctx: &SolverContext,
    ) -> Result<ExemplarPool, PoolError> {
        let read_err = |detail: String| PoolError::Io {
            path: dir.display().to_string(),
            detail,
        };
        let mut names = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| read_err(e.to_string()))? {
            let path = entry.map_err(|e| read_err(e.to_string()))?.path();
            if path.extension().is_some_and(|ext| ext == "txt") {
                names.push(path);
            }
        }
        names.sort();
        let mut entries = Vec::new();
        for path in names {
            let text = std::fs::read_to_string(&path).map_err(|e| PoolError::Io {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            entries.push((format!("{}/{}", task.name(), stem), text));
        }
        ExemplarPool::from_texts(task, entries, ctx)
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Exemplar> {
        self.exemplars.iter()
    }
}

fn comment_marker(dialect: ProgramDialect) -> &'static str {
    match dialect {
        ProgramDialect::Straightline | ProgramDialect::Relation => "#",
        ProgramDialect::Datalog => "//",
        ProgramDialect::PlanGoal => ";",
    }
}

fn is_comment(line: &str, marker: &str) -> bool {
    line.trim_start().starts_with(marker)
}

/// Splits a block into framing lines, the nudge line, and the body.
/// Planning blocks have no nudge; their framing runs through the
/// goal-marker line. Everywhere else the nudge is the first comment
/// announcing the program to come.
fn split_block(
    task: TaskKind,
    text: &str,
) -> Result<(Vec<String>, Option<String>, Vec<String>), String> {
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    if task == TaskKind::Planning {
        let goal_at = lines
            .iter()
            .position(|l| l.trim() == chain::PLAN_GOAL_MARKER)
            .ok_or_else(|| format!("no `{}` line", chain::PLAN_GOAL_MARKER))?;
        return Ok((
            lines[..=goal_at].to_vec(),
            None,
            lines[goal_at + 1..].to_vec(),
        ));
    }
    let marker = comment_marker(task.dialect());
    let nudge_at = lines
        .iter()
        .position(|l| {
            l.trim_start()
                .strip_prefix(marker)
                .map(str::trim_start)
                .is_some_and(|rest| {
                    rest.starts_with("To answer this question") || rest.starts_with("Write Python code")
                })
        })
        .ok_or("no nudge line")?;
    Ok((
        lines[..nudge_at].to_vec(),
        Some(lines[nudge_at].clone()),
        lines[nudge_at + 1..].to_vec(),
    ))
}

fn build_exemplar(
    task: TaskKind,
    id: String,
    text: &str,
    ctx: &SolverContext,
) -> Result<Exemplar, PoolError> {
    let layout_err = |detail: String| PoolError::Layout {
        id: id.clone(),
        detail,
    };
    let (framing, nudge, body) = split_block(task, text).map_err(layout_err)?;
    let parsed = parse_chain(&RawChain {
        text: text.to_string(),
        task,
    })
    .map_err(|source| PoolError::Chain {
        id: id.clone(),
        source,
    })?;
    let exec_err = |detail: String| PoolError::Execution {
        id: id.clone(),
        detail,
    };
    let value = execute_chain(&parsed.chain, ctx).map_err(|e| exec_err(e.to_string()))?;
    let normalized = normalize_answer(&value, task).map_err(|e| exec_err(e.to_string()))?;
    let (answer, prediction) = match task {
        TaskKind::MultipleChoiceMath => {
            let AnswerValue::Number(x) = &normalized else {
                return Err(exec_err(format!(
                    "expected a numeric answer, got {}",
                    answer_to_record(&normalized)
                )));
            };
            let line = framing
                .iter()
                .find(|l| l.trim_start().starts_with(OPTION_PREFIX))
                .ok_or_else(|| layout_err(format!("no `{OPTION_PREFIX}` line")))?;
            let options = parse_option_list(line).map_err(layout_err)?;
            let letter = closest_option(x, &options).map_err(|e| exec_err(e.to_string()))?;
            (letter.to_string(), Some(fixed_decimal(x, 14)))
        }
        _ => (answer_to_record(&normalized), None),
    };
    Ok(Exemplar {
        id,
        text: text.to_string(),
        framing,
        nudge,
        body,
        answer,
        prediction,
    })
}

const OPTION_PREFIX: &str = "# Answer option:";

/// Reads `['A)1 hour', 'B)2 hours']` into its items. Items may not
/// contain single quotes; the list syntax has no escape.
fn parse_option_list(line: &str) -> Result<Vec<String>, String> {
    let rest = line
        .trim_start()
        .strip_prefix(OPTION_PREFIX)
        .ok_or("not an option line")?
        .trim();
    let inner = rest
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or("options are not a bracketed list")?;
    let mut items = Vec::new();
    let mut current: Option<String> = None;
    for c in inner.chars() {
        match (&mut current, c) {
            (None, '\'') => current = Some(String::new()),
            (None, c) if c == ',' || c.is_whitespace() => {}
            (None, c) => return Err(format!("unexpected `{c}` between options")),
            (Some(_), '\'') => items.push(current.take().expect("item open")),
            (Some(item), c) => item.push(c),
        }
    }
    if current.is_some() {
        return Err("unterminated option".into());
    }
    if items.is_empty() {
        return Err("empty option list".into());
    }
    Ok(items)
}

/// Renders option items back into the bracketed list form.
fn render_option_list(options: &[String]) -> String {
    if options.is_empty() {
        return "[]".to_string();
    }
    format!("['{}']", options.join("', '"))
}

/// A rational rendered with exactly `places` digits after the point,
/// rounded half away from zero.
fn fixed_decimal(x: &BigRational, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = (round_half_away(x, places as i32) * BigRational::from_integer(scale))
        .to_integer();
    let sign = if scaled.is_negative() { "-" } else { "" };
    let digits = scaled.abs().to_string();
    let digits = if digits.len() <= places as usize {
        format!("{:0>width$}", digits, width = places as usize + 1)
    } else {
        digits
    };
    let split = digits.len() - places as usize;
    format!("{sign}{}.{}", &digits[..split], &digits[split..])
}

fn strip_rationale_line(line: &str, marker: &str) -> String {
    let trimmed = line.trim_start();
    let Some(rest) = trimmed.strip_prefix(marker) else {
        return line.to_string();
    };
    let rest = rest.trim();
    if !rest.ends_with(')') {
        return line.to_string();
    }
    let kept = chain::without_header_clause(rest);
    if kept == rest {
        line.to_string()
    } else {
        let indent = &line[..line.len() - trimmed.len()];
        format!("{indent}{marker} {kept}")
    }
}

/// Non-comment lines with blank runs collapsed and edges trimmed.
fn drop_comments(lines: &[String], marker: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in lines {
        if is_comment(line, marker) {
            continue;
        }
        if line.trim().is_empty() && out.last().is_none_or(|p| p.trim().is_empty()) {
            continue;
        }
        out.push(line.clone());
    }
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    out
}

fn render_block(task: TaskKind, ex: &Exemplar, variant: PromptVariant) -> String {
    let marker = comment_marker(task.dialect());
    match variant {
        PromptVariant::Full => ex.text.clone(),
        PromptVariant::NoSolver => format!("{}\nAnswer: {}", ex.text, ex.answer),
        PromptVariant::NoRationale => {
            let mut lines = ex.framing.clone();
            lines.extend(ex.nudge.iter().cloned());
            lines.extend(ex.body.iter().map(|l| strip_rationale_line(l, marker)));
            lines.join("\n")
        }
        PromptVariant::NoNlButNudge | PromptVariant::NoNl => {
            let mut lines = ex.framing.clone();
            if variant == PromptVariant::NoNlButNudge {
                lines.extend(ex.nudge.iter().cloned());
            }
            lines.extend(drop_comments(&ex.body, marker));
            lines.join("\n")
        }
    }
}

const NUDGE_PROGRAM: &str =
    "# To answer this question, write a Python program to answer the following subquestions:";
const NUDGE_STORE_ANSWER: &str =
    "# Write Python code to solve the following questions. Store your result as a variable named 'answer'.";
const NUDGE_SUBQUESTIONS: &str =
    "# To answer this question, we write a program to answer the following subquestions:";
const NUDGE_DATALOG: &str = "// To answer this question, we answer the following subquestions:";

fn nudge_line(task: TaskKind) -> Option<&'static str> {
    match task {
        TaskKind::MathWordProblem | TaskKind::SportsUnderstanding => Some(NUDGE_PROGRAM),
        TaskKind::MultipleChoiceMath => Some(NUDGE_STORE_ANSWER),
        TaskKind::DateUnderstanding | TaskKind::RelationalInference => Some(NUDGE_SUBQUESTIONS),
        TaskKind::StrategyQa => Some(NUDGE_DATALOG),
        TaskKind::Planning => None,
    }
}

/// The query rendered in the task's framing, ending with the nudge
/// for variants that keep it. Relational questions may carry their
/// context on the first line, split here into the two framing lines.
fn query_block(task: TaskKind, q: &Query, variant: PromptVariant) -> String {
    let mut lines: Vec<String> = Vec::new();
    match task {
        TaskKind::MathWordProblem | TaskKind::DateUnderstanding => {
            lines.push(format!("# Q: {}", q.question));
        }
        TaskKind::SportsUnderstanding => {
            lines.push(format!("# Q: Is the following statement plausible? {}", q.question));
        }
        TaskKind::MultipleChoiceMath => {
            lines.push(format!("# Question: {}", q.question));
            let empty = Vec::new();
            let options = q.options.as_ref().unwrap_or(&empty);
            lines.push(format!("{OPTION_PREFIX} {}", render_option_list(options)));
        }
        TaskKind::StrategyQa => {
            lines.push(format!("// Q: {}", q.question));
        }
        TaskKind::Planning => {
            lines.push(format!("{} {}", chain::PLAN_QUERY_PREFIX, q.question));
            lines.push(chain::PLAN_GOAL_MARKER.to_string());
        }
        TaskKind::RelationalInference => match q.question.split_once('\n') {
            Some((context, question)) => {
                lines.push(format!("# Context: {}", context.trim()));
                lines.push(format!("# Question: {}", question.trim()));
            }
            None => lines.push(format!("# Question: {}", q.question)),
        },
    }
    if variant.keeps_nudge() {
        lines.extend(nudge_line(task).map(str::to_string));
    }
    lines.join("\n")
}

/// Renders the few-shot prompt for a query. Pure: identical inputs
/// produce byte-identical prompts.
pub fn build_prompt(pool: &ExemplarPool, variant: PromptVariant, q: &Query) -> String {
    let mut blocks: Vec<String> = pool
        .exemplars
        .iter()
        .map(|ex| render_block(pool.task, ex, variant))
        .collect();
    blocks.push(query_block(pool.task, q, variant));
    let mut prompt = blocks.join(DEFAULT_STOP);
    prompt.push('\n');
    prompt
}

/// Renders the second-step prompt that converts a numeric prediction
/// into an option letter. Panics unless the pool is a choice-task
/// pool, whose exemplars carry predictions and letter answers.
pub fn build_conversion_prompt(pool: &ExemplarPool, q: &Query, prediction: &BigRational) -> String {
    assert_eq!(
        pool.task,
        TaskKind::MultipleChoiceMath,
        "conversion prompts are defined for choice pools"
    );
    let mut blocks: Vec<String> = Vec::new();
    for ex in &pool.exemplars {
        let question = ex
            .framing
            .iter()
            .find(|l| l.trim_start().starts_with("# Question:"))
            .expect("choice exemplar has a question line");
        let options = ex
            .framing
            .iter()
            .find(|l| l.trim_start().starts_with(OPTION_PREFIX))
            .expect("choice exemplar has an option line");
        let prediction = ex.prediction.as_deref().expect("choice exemplar has a prediction");
        blocks.push(format!(
            "{question}\n{options}\n# Prediction: {prediction}\n# Closest Option: {}",
            ex.answer
        ));
    }
    let empty = Vec::new();
    let options = q.options.as_ref().unwrap_or(&empty);
    blocks.push(format!(
        "# Question: {}\n{OPTION_PREFIX} {}\n# Prediction: {}\n# Closest Option:",
        q.question,
        render_option_list(options),
        fixed_decimal(prediction, 14),
    ));
    blocks.join(DEFAULT_STOP)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot sample {requested} exemplars from a pool of {available}")]
pub struct SampleError {
    pub requested: usize,
    pub available: usize,
}

/// Uniform sample of `k` exemplars without replacement, keeping pool
/// order. Deterministic in the seed; `k` equal to the pool size is
/// the identity.
pub fn sample_exemplars(
    pool: &ExemplarPool,
    k: usize,
    seed: u64,
) -> Result<ExemplarPool, SampleError> {
    if k > pool.len() || k == 0 {
        return Err(SampleError {
            requested: k,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, pool.len(), k).into_vec();
    chosen.sort_unstable();
    Ok(ExemplarPool {
        task: pool.task,
        exemplars: chosen.iter().map(|&i| pool.exemplars[i].clone()).collect(),
    })
}

/// One translation request: the assembled prompt plus decoding
/// parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ProviderRequest {
    pub prompt: String,
    pub params: DecodingParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// On success, `completions.len()` equals the requested `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProviderResponse {
    pub completions: Vec<String>,
    pub usage: Option<Usage>,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("authentication: {0}")]
    Auth(String),
    #[error("throttled after {attempts} attempts")]
    ThrottleExhausted { attempts: u32 },
    #[error("replay cache has no entry for digest {digest}")]
    CacheMiss { digest: String },
    #[error("replay cache entry for digest {digest} is empty")]
    CorruptEntry { digest: String },
    #[error("rate budget: {0}")]
    Budget(String),
    #[error("config: {0}")]
    Config(String),
}

/// A completion backend. Implementations must be safe to call from
/// multiple threads at once.
pub trait CompletionProvider: Send + Sync {
    fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError>;
}

/// Stable digest identifying one sampled completion: the canonical
/// JSON of the request fields plus the sample index, hashed. The
/// canonical form sorts keys, so the digest survives serialization
/// order and platform differences.
pub fn request_digest(prompt: &str, params: &DecodingParams, index: u32) -> String {
    let canonical = json!({
        "index": index,
        "max_tokens": params.max_tokens,
        "n": params.n,
        "prompt": prompt,
        "stop": params.stop,
        "temperature": params.temperature,
    });
    let mut hasher = Sha256::new();
    hasher.update(canonical.to_string().as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("reading {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("cache file is not a digest map: {0}")]
    Corrupt(String),
}

/// Recorded completions keyed by request digest. The JSON file form
/// is a single object mapping digest strings to completion lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplayCache {
    entries: BTreeMap<String, Vec<String>>,
}

impl ReplayCache {
    pub fn new() -> ReplayCache {
        ReplayCache::default()
    }

    pub fn from_json(text: &str) -> Result<ReplayCache, CacheError> {
        let entries = serde_json::from_str(text).map_err(|e| CacheError::Corrupt(e.to_string()))?;
        Ok(ReplayCache { entries })
    }

    pub fn load(path: &Path) -> Result<ReplayCache, CacheError> {
        let text = std::fs::read_to_string(path).map_err(|e| CacheError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        ReplayCache::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("string map serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        std::fs::write(path, self.to_json()).map_err(|e| CacheError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn insert(&mut self, digest: String, completions: Vec<String>) {
        self.entries.insert(digest, completions);
    }

    pub fn get(&self, digest: &str) -> Option<&[String]> {
        self.entries.get(digest).map(Vec::as_slice)
    }

    /// Records a response, one entry per sample index.
    pub fn record(&mut self, prompt: &str, params: &DecodingParams, completions: &[String]) {
        for (i, completion) in completions.iter().enumerate() {
            self.insert(
                request_digest(prompt, params, i as u32),
                vec![completion.clone()],
            );
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Offline provider: every sample must already be in the cache, and
/// a miss is a hard error naming the digest it looked for.
pub struct ReplayProvider {
    cache: ReplayCache,
}

impl ReplayProvider {
    pub fn new(cache: ReplayCache) -> ReplayProvider {
        ReplayProvider { cache }
    }

    pub fn from_file(path: &Path) -> Result<ReplayProvider, CacheError> {
        Ok(ReplayProvider::new(ReplayCache::load(path)?))
    }
}

impl CompletionProvider for ReplayProvider {
    fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let mut completions = Vec::with_capacity(req.params.n as usize);
        for index in 0..req.params.n {
            let digest = request_digest(&req.prompt, &req.params, index);
            let entry = self
                .cache
                .get(&digest)
                .ok_or_else(|| ProviderError::CacheMiss {
                    digest: digest.clone(),
                })?;
            let first = entry
                .first()
                .ok_or(ProviderError::CorruptEntry { digest })?;
            completions.push(first.clone());
        }
        Ok(ProviderResponse {
            completions,
            usage: None,
        })
    }
}

/// Time source; swapped for a simulated clock in tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
    fn sleep(&self, duration: Duration);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

pub const RATE_WINDOW: Duration = Duration::from_secs(60);

/// Sliding-window token budget: the sum of granted estimates inside
/// any window of [`RATE_WINDOW`] never exceeds the budget. Blocks
/// until the oldest grant ages out when the window is full.
pub struct RateLimiter {
    budget: u64,
    clock: Arc<dyn Clock>,
    grants: Mutex<VecDeque<(Instant, u64)>>,
}

impl RateLimiter {
    pub fn new(budget: u64) -> RateLimiter {
        RateLimiter::with_clock(budget, Arc::new(SystemClock))
    }

    pub fn with_clock(budget: u64, clock: Arc<dyn Clock>) -> RateLimiter {
        RateLimiter {
            budget,
            clock,
            grants: Mutex::new(VecDeque::new()),
        }
    }

    pub fn acquire(&self, tokens: u64) -> Result<(), ProviderError> {
        if tokens > self.budget {
            return Err(ProviderError::Budget(format!(
                "request estimate {tokens} exceeds the per-minute budget {}",
                self.budget
            )));
        }
        loop {
            let now = self.clock.now();
            let wait = {
                let mut grants = self.grants.lock().expect("limiter lock");
                while grants
                    .front()
                    .is_some_and(|&(at, _)| now.duration_since(at) >= RATE_WINDOW)
                {
                    grants.pop_front();
                }
                let used: u64 = grants.iter().map(|&(_, n)| n).sum();
                if used + tokens <= self.budget {
                    grants.push_back((now, tokens));
                    return Ok(());
                }
                let (oldest, _) = *grants.front().expect("over budget implies grants");
                RATE_WINDOW - now.duration_since(oldest)
            };
            self.clock.sleep(wait);
        }
    }
}

/// Budget heuristic: a quarter of the prompt bytes plus the full
/// completion allowance for every sample.
pub fn estimate_tokens(prompt: &str, params: &DecodingParams) -> u64 {
    prompt.len() as u64 / 4 + params.n as u64 * params.max_tokens as u64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportReply {
    pub status: u16,
    pub body: String,
}

/// HTTP layer under the live provider; faked in tests.
pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        api_key: &str,
        body: &serde_json::Value,
    ) -> Result<TransportReply, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> UreqTransport {
        UreqTransport {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(120))
                .build(),
        }
    }
}

impl HttpTransport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        api_key: &str,
        body: &serde_json::Value,
    ) -> Result<TransportReply, String> {
        let request = self
            .agent
            .post(url)
            .set("Authorization", &format!("Bearer {api_key}"))
            .set("Content-Type", "application/json");
        match request.send_string(&body.to_string()) {
            Ok(response) => {
                let status = response.status();
                let body = response.into_string().map_err(|e| e.to_string())?;
                Ok(TransportReply { status, body })
            }
            Err(ureq::Error::Status(status, response)) => Ok(TransportReply {
                status,
                body: response.into_string().unwrap_or_default(),
            }),
            Err(e) => Err(e.to_string()),
        }
    }
}

/// Live-endpoint settings. The key itself never appears in config,
/// only the name of the environment variable holding it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub budget_per_minute: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl LiveConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> LiveConfig {
        LiveConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: "CHAINSOLVE_API_KEY".to_string(),
            budget_per_minute: 150_000,
            max_retries: 5,
            initial_backoff_ms: 500,
        }
    }
}

/// Completion-style JSON-over-HTTP provider with retry on
/// throttling. Request shape: `{model, prompt, temperature, n,
/// max_tokens, stop}`; reply shape: `{choices: [{text}], usage?}`.
pub struct LiveProvider {
    config: LiveConfig,
    transport: Box<dyn HttpTransport>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
}

impl LiveProvider {
    pub fn new(config: LiveConfig) -> LiveProvider {
        LiveProvider::with_parts(
            config,
            Box::new(UreqTransport::default()),
            Arc::new(SystemClock),
        )
    }

    pub fn with_parts(
        config: LiveConfig,
        transport: Box<dyn HttpTransport>,
        clock: Arc<dyn Clock>,
    ) -> LiveProvider {
        let limiter = RateLimiter::with_clock(config.budget_per_minute, clock.clone());
        LiveProvider {
            config,
            transport,
            limiter,
            clock,
        }
    }
}

fn parse_completion_reply(body: &str, n: u32) -> Result<ProviderResponse, ProviderError> {
    let reply: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| ProviderError::Transport(format!("unparseable response body: {e}")))?;
    let choices = reply
        .get("choices")
        .and_then(|c| c.as_array())
        .ok_or_else(|| ProviderError::Transport("response has no choices array".to_string()))?;
    let completions = choices
        .iter()
        .map(|choice| {
            choice
                .get("text")
                .and_then(|t| t.as_str())
                .map(str::to_string)
                .ok_or_else(|| ProviderError::Transport("choice has no text field".to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if completions.len() != n as usize {
        return Err(ProviderError::Transport(format!(
            "expected {n} completions, got {}",
            completions.len()
        )));
    }
    let usage = reply.get("usage").map(|u| Usage {
        prompt_tokens: u.get("prompt_tokens").and_then(|x| x.as_u64()).unwrap_or(0),
        completion_tokens: u
            .get("completion_tokens")
            .and_then(|x| x.as_u64())
            .unwrap_or(0),
    });
    Ok(ProviderResponse { completions, usage })
}

impl CompletionProvider for LiveProvider {
    fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        if req.prompt.is_empty() {
            return Err(ProviderError::Config("prompt is empty".to_string()));
        }
        let api_key = std::env::var(&self.config.api_key_env).map_err(|_| {
            ProviderError::Auth(format!(
                "environment variable {} is not set",
                self.config.api_key_env
            ))
        })?;
        self.limiter
            .acquire(estimate_tokens(&req.prompt, &req.params))?;
        let body = json!({
            "model": self.config.model,
            "prompt": req.prompt,
            "temperature": req.params.temperature,
            "n": req.params.n,
            "max_tokens": req.params.max_tokens,
            "stop": req.params.stop,
        });
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            // None marks a throttled attempt, Some carries the
            // transport failure detail.
            let retryable: Option<String> = match self
                .transport
                .post_json(&self.config.endpoint, &api_key, &body)
            {
                Ok(reply) if reply.status == 200 => {
                    return parse_completion_reply(&reply.body, req.params.n);
                }
                Ok(reply) if reply.status == 401 || reply.status == 403 => {
                    return Err(ProviderError::Auth(format!(
                        "endpoint returned status {}",
                        reply.status
                    )));
                }
                Ok(reply) if reply.status == 429 => None,
                Ok(reply) => {
                    return Err(ProviderError::Transport(format!(
                        "endpoint returned status {}",
                        reply.status
                    )));
                }
                Err(detail) => Some(detail),
            };
            if attempts > self.config.max_retries {
                return Err(match retryable {
                    None => ProviderError::ThrottleExhausted { attempts },
                    Some(detail) => ProviderError::Transport(format!(
                        "gave up after {attempts} attempts: {detail}"
                    )),
                });
            }
            self.clock.sleep(backoff);
            backoff *= 2;
        }
    }
}

/// The translation stage as the decoder sees it: build the prompt
/// for a query, call the provider, hand back raw completions.
pub struct Translator {
    pool: ExemplarPool,
    variant: PromptVariant,
    provider: Box<dyn CompletionProvider>,
}

impl Translator {
    pub fn new(
        pool: ExemplarPool,
        variant: PromptVariant,
        provider: Box<dyn CompletionProvider>,
    ) -> Translator {
        Translator {
            pool,
            variant,
            provider,
        }
    }

    pub fn variant(&self) -> PromptVariant {
        self.variant
    }

    pub fn pool(&self) -> &ExemplarPool {
        &self.pool
    }

    pub fn prompt_for(&self, q: &Query) -> String {
        build_prompt(&self.pool, self.variant, q)
    }
}

impl ChainSource for Translator {
    fn sample(&self, q: &Query, params: &DecodingParams) -> Result<Vec<String>, FailureReason> {
        let request = ProviderRequest {
            prompt: self.prompt_for(q),
            params: params.clone(),
        };
        let response = self
            .provider
            .complete(&request)
            .map_err(|e| FailureReason::new(FailureStage::Provider, e.to_string()))?;
        Ok(response.completions)
    }
}

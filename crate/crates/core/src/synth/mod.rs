//! Log statement synthesis for sensitive blocks.
//!
//! Each block is inspected for existing logs, classified into a scenario,
//! and given a draft `LOG.<level>(template, vars...)` statement anchored at
//! the first line of the region that runs under the misconfiguration.

pub mod constraint;
pub mod external;
pub mod rewrite;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::frontend::ir::{
    AssignOp, Literal, LogLevel, MethodDecl, MethodId, Program, Statement, StmtId, StmtKind, ValueId,
};
use crate::taint::{SensitiveBlock, Side};

pub use constraint::{Constraint, ConstraintUnderivable};
pub use external::{ExternalGenerator, GenerationRequest, GenerationResponse};
pub use rewrite::{insert_statement, rewrite_sources, Rewrite};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("external generator unavailable at {endpoint}: {reason}")]
    EndpointUnavailable { endpoint: String, reason: String },
    #[error("external generator response rejected: {0}")]
    ResponseRejected(String),
    #[error(transparent)]
    ConstraintUnderivable(#[from] ConstraintUnderivable),
    #[error("{file}: inserted statement for {block_id} does not reparse: {reason}")]
    ReparseFailure {
        file: String,
        block_id: String,
        reason: String,
    },
}

impl SynthError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthError::EndpointUnavailable { .. } => "synth::EndpointUnavailable",
            SynthError::ResponseRejected(_) => "synth::ResponseRejected",
            SynthError::ConstraintUnderivable(_) => "synth::ConstraintUnderivable",
            SynthError::ReparseFailure { .. } => "synth::ReparseFailure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FallbackPath,
    ServiceSwitch,
    ConfigProcessing,
}

impl Scenario {
    pub fn level(self) -> LogLevel {
        match self {
            Scenario::FallbackPath | Scenario::ServiceSwitch => LogLevel::Warn,
            Scenario::ConfigProcessing => LogLevel::Info,
        }
    }

    fn phrase(self) -> &'static str {
        match self {
            Scenario::FallbackPath => "selects a fallback value",
            Scenario::ServiceSwitch => "switches a service path",
            Scenario::ConfigProcessing => "is applied",
        }
    }

    fn advice(self) -> &'static str {
        match self {
            Scenario::FallbackPath => "if the fallback is unintended",
            Scenario::ServiceSwitch => "if this service path should run",
            Scenario::ConfigProcessing => "if the applied value is unexpected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    KeepExisting,
    Inject,
    InjectAndFlagRedundant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Template,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inspection {
    pub decision: Decision,
    pub kept: Vec<StmtId>,
    pub redundant: Vec<StmtId>,
    pub rationale: Option<String>,
}

/// Where a draft goes: before the statement at (`line`, `col`), or on a new
/// line before `line` when `col` is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Anchor {
    pub line: u32,
    pub col: Option<u32>,
    /// Branch outcome under which the anchor runs.
    pub outcome: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDraft {
    pub block_id: String,
    pub file: String,
    pub method: String,
    pub decision: Decision,
    pub scenario: Scenario,
    pub level: LogLevel,
    /// Line of the input file the statement is inserted before.
    pub insert_line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insert_col: Option<u32>,
    pub message_template: String,
    pub variables: Vec<String>,
    pub guidance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    pub backend: Backend,
    /// The source line that is inserted.
    pub statement: String,
}

/// Per-block outcome, also for blocks that keep their logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub block_id: String,
    pub file: String,
    pub entry_line: u32,
    pub parameters: Vec<String>,
    pub decision: Decision,
    pub scenario: Scenario,
    /// Lines of existing logs suggested for removal.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub redundant_log_lines: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftFailure {
    pub block_id: String,
    pub code: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EnhanceReport {
    pub blocks: Vec<BlockOutcome>,
    pub drafts: Vec<LogDraft>,
    pub injected: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<DraftFailure>,
}

fn side_stmts<'a>(method: &'a MethodDecl, side: &Side) -> Vec<&'a Statement> {
    method
        .blocks
        .iter()
        .filter(|b| side.blocks.contains(&b.id))
        .flat_map(|b| b.statements.iter())
        .collect()
}

fn template_text(program: &Program, m: MethodId, stmt: &Statement) -> String {
    let StmtKind::Call { args, .. } = &stmt.kind else {
        return String::new();
    };
    let Some(first) = args.first() else {
        return String::new();
    };
    match program.def_site(m, *first).and_then(|s| program.stmt(s)).map(|s| &s.kind) {
        Some(StmtKind::ConstString { value }) => value.clone(),
        _ => program.render_value(m, *first),
    }
}

/// Keeps a block's existing logs when one names a parameter key verbatim
/// or logs a tainted value.
pub fn inspect_existing(program: &Program, block: &SensitiveBlock) -> Inspection {
    let Some(m) = block.method_id else {
        return Inspection {
            decision: Decision::Inject,
            kept: Vec::new(),
            redundant: Vec::new(),
            rationale: None,
        };
    };
    let mut kept = Vec::new();
    let mut redundant = Vec::new();
    for &id in &block.existing_logs {
        let Some(stmt) = program.stmt(id) else { continue };
        let template = template_text(program, m, stmt);
        let names_key = block.parameters.iter().any(|k| template.contains(k.as_str()));
        let tainted_arg = match &stmt.kind {
            StmtKind::Call { args, .. } => args.iter().skip(1).any(|a| block.is_tainted(program, *a)),
            _ => false,
        };
        if names_key || tainted_arg {
            kept.push(id);
        } else {
            redundant.push(id);
        }
    }
    if !kept.is_empty() {
        return Inspection {
            decision: Decision::KeepExisting,
            kept,
            redundant: Vec::new(),
            rationale: None,
        };
    }
    if redundant.is_empty() {
        return Inspection {
            decision: Decision::Inject,
            kept,
            redundant,
            rationale: None,
        };
    }
    let lines: Vec<String> = redundant
        .iter()
        .filter_map(|s| program.loc(*s).map(|l| l.line.to_string()))
        .collect();
    let rationale = format!(
        "existing log at line {} names none of {} and logs no configuration-derived value; it can be removed once the new log is in place",
        lines.join(", "),
        quoted_keys(&block.parameters)
    );
    Inspection {
        decision: Decision::InjectAndFlagRedundant,
        kept,
        redundant,
        rationale: Some(rationale),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Target {
    Field(String, String),
    Local(String),
}

struct Write {
    target: Target,
    stmt: StmtId,
    value: ValueId,
}

fn writes_of(method: &MethodDecl) -> Vec<Write> {
    let mut out = Vec::new();
    for s in method.statements() {
        match &s.kind {
            StmtKind::FieldWrite { field, .. } => {
                if let Some(v) = s.uses.last() {
                    out.push(Write {
                        target: Target::Field(field.class.clone(), field.name.clone()),
                        stmt: s.id,
                        value: *v,
                    });
                }
            }
            StmtKind::Phi { .. } | StmtKind::Param { .. } => {}
            _ => {
                for d in &s.defs {
                    if let Some(name) = method.locals.get(d) {
                        out.push(Write {
                            target: Target::Local(name.clone()),
                            stmt: s.id,
                            value: *d,
                        });
                    }
                }
            }
        }
    }
    out
}

fn is_constant_value(program: &Program, m: MethodId, v: ValueId) -> bool {
    match program.def_site(m, v).and_then(|s| program.stmt(s)).map(|s| &s.kind) {
        Some(StmtKind::ConstString { .. }) => true,
        Some(StmtKind::Assign {
            op: AssignOp::Lit, ..
        }) => true,
        Some(StmtKind::Assign {
            op: AssignOp::Neg, ..
        }) => program
            .stmt(program.def_site(m, v).unwrap())
            .and_then(|s| s.uses.first())
            .is_some_and(|u| is_constant_value(program, m, *u)),
        Some(StmtKind::FieldRead { field, .. }) => field.is_static,
        _ => false,
    }
}

fn is_bool_literal(program: &Program, m: MethodId, v: ValueId) -> bool {
    matches!(
        program.def_site(m, v).and_then(|s| program.stmt(s)).map(|s| &s.kind),
        Some(StmtKind::Assign {
            op: AssignOp::Lit,
            literal: Some(Literal::Bool(_)),
        })
    )
}

const SWITCH_PREFIXES: [&str; 6] = ["init", "start", "stop", "enable", "disable", "shutdown"];

fn is_switch_call(stmt: &Statement) -> bool {
    match &stmt.kind {
        StmtKind::Call { callee, .. } => {
            callee.log_level().is_none()
                && callee.name != "<init>"
                && SWITCH_PREFIXES.iter().any(|p| callee.name.starts_with(p))
        }
        _ => false,
    }
}

/// Sides that assign a target also written elsewhere with a
/// configuration-derived value or on the other branch arm.
fn fallback_sides(program: &Program, block: &SensitiveBlock) -> Vec<usize> {
    let Some(m) = block.method_id else { return Vec::new() };
    let method = program.method(m);
    let mut writes = writes_of(method);
    // field writes of other methods count when a taint path runs through them
    let on_path: BTreeSet<StmtId> = block
        .paths
        .iter()
        .flat_map(|p| p.hops.iter().map(|h| h.stmt).chain([p.source]))
        .collect();
    for other in program.method_ids().filter(|o| *o != m) {
        writes.extend(
            writes_of(program.method(other))
                .into_iter()
                .filter(|w| matches!(w.target, Target::Field(..)) && on_path.contains(&w.stmt)),
        );
    }
    let side_sets: Vec<BTreeSet<StmtId>> = block
        .sides
        .iter()
        .map(|s| side_stmts(method, s).iter().map(|st| st.id).collect())
        .collect();
    let mut out = Vec::new();
    for (i, mine) in side_sets.iter().enumerate() {
        let hit = writes.iter().filter(|w| mine.contains(&w.stmt)).any(|w| {
            writes.iter().any(|o| {
                o.target == w.target
                    && !mine.contains(&o.stmt)
                    && (side_sets
                        .iter()
                        .enumerate()
                        .any(|(j, other)| j != i && other.contains(&o.stmt))
                        || on_path.contains(&o.stmt)
                        || (program.stmt_method(o.stmt) == Some(m) && block.is_tainted(program, o.value)))
            })
        });
        if hit {
            out.push(i);
        }
    }
    out
}

fn switch_side(program: &Program, block: &SensitiveBlock) -> Option<(usize, Option<StmtId>)> {
    let m = block.method_id?;
    let method = program.method(m);
    for (i, side) in block.sides.iter().enumerate() {
        let stmts = side_stmts(method, side);
        if block.rejoins_at_exit {
            if let Some(r) = stmts.iter().find(|s| matches!(s.kind, StmtKind::Return)) {
                return Some((i, Some(r.id)));
            }
        }
        let flips = stmts.iter().any(|s| {
            matches!(&s.kind, StmtKind::FieldWrite { .. })
                && s.uses.last().is_some_and(|v| is_bool_literal(program, m, *v))
        });
        if flips || stmts.iter().any(|s| is_switch_call(s)) {
            return Some((i, None));
        }
    }
    None
}

/// Scenario precedence: fallback path, then service switch, then processing.
pub fn classify_scenario(program: &Program, block: &SensitiveBlock) -> Scenario {
    if !fallback_sides(program, block).is_empty() {
        Scenario::FallbackPath
    } else if switch_side(program, block).is_some() {
        Scenario::ServiceSwitch
    } else {
        Scenario::ConfigProcessing
    }
}

fn first_stmt_anchor(program: &Program, block: &SensitiveBlock, side: &Side) -> Option<Anchor> {
    let method = program.method(block.method_id?);
    let entry = method.block(side.entry).and_then(|b| b.statements.first());
    let first = entry.or_else(|| side_stmts(method, side).into_iter().min_by_key(|s| s.id))?;
    let loc = program.loc(first.id)?;
    Some(Anchor {
        line: loc.line,
        col: Some(loc.col),
        outcome: side.is_then,
    })
}

/// Picks where the draft goes for `scenario`.
pub fn choose_anchor(program: &Program, block: &SensitiveBlock, scenario: Scenario) -> Anchor {
    let default = Anchor {
        line: block.entry_line + 1,
        col: None,
        outcome: block.sides.first().is_none_or(|s| s.is_then),
    };
    let Some(m) = block.method_id else { return default };
    let method = program.method(m);
    let then_side = block.sides.iter().find(|s| s.is_then);
    let else_side = block.sides.iter().find(|s| !s.is_then);
    let chosen = match scenario {
        Scenario::FallbackPath => {
            let candidates = fallback_sides(program, block);
            let literal = block.sides.iter().find(|side| {
                writes_of(method).iter().any(|w| {
                    side_stmts(method, side).iter().any(|s| s.id == w.stmt)
                        && is_constant_value(program, m, w.value)
                })
            });
            literal
                .or_else(|| candidates.first().map(|i| &block.sides[*i]))
                .or(else_side)
                .or(then_side)
        }
        Scenario::ServiceSwitch => match switch_side(program, block) {
            Some((i, Some(ret))) => {
                if let Some(loc) = program.loc(ret) {
                    return Anchor {
                        line: loc.line,
                        col: Some(loc.col),
                        outcome: block.sides[i].is_then,
                    };
                }
                Some(&block.sides[i])
            }
            Some((i, None)) => Some(&block.sides[i]),
            None => then_side.or(else_side),
        },
        Scenario::ConfigProcessing => then_side.or(else_side),
    };
    chosen
        .and_then(|side| first_stmt_anchor(program, block, side))
        .unwrap_or(default)
}

/// Names each key in single quotes.
pub fn quoted_keys(keys: &[String]) -> String {
    keys.iter()
        .map(|k| format!("'{k}'"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Escapes `s` for a double-quoted string literal.
pub fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

/// Renders `LOG.<level>("template", vars...);`.
pub fn render_statement(level: LogLevel, template: &str, variables: &[String]) -> String {
    let mut s = format!("LOG.{}(\"{}\"", level.method_name(), escape_literal(template));
    for v in variables {
        s.push_str(", ");
        s.push_str(v);
    }
    s.push_str(");");
    s
}

/// Number of `{}` placeholders in a template.
pub fn placeholder_count(template: &str) -> usize {
    template.matches("{}").count()
}

/// The key a tainted value is bound to, when one path explains it.
fn key_for(program: &Program, block: &SensitiveBlock, value: ValueId) -> Option<String> {
    let m = block.method_id?;
    let def = program.def_site(m, value)?;
    let mut keys: BTreeSet<&String> = BTreeSet::new();
    for p in &block.paths {
        if p.source == def || p.hops.iter().any(|h| h.stmt == def) {
            keys.extend(p.bound_keys.iter());
        }
    }
    match keys.len() {
        1 => keys.into_iter().next().cloned(),
        _ if block.parameters.len() == 1 => block.parameters.first().cloned(),
        _ => keys.into_iter().next().cloned(),
    }
}

/// Drafts the template-backed log statement for one block.
pub fn synthesize_template(
    program: &Program,
    block: &SensitiveBlock,
    scenario: Scenario,
    anchor: Anchor,
) -> (LogDraft, Option<ConstraintUnderivable>) {
    let keys = quoted_keys(&block.parameters);
    let cond = program.stmt(block.entry_stmt).and_then(|s| match &s.kind {
        StmtKind::Branch { cond, .. } => Some((*cond, s.text.clone())),
        _ => None,
    });
    let derived = match cond {
        Some((c, _)) => constraint::derive(program, block, c, anchor.outcome),
        None => Err(ConstraintUnderivable),
    };
    let mut failure = None;
    let (text, variables, guidance) = match derived {
        Ok(c) => {
            let guidance = match c.expected.as_ref().and_then(|(v, lit)| {
                key_for(program, block, *v).map(|k| (k, lit.clone()))
            }) {
                Some((key, lit)) => format!("Please set '{key}' to '{}'.", constraint::sanitize(&lit)),
                None => format!("Please check {keys} {}.", scenario.advice()),
            };
            (c.text, c.variables, guidance)
        }
        Err(e) => {
            failure = Some(e);
            let (value, cond_text) = match (&cond, block.method_id) {
                (Some((c, t)), Some(m)) => (
                    t.clone().unwrap_or_else(|| program.render_value(m, *c)),
                    t.clone().unwrap_or_default(),
                ),
                _ => (String::from("true"), String::new()),
            };
            let text = format!("branch condition ({}) evaluated to {{}}", constraint::sanitize(&cond_text));
            let guidance = format!("Please check {keys} {}.", scenario.advice());
            (text, vec![value], guidance)
        }
    };
    let template = format!("Configuration {keys} {}: {text}. {guidance}", scenario.phrase());
    let level = scenario.level();
    let statement = render_statement(level, &template, &variables);
    let draft = LogDraft {
        block_id: block.block_id.clone(),
        file: block.file.clone(),
        method: block.method.clone(),
        decision: Decision::Inject,
        scenario,
        level,
        insert_line: anchor.line,
        insert_col: anchor.col,
        message_template: template,
        variables,
        guidance,
        rationale: None,
        backend: Backend::Template,
        statement,
    };
    (draft, failure)
}

/// Inspects, classifies and drafts every block.
pub fn draft_blocks(program: &Program, blocks: &[SensitiveBlock]) -> EnhanceReport {
    let mut report = EnhanceReport::default();
    for block in blocks {
        let inspection = inspect_existing(program, block);
        let scenario = classify_scenario(program, block);
        report.blocks.push(BlockOutcome {
            block_id: block.block_id.clone(),
            file: block.file.clone(),
            entry_line: block.entry_line,
            parameters: block.parameters.clone(),
            decision: inspection.decision,
            scenario,
            redundant_log_lines: inspection
                .redundant
                .iter()
                .filter_map(|s| program.loc(*s).map(|l| l.line))
                .collect(),
            rationale: inspection.rationale.clone(),
        });
        if inspection.decision == Decision::KeepExisting {
            continue;
        }
        let anchor = choose_anchor(program, block, scenario);
        let (mut draft, failure) = synthesize_template(program, block, scenario, anchor);
        draft.decision = inspection.decision;
        draft.rationale = inspection.rationale;
        if let Some(e) = failure {
            report.failures.push(DraftFailure {
                block_id: block.block_id.clone(),
                code: SynthError::from(e).code().to_string(),
                reason: "branch condition text used verbatim".into(),
            });
        }
        report.drafts.push(draft);
    }
    report
}

/// Drafts per block with the external generator, falling back to the
/// template draft when it is unreachable or its response fails validation.
pub fn apply_external(
    generator: &ExternalGenerator,
    sources: &BTreeMap<String, String>,
    program: &Program,
    blocks: &[SensitiveBlock],
    report: &mut EnhanceReport,
) {
    for draft in report.drafts.iter_mut() {
        let Some(block) = blocks.iter().find(|b| b.block_id == draft.block_id) else {
            continue;
        };
        let Some(src) = sources.get(&draft.file) else { continue };
        match generator.draft(program, src, block, draft) {
            Ok(d) => *draft = d,
            Err(e) => report.failures.push(DraftFailure {
                block_id: draft.block_id.clone(),
                code: e.code().to_string(),
                reason: e.to_string(),
            }),
        }
    }
}

//! Optional HTTP generator backend.
//!
//! The endpoint receives the whole file, the block's lines, its parameters
//! and existing logs, and answers with the enhanced file plus the inserted
//! statement's parts. Any response that does not amount to exactly one
//! well-formed log insertion is rejected.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{placeholder_count, Backend, LogDraft, SynthError};
use crate::frontend::ir::{Literal, LogLevel, Program};
use crate::frontend::syntax::{parse_statement, ExprKind, StmtAst};
use crate::taint::SensitiveBlock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub block_id: String,
    pub code_whole: String,
    pub code_specified: String,
    pub params: Vec<String>,
    pub existing_logs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub enhanced_code: String,
    pub inserted_line: u32,
    pub level: String,
    pub message_template: String,
    #[serde(default)]
    pub variables: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExternalGenerator {
    pub endpoint: String,
    pub timeout: Duration,
}

fn lines_between(src: &str, from: u32, to: u32) -> String {
    src.lines()
        .enumerate()
        .filter(|(i, _)| (*i as u32 + 1) >= from && (*i as u32 + 1) <= to)
        .map(|(_, l)| l)
        .collect::<Vec<_>>()
        .join("\n")
}

impl ExternalGenerator {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ExternalGenerator {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
        }
    }

    pub fn request_for(program: &Program, src: &str, block: &SensitiveBlock) -> GenerationRequest {
        let existing_logs = block
            .existing_logs
            .iter()
            .filter_map(|s| program.loc(*s))
            .map(|l| lines_between(src, l.line, l.line).trim().to_string())
            .collect();
        GenerationRequest {
            block_id: block.block_id.clone(),
            code_whole: src.to_string(),
            code_specified: lines_between(src, block.checking_span.0, block.handling_span.1.max(block.entry_line)),
            params: block.parameters.clone(),
            existing_logs,
        }
    }

    pub fn call(&self, request: &GenerationRequest) -> Result<GenerationResponse, SynthError> {
        let unavailable = |reason: String| SynthError::EndpointUnavailable {
            endpoint: self.endpoint.clone(),
            reason,
        };
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let response = agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| unavailable(e.to_string()))?;
        response
            .into_json::<GenerationResponse>()
            .map_err(|e| SynthError::ResponseRejected(format!("malformed response body: {e}")))
    }

    /// Asks the endpoint for a draft; `template` supplies decision and
    /// scenario metadata and is what the caller keeps on error.
    pub fn draft(
        &self,
        program: &Program,
        src: &str,
        block: &SensitiveBlock,
        template: &LogDraft,
    ) -> Result<LogDraft, SynthError> {
        let request = Self::request_for(program, src, block);
        let response = self.call(&request)?;
        validate_response(src, block, template, &response)
    }
}

/// Checks that `response` inserts exactly one parseable log call inside the
/// block's region and turns it into a draft.
pub fn validate_response(
    src: &str,
    block: &SensitiveBlock,
    template: &LogDraft,
    response: &GenerationResponse,
) -> Result<LogDraft, SynthError> {
    let reject = |s: String| Err(SynthError::ResponseRejected(s));
    let before: Vec<&str> = src.lines().collect();
    let after: Vec<&str> = response.enhanced_code.lines().collect();
    if after.len() != before.len() + 1 {
        return reject(format!(
            "expected exactly one inserted line, found a change of {} lines",
            after.len() as i64 - before.len() as i64
        ));
    }
    let at = response.inserted_line as usize;
    if at == 0 || at > after.len() {
        return reject(format!("inserted_line {at} is out of range"));
    }
    let mut rest = after.clone();
    let inserted = rest.remove(at - 1);
    if rest != before {
        return reject("code outside the inserted line was modified".into());
    }
    let line = response.inserted_line;
    if line <= block.entry_line || line > block.handling_span.1.max(block.entry_line) + 1 {
        return reject(format!("line {line} is outside the handling region of {}", block.block_id));
    }
    let level: LogLevel = response
        .level
        .parse()
        .map_err(|e: String| SynthError::ResponseRejected(e))?;
    let stmt = parse_statement(inserted.trim())
        .map_err(|e| SynthError::ResponseRejected(format!("inserted line does not parse: {e}")))?;
    let StmtAst::Expr(call) = &stmt.kind else {
        return reject("inserted line is not a call statement".into());
    };
    let ExprKind::Call { recv: Some(recv), name, args } = &call.kind else {
        return reject("inserted line is not a call statement".into());
    };
    if recv.dotted_name().as_deref() != Some("LOG") || name.parse::<LogLevel>().ok() != Some(level) {
        return reject(format!("inserted call is not LOG.{}", level.method_name()));
    }
    let Some(ExprKind::Lit(Literal::Str(message))) = args.first().map(|a| &a.kind) else {
        return reject("first argument is not a string template".into());
    };
    if *message != response.message_template {
        return reject("template argument differs from message_template".into());
    }
    let holes = placeholder_count(message);
    if holes != args.len() - 1 || holes != response.variables.len() {
        return reject(format!(
            "{holes} placeholders for {} arguments and {} variables",
            args.len() - 1,
            response.variables.len()
        ));
    }
    let inner = inserted.trim();
    let mentions_key = block.parameters.iter().any(|k| message.contains(k.as_str()));
    let carries_value = response
        .variables
        .iter()
        .any(|v| template.variables.contains(v));
    if !mentions_key && !carries_value {
        return reject("log names no parameter and carries no parameter value".into());
    }
    Ok(LogDraft {
        level,
        insert_line: line,
        insert_col: None,
        message_template: message.clone(),
        variables: response.variables.clone(),
        backend: Backend::External,
        statement: inner.to_string(),
        ..template.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Decision, Scenario};
    use std::collections::BTreeSet;

    fn block() -> SensitiveBlock {
        SensitiveBlock {
            block_id: "Job.submit:3".into(),
            method: "Job.submit(Configuration):void".into(),
            file: "Job.cj".into(),
            entry_stmt: crate::frontend::ir::StmtId(0),
            entry_line: 3,
            checking_span: (3, 3),
            handling_span: (4, 4),
            parameters: vec!["mapreduce.framework.name".into()],
            path_len: 2,
            paths: Vec::new(),
            existing_logs: Vec::new(),
            method_id: None,
            sides: Vec::new(),
            handling_stmts: BTreeSet::new(),
            tainted_stmts: BTreeSet::new(),
            rejoins_at_exit: true,
        }
    }

    fn template() -> LogDraft {
        LogDraft {
            block_id: "Job.submit:3".into(),
            file: "Job.cj".into(),
            method: "Job.submit(Configuration):void".into(),
            decision: Decision::Inject,
            scenario: Scenario::ServiceSwitch,
            level: LogLevel::Warn,
            insert_line: 4,
            insert_col: Some(7),
            message_template: "t".into(),
            variables: vec!["fw".into()],
            guidance: "g".into(),
            rationale: None,
            backend: Backend::Template,
            statement: "LOG.warn(\"t\");".into(),
        }
    }

    const SRC: &str = "class Job {\n  void submit(String fw) {\n    if (fw.isEmpty()) {\n      return;\n    }\n  }\n}\n";

    fn response(line: &str, at: u32, template: &str, vars: &[&str]) -> GenerationResponse {
        let mut lines: Vec<&str> = SRC.lines().collect();
        lines.insert(at as usize - 1, line);
        GenerationResponse {
            enhanced_code: lines.join("\n") + "\n",
            inserted_line: at,
            level: "WARN".into(),
            message_template: template.into(),
            variables: vars.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn accepts_one_good_insertion() {
        let r = response(
            "      LOG.warn(\"'mapreduce.framework.name' is {}\", fw);",
            4,
            "'mapreduce.framework.name' is {}",
            &["fw"],
        );
        let d = validate_response(SRC, &block(), &template(), &r).unwrap();
        assert_eq!(d.backend, Backend::External);
        assert_eq!(d.insert_line, 4);
    }

    #[test]
    fn rejects_bad_responses() {
        let arity = response("      LOG.warn(\"x {} {}\", fw);", 4, "x {} {}", &["fw"]);
        let not_log = response("      run(fw);", 4, "x", &[]);
        let outside = response("  LOG.warn(\"x {}\", fw);", 2, "x {}", &["fw"]);
        let mut two = response("      LOG.warn(\"x {}\", fw);", 4, "x {}", &["fw"]);
        two.enhanced_code.push_str("extra\n");
        for r in [arity, not_log, outside, two] {
            let e = validate_response(SRC, &block(), &template(), &r).unwrap_err();
            assert_eq!(e.code(), "synth::ResponseRejected", "{e}");
        }
    }

    #[test]
    fn unreachable_endpoint_is_reported() {
        let g = ExternalGenerator {
            endpoint: "http://127.0.0.1:9/generate".into(),
            timeout: Duration::from_millis(500),
        };
        let req = GenerationRequest {
            block_id: "b".into(),
            code_whole: String::new(),
            code_specified: String::new(),
            params: Vec::new(),
            existing_logs: Vec::new(),
        };
        assert_eq!(g.call(&req).unwrap_err().code(), "synth::EndpointUnavailable");
    }
}

//! Applying drafts to source text.

use std::collections::BTreeMap;

use super::{DraftFailure, LogDraft, SynthError};
use crate::frontend::ir::Program;
use crate::frontend::parse_sources;

/// Inserts `stmt` before column `col` of `line` (1-based). Without a column,
/// or when the column is the first token of the line, the statement goes on
/// a new line with the indentation of `line`.
pub fn insert_statement(src: &str, line: u32, col: Option<u32>, stmt: &str) -> String {
    let mut lines: Vec<&str> = src.split_inclusive('\n').collect();
    let idx = (line.max(1) as usize - 1).min(lines.len());
    let target = lines.get(idx).copied().unwrap_or("");
    let indent_len = target.len() - target.trim_start_matches([' ', '\t']).len();
    let first_col = indent_len as u32 + 1;
    let owned;
    match col {
        Some(c) if c > first_col && (c as usize - 1) <= target.len() => {
            let at = c as usize - 1;
            owned = format!("{}{} {}", &target[..at], stmt, &target[at..]);
            lines[idx] = &owned;
            lines.concat()
        }
        _ => {
            let indent = if col.is_none() && idx > 0 {
                // first line of an empty region: one level past the line above
                let above = lines[idx - 1];
                format!("{}  ", &above[..above.len() - above.trim_start_matches([' ', '\t']).len()])
            } else {
                target[..indent_len].to_string()
            };
            if idx == lines.len() && !src.is_empty() && !src.ends_with('\n') {
                owned = format!("\n{indent}{stmt}\n");
            } else {
                owned = format!("{indent}{stmt}\n");
            }
            lines.insert(idx, &owned);
            lines.concat()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Rewrite {
    /// Every input file, rewritten where drafts applied.
    pub files: BTreeMap<String, String>,
    /// Indices of the drafts that were inserted.
    pub applied: Vec<usize>,
    pub failures: Vec<DraftFailure>,
}

fn lands_in_method(program: &Program, file: &str, line: u32, method: &str) -> bool {
    program.all_stmts().any(|(m, s)| {
        s.log_level().is_some()
            && program.loc(s.id).is_some_and(|l| l.file == file && l.line == line)
            && program.method(m).signature.to_string() == method
    })
}

/// Applies drafts bottom-up per file, keeping only insertions after which
/// the program still parses and the new log sits in the block's method.
pub fn rewrite_sources(sources: &BTreeMap<String, String>, drafts: &[LogDraft]) -> Rewrite {
    let mut out = Rewrite {
        files: sources.clone(),
        ..Rewrite::default()
    };
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&drafts[a], &drafts[b]);
        (&da.file, db.insert_line, db.insert_col, &db.block_id).cmp(&(
            &db.file,
            da.insert_line,
            da.insert_col,
            &da.block_id,
        ))
    });
    for i in order {
        let d = &drafts[i];
        let Some(current) = out.files.get(&d.file) else {
            out.failures.push(DraftFailure {
                block_id: d.block_id.clone(),
                code: "synth::ReparseFailure".into(),
                reason: format!("no source for {}", d.file),
            });
            continue;
        };
        let candidate = insert_statement(current, d.insert_line, d.insert_col, &d.statement);
        let mut files = out.files.clone();
        files.insert(d.file.clone(), candidate);
        let pairs: Vec<(String, String)> = files.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let verdict = parse_sources(&pairs)
            .map_err(|e| e.to_string())
            .and_then(|units| Program::new(units).map_err(|e| e.to_string()))
            .and_then(|p| {
                if lands_in_method(&p, &d.file, d.insert_line, &d.method) {
                    Ok(())
                } else {
                    Err(format!("inserted log is not inside {}", d.method))
                }
            });
        match verdict {
            Ok(()) => {
                out.files = files;
                out.applied.push(i);
            }
            Err(reason) => {
                let e = SynthError::ReparseFailure {
                    file: d.file.clone(),
                    block_id: d.block_id.clone(),
                    reason,
                };
                out.failures.push(DraftFailure {
                    block_id: d.block_id.clone(),
                    code: e.code().to_string(),
                    reason: e.to_string(),
                });
            }
        }
    }
    out.applied.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inserts_a_line_with_indentation() {
        let src = "a {\n    return;\n}\n";
        assert_eq!(
            insert_statement(src, 2, Some(5), "LOG.warn(\"x\");"),
            "a {\n    LOG.warn(\"x\");\n    return;\n}\n"
        );
    }

    #[test]
    fn inserts_inline_mid_line() {
        let src = "if (c) { return; }\n";
        assert_eq!(
            insert_statement(src, 1, Some(10), "LOG.warn(\"x\");"),
            "if (c) { LOG.warn(\"x\"); return; }\n"
        );
    }

    #[test]
    fn inserts_into_empty_region() {
        let src = "  if (c) {\n  }\n";
        assert_eq!(
            insert_statement(src, 2, None, "LOG.info(\"x\");"),
            "  if (c) {\n    LOG.info(\"x\");\n  }\n"
        );
    }
}

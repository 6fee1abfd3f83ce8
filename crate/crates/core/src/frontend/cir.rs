//! The CIR interchange document and IR validation.
//!
//! A CIR document is a JSON array of compilation units (a single unit object
//! is accepted as well). Each unit carries `classes[]` and `line_map[]`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::cfg::{dominators, Cfg};
use super::ir::{BlockId, CompilationUnit, MethodDecl, Program, StmtKind, ValueId};
use super::FrontendError;

pub fn emit_cir(units: &[CompilationUnit]) -> String {
    serde_json::to_string_pretty(units).expect("IR serializes")
}

pub fn parse_cir(text: &str, path: &str) -> Result<Vec<CompilationUnit>, FrontendError> {
    let violation = |e: serde_json::Error| FrontendError::SchemaViolation {
        path: path.to_string(),
        reason: e.to_string(),
    };
    let units = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(violation)?
    } else {
        vec![serde_json::from_str::<CompilationUnit>(text).map_err(violation)?]
    };
    validate_units(&units).map_err(|e| match e {
        FrontendError::SchemaViolation { reason, .. } => FrontendError::SchemaViolation {
            path: path.to_string(),
            reason,
        },
        other => other,
    })?;
    Ok(units)
}

fn schema(reason: String) -> FrontendError {
    FrontendError::SchemaViolation {
        path: String::new(),
        reason,
    }
}

/// Checks structural well-formedness, the line map, and the SSA property.
pub fn validate_units(units: &[CompilationUnit]) -> Result<(), FrontendError> {
    Program::new(units.to_vec()).map_err(|e| schema(e.to_string()))?;
    let mut classes = BTreeMap::new();
    for unit in units {
        for class in &unit.classes {
            classes.insert(class.qualified_name.as_str(), class);
        }
    }
    for class in classes.values() {
        // acyclic superclass and nesting relations
        for (what, next) in [
            ("superclass", (|c: &super::ir::ClassDecl| c.superclass.clone()) as fn(&_) -> _),
            ("nesting", |c: &super::ir::ClassDecl| c.nested_in.clone()),
        ] {
            let mut seen = HashSet::new();
            let mut cur = Some(class.qualified_name.clone());
            while let Some(c) = cur {
                if !seen.insert(c.clone()) {
                    return Err(schema(format!(
                        "cyclic {what} relation through `{}`",
                        class.qualified_name
                    )));
                }
                cur = classes.get(c.as_str()).and_then(|d| next(d));
            }
        }
        for method in &class.methods {
            if method.signature.class != class.qualified_name {
                return Err(schema(format!(
                    "method `{}` is listed under class `{}`",
                    method.signature, class.qualified_name
                )));
            }
            validate_method(method)?;
        }
    }
    Ok(())
}

fn validate_method(method: &MethodDecl) -> Result<(), FrontendError> {
    let name = method.signature.to_string();
    let ssa = |reason: String| FrontendError::SsaViolation {
        method: name.clone(),
        reason,
    };
    let bad = |reason: String| schema(format!("{name}: {reason}"));
    if method.blocks.is_empty() {
        return Err(bad("method has no blocks".into()));
    }
    if method.params.len() != method.signature.params.len() {
        return Err(bad("params and signature disagree".into()));
    }
    let cfg = Cfg::of_method(method).map_err(&bad)?;
    let reachable = cfg.reachable_from(0);
    if let Some(i) = reachable.iter().position(|r| !r) {
        return Err(bad(format!("block {} is unreachable from entry", method.blocks[i].id)));
    }
    let index: HashMap<BlockId, usize> = method
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();

    // value → (block index, position within block)
    let mut def_at: HashMap<ValueId, (usize, usize)> = HashMap::new();
    for (b, block) in method.blocks.iter().enumerate() {
        for (i, stmt) in block.statements.iter().enumerate() {
            let terminal = matches!(stmt.kind, StmtKind::Branch { .. } | StmtKind::Return);
            if terminal && i + 1 != block.statements.len() {
                return Err(bad(format!("statement {} must end its block", stmt.id)));
            }
            match &stmt.kind {
                StmtKind::Branch { cond, .. } => {
                    if stmt.uses != [*cond] || !stmt.defs.is_empty() {
                        return Err(bad(format!("branch {} must use exactly its condition", stmt.id)));
                    }
                }
                StmtKind::Call {
                    receiver,
                    args,
                    ret,
                    ..
                } => {
                    let expected: Vec<ValueId> =
                        receiver.iter().chain(args.iter()).copied().collect();
                    if stmt.uses != expected {
                        return Err(bad(format!("call {} uses must be receiver then args", stmt.id)));
                    }
                    if stmt.defs != ret.iter().copied().collect::<Vec<_>>() {
                        return Err(bad(format!("call {} defines something other than ret", stmt.id)));
                    }
                }
                StmtKind::Phi { preds } => {
                    if preds.len() != stmt.uses.len() || stmt.defs.len() != 1 {
                        return Err(bad(format!("phi {} is malformed", stmt.id)));
                    }
                    let actual: BTreeSet<usize> = cfg.preds[b].iter().copied().collect();
                    let mut listed = BTreeSet::new();
                    for p in preds {
                        let Some(&pi) = index.get(p) else {
                            return Err(bad(format!("phi {} names unknown block {p}", stmt.id)));
                        };
                        listed.insert(pi);
                    }
                    if listed != actual {
                        return Err(bad(format!(
                            "phi {} predecessors do not match the CFG",
                            stmt.id
                        )));
                    }
                }
                StmtKind::Param { .. } => {
                    if b != 0 || stmt.defs.len() != 1 {
                        return Err(bad(format!("param {} must sit in the entry block", stmt.id)));
                    }
                }
                StmtKind::FieldWrite { receiver, .. } => {
                    let want = receiver.map_or(1, |_| 2);
                    if stmt.uses.len() != want || receiver.is_some_and(|r| stmt.uses[0] != r) {
                        return Err(bad(format!("field write {} is malformed", stmt.id)));
                    }
                }
                StmtKind::FieldRead { receiver, .. } => {
                    if stmt.uses != receiver.iter().copied().collect::<Vec<_>>() {
                        return Err(bad(format!("field read {} is malformed", stmt.id)));
                    }
                }
                StmtKind::Assign { op, .. } => {
                    if stmt.uses.len() != op.arity() || stmt.defs.len() != 1 {
                        return Err(bad(format!("assign {} has the wrong arity", stmt.id)));
                    }
                }
                StmtKind::ConstString { .. } | StmtKind::Return => {}
            }
            for d in &stmt.defs {
                if def_at.insert(*d, (b, i)).is_some() {
                    return Err(ssa(format!("value {d} is defined more than once")));
                }
            }
        }
    }
    for p in &method.params {
        match def_at.get(p) {
            Some((0, _)) => {}
            _ => return Err(ssa(format!("parameter value {p} is not defined on entry"))),
        }
    }

    let idom = dominators(&cfg.succs, 0);
    let available_at_end = |v: &ValueId, block: usize| -> bool {
        match def_at.get(v) {
            Some(&(db, _)) => super::cfg::dominates(&idom, db, block),
            None => false,
        }
    };
    for (b, block) in method.blocks.iter().enumerate() {
        for (i, stmt) in block.statements.iter().enumerate() {
            if let StmtKind::Phi { preds } = &stmt.kind {
                for (v, p) in stmt.uses.iter().zip(preds) {
                    if !available_at_end(v, index[p]) {
                        return Err(ssa(format!(
                            "value {v} used by phi {} is not defined on the edge from block {p}",
                            stmt.id
                        )));
                    }
                }
                continue;
            }
            for v in &stmt.uses {
                let ok = match def_at.get(v) {
                    Some(&(db, di)) if db == b => di < i,
                    Some(&(db, _)) => super::cfg::dominates(&idom, db, b),
                    None => false,
                };
                if !ok {
                    return Err(ssa(format!(
                        "value {v} is used by statement {} before it is defined",
                        stmt.id
                    )));
                }
            }
        }
    }
    Ok(())
}

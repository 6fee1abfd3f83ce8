//! Turning a branch predicate into constraint text for one outcome.

use std::collections::BTreeSet;

use crate::frontend::ir::{AssignOp, Literal, MethodId, Program, StmtId, StmtKind, ValueId};
use crate::taint::SensitiveBlock;

/// Rendered constraint: `text` holds one `{}` per entry of `variables`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub text: String,
    pub variables: Vec<String>,
    /// (tainted expression, value it must equal) when an equality test
    /// against a literal failed on this outcome.
    pub expected: Option<(ValueId, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("predicate is too opaque to derive a constraint")]
pub struct ConstraintUnderivable;

#[derive(Debug, Clone)]
enum Node {
    Atom { operand: Operand, holds: bool },
    Cmp { op: AssignOp, lhs: Operand, rhs: Operand },
    All(Vec<Node>),
    Any(Vec<Node>),
}

#[derive(Debug, Clone)]
struct Operand {
    value: ValueId,
    tainted: bool,
    text: String,
}

struct Deriver<'a> {
    program: &'a Program,
    block: &'a SensitiveBlock,
    method: MethodId,
    sources: BTreeSet<StmtId>,
}

fn negate(op: AssignOp) -> AssignOp {
    match op {
        AssignOp::Eq => AssignOp::Ne,
        AssignOp::Ne => AssignOp::Eq,
        AssignOp::Lt => AssignOp::Ge,
        AssignOp::Ge => AssignOp::Lt,
        AssignOp::Gt => AssignOp::Le,
        AssignOp::Le => AssignOp::Gt,
        other => other,
    }
}

fn mirror(op: AssignOp) -> AssignOp {
    match op {
        AssignOp::Lt => AssignOp::Gt,
        AssignOp::Gt => AssignOp::Lt,
        AssignOp::Le => AssignOp::Ge,
        AssignOp::Ge => AssignOp::Le,
        other => other,
    }
}

fn words(op: AssignOp) -> &'static str {
    match op {
        AssignOp::Eq => "equals",
        AssignOp::Ne => "does not equal",
        AssignOp::Lt => "is less than",
        AssignOp::Le => "is at most",
        AssignOp::Gt => "is greater than",
        AssignOp::Ge => "is at least",
        _ => "relates to",
    }
}

impl<'a> Deriver<'a> {
    fn def(&self, v: ValueId) -> Option<&'a crate::frontend::ir::Statement> {
        self.program
            .def_site(self.method, v)
            .and_then(|s| self.program.stmt(s))
    }

    /// Follows plain copies to the value that carries the meaning.
    fn strip(&self, mut v: ValueId) -> ValueId {
        for _ in 0..64 {
            match self.def(v).map(|s| (&s.kind, s.uses.as_slice())) {
                Some((
                    StmtKind::Assign {
                        op: AssignOp::Copy,
                        ..
                    },
                    [u],
                )) if !self.program.method(self.method).locals.contains_key(&v) => v = *u,
                _ => return v,
            }
        }
        v
    }

    fn operand(&self, v: ValueId) -> Operand {
        let tainted = self.block.is_tainted(self.program, v);
        let text = match self.def(v).map(|s| &s.kind) {
            Some(StmtKind::ConstString { value }) => format!("'{value}'"),
            Some(StmtKind::Assign {
                op: AssignOp::Lit,
                literal,
            }) => match literal {
                Some(Literal::Str(s)) => format!("'{s}'"),
                Some(l) => l.to_string(),
                None => "null".into(),
            },
            Some(StmtKind::FieldRead { field, .. }) if !tainted => {
                let value = self
                    .program
                    .class(&field.class)
                    .and_then(|c| c.field(&field.name))
                    .and_then(|f| f.string_constant().map(str::to_string));
                match value {
                    Some(s) if field.is_static => format!("'{s}'"),
                    _ => self.program.render_value(self.method, v),
                }
            }
            _ => self.program.render_value(self.method, v),
        };
        Operand {
            value: v,
            tainted,
            text,
        }
    }

    /// Literal value `v` denotes, if it is a string/int/bool literal or a
    /// string constant field.
    fn literal_of(&self, v: ValueId) -> Option<String> {
        match self.def(v).map(|s| &s.kind)? {
            StmtKind::ConstString { value } => Some(value.clone()),
            StmtKind::Assign {
                op: AssignOp::Lit,
                literal: Some(l),
            } => match l {
                Literal::Null => None,
                Literal::Str(s) => Some(s.clone()),
                other => Some(other.to_string()),
            },
            StmtKind::FieldRead { field, .. } if field.is_static => self
                .program
                .class(&field.class)
                .and_then(|c| c.field(&field.name))
                .and_then(|f| f.init.as_ref())
                .and_then(|l| match l {
                    Literal::Null => None,
                    Literal::Str(s) => Some(s.clone()),
                    other => Some(other.to_string()),
                }),
            _ => None,
        }
    }

    fn build(&self, v: ValueId, holds: bool, depth: usize) -> Result<Node, ConstraintUnderivable> {
        if depth > 32 {
            return Err(ConstraintUnderivable);
        }
        let v = self.strip(v);
        let Some(stmt) = self.def(v) else {
            return Err(ConstraintUnderivable);
        };
        match (&stmt.kind, stmt.uses.as_slice()) {
            (StmtKind::Assign { op: AssignOp::Not, .. }, [a]) => self.build(*a, !holds, depth + 1),
            (StmtKind::Assign { op: AssignOp::And, .. }, [a, b]) => {
                let parts = vec![self.build(*a, holds, depth + 1)?, self.build(*b, holds, depth + 1)?];
                Ok(if holds { Node::All(parts) } else { Node::Any(parts) })
            }
            (StmtKind::Assign { op: AssignOp::Or, .. }, [a, b]) => {
                let parts = vec![self.build(*a, holds, depth + 1)?, self.build(*b, holds, depth + 1)?];
                Ok(if holds { Node::Any(parts) } else { Node::All(parts) })
            }
            (StmtKind::Assign { op, .. }, [a, b]) if op.is_comparison() => {
                let op = if holds { *op } else { negate(*op) };
                Ok(self.cmp(op, *a, *b))
            }
            (StmtKind::Call { callee, receiver: Some(r), args, .. }, _)
                if args.len() == 1 && matches!(callee.name.as_str(), "equals" | "equalsIgnoreCase") =>
            {
                let op = if holds { AssignOp::Eq } else { AssignOp::Ne };
                Ok(self.cmp(op, *r, args[0]))
            }
            (StmtKind::Call { .. }, _) if self.block.is_tainted(self.program, v) && !self.sources.contains(&stmt.id) => {
                Err(ConstraintUnderivable)
            }
            _ => Ok(Node::Atom {
                operand: self.operand(v),
                holds,
            }),
        }
    }

    fn cmp(&self, op: AssignOp, a: ValueId, b: ValueId) -> Node {
        let (lhs, rhs) = (self.operand(self.strip(a)), self.operand(self.strip(b)));
        if !lhs.tainted && rhs.tainted {
            Node::Cmp {
                op: mirror(op),
                lhs: rhs,
                rhs: lhs,
            }
        } else {
            Node::Cmp { op, lhs, rhs }
        }
    }
}

fn render(node: &Node, out: &mut Constraint, nested: bool) {
    let side = |o: &Operand, out: &mut Constraint| {
        let shown = sanitize(&o.text);
        if o.tainted {
            out.text.push_str(&format!("{shown}={{}}"));
            out.variables.push(o.text.clone());
        } else {
            out.text.push_str(&shown);
        }
    };
    let push = |s: &str, out: &mut Constraint| out.text.push_str(s);
    match node {
        Node::Atom { operand, holds } => {
            side(operand, out);
            push(if *holds { " is true" } else { " is false" }, out);
        }
        Node::Cmp { op, lhs, rhs } => {
            side(lhs, out);
            push(&format!(" {} ", words(*op)), out);
            side(rhs, out);
        }
        Node::All(parts) | Node::Any(parts) => {
            let joiner = if matches!(node, Node::All(_)) { " and " } else { " or " };
            if nested {
                push("(", out);
            }
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    push(joiner, out);
                }
                render(p, out, true);
            }
            if nested {
                push(")", out);
            }
        }
    }
}

/// Keeps static text from introducing extra placeholders.
pub fn sanitize(s: &str) -> String {
    s.replace("{}", "{ }")
}

/// Derives the constraint that holds when the branch on `cond` evaluates to `outcome`.
pub fn derive(
    program: &Program,
    block: &SensitiveBlock,
    cond: ValueId,
    outcome: bool,
) -> Result<Constraint, ConstraintUnderivable> {
    let method = block.method_id.ok_or(ConstraintUnderivable)?;
    let d = Deriver {
        program,
        block,
        method,
        sources: block.paths.iter().map(|p| p.source).collect(),
    };
    let node = d.build(cond, outcome, 0)?;
    let mut out = Constraint {
        text: String::new(),
        variables: Vec::new(),
        expected: None,
    };
    render(&node, &mut out, false);
    if out.variables.is_empty() {
        return Err(ConstraintUnderivable);
    }
    if let Node::Cmp {
        op: AssignOp::Ne,
        lhs,
        rhs,
    } = &node
    {
        if lhs.tainted && !rhs.tainted {
            if let Some(lit) = d.literal_of(rhs.value) {
                out.expected = Some((lhs.value, lit));
            }
        }
    }
    Ok(out)
}

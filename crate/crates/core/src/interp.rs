//! A small interpreter over the IR, used to replay a program under a given
//! configuration and collect the log lines it prints.
//!
//! Configuration values enter through the builtin `RuntimeConfig.get(key)`,
//! which answers from the supplied map or returns null.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use crate::frontend::ir::{AssignOp, BlockId, Callee, Literal, MethodId, Program, StmtKind, ValueId};

#[derive(Debug)]
pub struct Object {
    pub class: String,
    pub fields: HashMap<String, Value>,
}

#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Str(String),
    Obj(Rc<RefCell<Object>>),
}

impl Value {
    fn from_literal(l: &Literal) -> Value {
        match l {
            Literal::Null => Value::Null,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(i) => Value::Int(*i),
            Literal::Str(s) => Value::Str(s.clone()),
        }
    }

    fn default_for(ty: &str) -> Value {
        match ty {
            "int" | "long" | "short" | "byte" => Value::Int(0),
            "boolean" => Value::Bool(false),
            _ => Value::Null,
        }
    }

    fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Obj(a), Value::Obj(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bool(b) => b.fmt(f),
            Value::Int(i) => i.fmt(f),
            Value::Str(s) => f.write_str(s),
            Value::Obj(o) => write!(f, "{}@obj", o.borrow().class),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InterpError {
    #[error("no method `{0}`")]
    NoMethod(String),
    #[error("{method}: {reason}")]
    Fault { method: String, reason: String },
    #[error("call depth exceeded")]
    TooDeep,
}

impl InterpError {
    pub fn code(&self) -> &'static str {
        match self {
            InterpError::NoMethod(_) => "interp::NoMethod",
            InterpError::Fault { .. } => "interp::Fault",
            InterpError::TooDeep => "interp::TooDeep",
        }
    }
}

/// Replays methods of one program under one configuration.
pub struct Interpreter<'a> {
    program: &'a Program,
    config: BTreeMap<String, String>,
    statics: HashMap<(String, String), Value>,
    /// `LEVEL message` lines in emission order.
    pub log: Vec<String>,
    depth: usize,
}

/// Substitutes `{}` placeholders left to right.
pub fn render_template(template: &str, args: &[Value]) -> String {
    let mut out = String::new();
    let mut rest = template;
    let mut args = args.iter();
    while let Some(i) = rest.find("{}") {
        out.push_str(&rest[..i]);
        match args.next() {
            Some(v) => out.push_str(&v.to_string()),
            None => out.push_str("{}"),
        }
        rest = &rest[i + 2..];
    }
    out.push_str(rest);
    out
}

impl<'a> Interpreter<'a> {
    pub fn new(program: &'a Program, config: BTreeMap<String, String>) -> Self {
        let mut statics = HashMap::new();
        for class in program.classes() {
            for f in class.fields.iter().filter(|f| f.is_static) {
                let v = f
                    .init
                    .as_ref()
                    .map_or_else(|| Value::default_for(&f.ty), Value::from_literal);
                statics.insert((class.qualified_name.clone(), f.name.clone()), v);
            }
        }
        Interpreter {
            program,
            config,
            statics,
            log: Vec::new(),
            depth: 0,
        }
    }

    /// Allocates `class` and runs its no-argument constructor when declared.
    pub fn instantiate(&mut self, class: &str, args: Vec<Value>) -> Result<Value, InterpError> {
        let mut fields = HashMap::new();
        let mut chain = Some(class.to_string());
        while let Some(c) = chain {
            let Some(decl) = self.program.class(&c) else { break };
            for f in decl.fields.iter().filter(|f| !f.is_static) {
                fields.entry(f.name.clone()).or_insert_with(|| {
                    f.init
                        .as_ref()
                        .map_or_else(|| Value::default_for(&f.ty), Value::from_literal)
                });
            }
            chain = decl.superclass.clone();
        }
        let obj = Value::Obj(Rc::new(RefCell::new(Object {
            class: class.to_string(),
            fields,
        })));
        if let Some(m) = self.program.lookup_method(class, "<init>", args.len()) {
            self.invoke(m, Some(obj.clone()), args)?;
        }
        Ok(obj)
    }

    /// Calls `Class.method` on a fresh instance, with default arguments:
    /// objects are freshly instantiated, primitives are zero.
    pub fn run_entry(&mut self, class: &str, method: &str) -> Result<Option<Value>, InterpError> {
        let decl = self
            .program
            .class(class)
            .and_then(|c| c.methods.iter().find(|m| m.signature.name == method))
            .ok_or_else(|| InterpError::NoMethod(format!("{class}.{method}")))?;
        let id = self
            .program
            .lookup_method(class, method, decl.signature.params.len())
            .ok_or_else(|| InterpError::NoMethod(format!("{class}.{method}")))?;
        let mut args = Vec::new();
        for ty in decl.signature.params.clone() {
            if self.program.class(&ty).is_some() {
                args.push(self.instantiate(&ty, Vec::new())?);
            } else {
                args.push(Value::default_for(&ty));
            }
        }
        let this = if decl.is_static {
            None
        } else {
            Some(self.instantiate(class, Vec::new())?)
        };
        self.invoke(id, this, args)
    }

    fn fault(&self, m: MethodId, reason: impl Into<String>) -> InterpError {
        InterpError::Fault {
            method: self.program.method(m).signature.to_string(),
            reason: reason.into(),
        }
    }

    pub fn invoke(&mut self, m: MethodId, this: Option<Value>, args: Vec<Value>) -> Result<Option<Value>, InterpError> {
        if self.depth > 200 {
            return Err(InterpError::TooDeep);
        }
        self.depth += 1;
        let out = self.exec(m, this, args);
        self.depth -= 1;
        out
    }

    fn exec(&mut self, m: MethodId, this: Option<Value>, args: Vec<Value>) -> Result<Option<Value>, InterpError> {
        let program = self.program;
        let method = program.method(m);
        let index: HashMap<BlockId, usize> = method
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        let mut env: HashMap<ValueId, Value> = HashMap::new();
        let get = |env: &HashMap<ValueId, Value>, v: &ValueId| env.get(v).cloned().unwrap_or(Value::Null);
        let mut current = 0usize;
        let mut came_from: Option<BlockId> = None;
        let mut steps = 0usize;
        loop {
            let block = &method.blocks[current];
            let mut jump: Option<BlockId> = None;
            for stmt in &block.statements {
                steps += 1;
                if steps > 100_000 {
                    return Err(self.fault(m, "step limit exceeded"));
                }
                let def = stmt.defs.first().copied();
                let value = match &stmt.kind {
                    StmtKind::Param { index } => Some(if *index < args.len() {
                        args[*index].clone()
                    } else {
                        this.clone().unwrap_or(Value::Null)
                    }),
                    StmtKind::ConstString { value } => Some(Value::Str(value.clone())),
                    StmtKind::Assign { op, literal } => {
                        let u: Vec<Value> = stmt.uses.iter().map(|v| get(&env, v)).collect();
                        Some(self.assign(m, *op, literal.as_ref(), &u)?)
                    }
                    StmtKind::FieldRead { field, receiver } => Some(match receiver {
                        Some(r) => match get(&env, r) {
                            Value::Obj(o) => o.borrow().fields.get(&field.name).cloned().unwrap_or(Value::Null),
                            other => return Err(self.fault(m, format!("read of {} on {other}", field.name))),
                        },
                        None => self
                            .statics
                            .get(&(field.class.clone(), field.name.clone()))
                            .cloned()
                            .unwrap_or(Value::Null),
                    }),
                    StmtKind::FieldWrite { field, receiver } => {
                        let v = get(&env, stmt.uses.last().expect("validated"));
                        match receiver {
                            Some(r) => match get(&env, r) {
                                Value::Obj(o) => {
                                    o.borrow_mut().fields.insert(field.name.clone(), v);
                                }
                                other => return Err(self.fault(m, format!("write of {} on {other}", field.name))),
                            },
                            None => {
                                self.statics.insert((field.class.clone(), field.name.clone()), v);
                            }
                        }
                        None
                    }
                    StmtKind::Call {
                        callee,
                        receiver,
                        args: call_args,
                        ..
                    } => {
                        let recv = receiver.map(|r| get(&env, &r));
                        let vals: Vec<Value> = call_args.iter().map(|v| get(&env, v)).collect();
                        self.call(m, callee, recv, vals)?
                    }
                    StmtKind::Branch {
                        cond,
                        then_block,
                        else_block,
                    } => {
                        jump = match get(&env, cond) {
                            Value::Bool(true) => Some(*then_block),
                            Value::Bool(false) => else_block.or(block.next),
                            other => return Err(self.fault(m, format!("branch on {other}"))),
                        };
                        None
                    }
                    StmtKind::Phi { preds } => {
                        let from = came_from.ok_or_else(|| self.fault(m, "phi in entry block"))?;
                        let i = preds
                            .iter()
                            .position(|p| *p == from)
                            .ok_or_else(|| self.fault(m, "phi lacks the incoming edge"))?;
                        Some(get(&env, &stmt.uses[i]))
                    }
                    StmtKind::Return => {
                        return Ok(stmt.uses.first().map(|v| get(&env, v)));
                    }
                };
                if let (Some(d), Some(v)) = (def, value) {
                    env.insert(d, v);
                }
            }
            let next = jump.or(block.next);
            match next {
                Some(b) => {
                    came_from = Some(block.id);
                    current = index[&b];
                }
                None => return Ok(None),
            }
        }
    }

    fn assign(&self, m: MethodId, op: AssignOp, literal: Option<&Literal>, u: &[Value]) -> Result<Value, InterpError> {
        use Value::*;
        let bad = || self.fault(m, format!("operator {} on {:?}", op.symbol(), u));
        Ok(match (op, u) {
            (AssignOp::Lit, _) => literal.map_or(Null, Value::from_literal),
            (AssignOp::Copy, [a]) => a.clone(),
            (AssignOp::Not, [Bool(a)]) => Bool(!a),
            (AssignOp::Neg, [Int(a)]) => Int(a.wrapping_neg()),
            (AssignOp::Add, [Int(a), Int(b)]) => Int(a.wrapping_add(*b)),
            (AssignOp::Add, [a, b]) if matches!(a, Str(_)) || matches!(b, Str(_)) => Str(format!("{a}{b}")),
            (AssignOp::Sub, [Int(a), Int(b)]) => Int(a.wrapping_sub(*b)),
            (AssignOp::Mul, [Int(a), Int(b)]) => Int(a.wrapping_mul(*b)),
            (AssignOp::Div | AssignOp::Rem, [Int(_), Int(0)]) => return Err(self.fault(m, "division by zero")),
            (AssignOp::Div, [Int(a), Int(b)]) => Int(a.wrapping_div(*b)),
            (AssignOp::Rem, [Int(a), Int(b)]) => Int(a.wrapping_rem(*b)),
            (AssignOp::Eq, [a, b]) => Bool(a.same(b)),
            (AssignOp::Ne, [a, b]) => Bool(!a.same(b)),
            (AssignOp::Lt, [Int(a), Int(b)]) => Bool(a < b),
            (AssignOp::Le, [Int(a), Int(b)]) => Bool(a <= b),
            (AssignOp::Gt, [Int(a), Int(b)]) => Bool(a > b),
            (AssignOp::Ge, [Int(a), Int(b)]) => Bool(a >= b),
            (AssignOp::And, [Bool(a), Bool(b)]) => Bool(*a && *b),
            (AssignOp::Or, [Bool(a), Bool(b)]) => Bool(*a || *b),
            _ => return Err(bad()),
        })
    }

    fn call(&mut self, m: MethodId, callee: &Callee, recv: Option<Value>, args: Vec<Value>) -> Result<Option<Value>, InterpError> {
        if let Some(level) = callee.log_level() {
            let template = args.first().map(|v| v.to_string()).unwrap_or_default();
            self.log.push(format!("{level} {}", render_template(&template, &args[1.min(args.len())..])));
            return Ok(None);
        }
        if callee.name == "<init>" {
            return self.instantiate(&callee.class, args).map(Some);
        }
        let dispatch = match &recv {
            Some(Value::Obj(o)) => o.borrow().class.clone(),
            _ => callee.class.clone(),
        };
        if let Some(target) = self.program.lookup_method(&dispatch, &callee.name, callee.arity) {
            let this = if self.program.method(target).is_static { None } else { recv };
            return self.invoke(target, this, args);
        }
        self.builtin(m, callee, recv, args).map(Some)
    }

    fn builtin(&mut self, m: MethodId, callee: &Callee, recv: Option<Value>, args: Vec<Value>) -> Result<Value, InterpError> {
        use Value::*;
        let parse_int = |s: &str| s.trim().parse::<i64>().map(Int).map_err(|_| self.fault(m, format!("cannot parse `{s}` as int")));
        Ok(match (callee.class.as_str(), callee.name.as_str(), recv.as_ref(), args.as_slice()) {
            ("RuntimeConfig", "get", None, [Str(k)]) => self.config.get(k).map_or(Null, |v| Str(v.clone())),
            ("Integer" | "Long", "parseInt" | "parseLong", None, [Str(s)]) => parse_int(s)?,
            ("Boolean", "parseBoolean", None, [Str(s)]) => Bool(s.trim().eq_ignore_ascii_case("true")),
            ("Boolean", "parseBoolean", None, [Null]) => Bool(false),
            ("Math", "max", None, [Int(a), Int(b)]) => Int(*a.max(b)),
            ("Math", "min", None, [Int(a), Int(b)]) => Int(*a.min(b)),
            ("Math", "abs", None, [Int(a)]) => Int(a.wrapping_abs()),
            ("String", "valueOf", None, [a]) => Str(a.to_string()),
            (_, "equals", Some(a), [b]) => Bool(a.same(b)),
            (_, "equalsIgnoreCase", Some(Str(a)), [Str(b)]) => Bool(a.eq_ignore_ascii_case(b)),
            (_, "equalsIgnoreCase", Some(Str(_)), [_]) => Bool(false),
            (_, "isEmpty", Some(Str(a)), []) => Bool(a.is_empty()),
            (_, "length", Some(Str(a)), []) => Int(a.chars().count() as i64),
            (_, "trim", Some(Str(a)), []) => Str(a.trim().to_string()),
            (_, "toLowerCase", Some(Str(a)), []) => Str(a.to_lowercase()),
            (_, "toUpperCase", Some(Str(a)), []) => Str(a.to_uppercase()),
            (_, "startsWith", Some(Str(a)), [Str(b)]) => Bool(a.starts_with(b.as_str())),
            (_, "endsWith", Some(Str(a)), [Str(b)]) => Bool(a.ends_with(b.as_str())),
            (_, "contains", Some(Str(a)), [Str(b)]) => Bool(a.contains(b.as_str())),
            (_, "toString", Some(a), []) => Str(a.to_string()),
            (_, _, Some(Null), _) => return Err(self.fault(m, format!("null receiver for {callee}"))),
            _ => Null,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_sources;

    #[test]
    fn replays_logs_with_configuration() {
        let src = "class Conf {\n  public String get(String k) {\n    return RuntimeConfig.get(k);\n  }\n}\nclass Job {\n  void submit(Conf conf) {\n    String fw = conf.get(\"fw\");\n    if (!\"yarn\".equals(fw)) {\n      LOG.warn(\"fw is {}\", fw);\n      return;\n    }\n    LOG.info(\"submitted\");\n  }\n}\n";
        let p = Program::new(parse_sources(&[("a.cj".into(), src.into())]).unwrap()).unwrap();
        let mut i = Interpreter::new(&p, BTreeMap::from([("fw".to_string(), "local".to_string())]));
        i.run_entry("Job", "submit").unwrap();
        assert_eq!(i.log, vec!["WARN fw is local".to_string()]);
        let mut i = Interpreter::new(&p, BTreeMap::from([("fw".to_string(), "yarn".to_string())]));
        i.run_entry("Job", "submit").unwrap();
        assert_eq!(i.log, vec!["INFO submitted".to_string()]);
    }
}

//! Lowering from the surface AST to SSA IR.
//!
//! Control flow is structured (`if`/`else` and `return` only), so SSA is built
//! directly: each `if` gets a join block with phis for the variables whose
//! value differs between incoming edges.

use std::collections::{BTreeMap, BTreeSet};

use super::ir::{
    AssignOp, Block, BlockId, Callee, ClassDecl, CompilationUnit, FieldDecl, FieldRef, Literal,
    MethodDecl, Signature, SrcLoc, Statement, StmtId, StmtKind, ValueId, LOG_CLASS,
};
use super::syntax::{ClassAst, Expr, ExprKind, FileAst, MethodAst, Pos, Stmt, StmtAst, SyntaxError};

/// A parsed source file awaiting lowering.
pub struct ParsedFile<'a> {
    pub path: String,
    pub src: &'a str,
    pub ast: FileAst,
}

#[derive(Debug)]
pub struct LowerError {
    pub path: String,
    pub error: SyntaxError,
}

#[derive(Debug, Clone)]
struct ClassInfo {
    superclass: Option<String>,
    fields: Vec<FieldDecl>,
    /// name/arity → (return type, is_static)
    methods: BTreeMap<(String, usize), (String, bool)>,
}

/// Program-wide symbol table shared by all files.
struct Symbols {
    classes: BTreeMap<String, ClassInfo>,
}

impl Symbols {
    /// Resolves a (possibly dotted) type name as seen from inside `scope`.
    fn resolve_class(&self, name: &str, scope: &str) -> Option<String> {
        let mut prefix = scope.to_string();
        loop {
            let candidate = if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            };
            if self.classes.contains_key(&candidate) {
                return Some(candidate);
            }
            if prefix.is_empty() {
                return None;
            }
            prefix = prefix.rsplit_once('.').map_or(String::new(), |(p, _)| p.to_string());
        }
    }

    fn resolve_type(&self, ty: &str, scope: &str) -> String {
        let (base, dims) = match ty.find('[') {
            Some(i) => (&ty[..i], &ty[i..]),
            None => (ty, ""),
        };
        match self.resolve_class(base, scope) {
            Some(c) => format!("{c}{dims}"),
            None => ty.to_string(),
        }
    }

    fn supers(&self, class: &str) -> Vec<String> {
        let mut chain = Vec::new();
        let mut cur = Some(class.to_string());
        while let Some(c) = cur {
            if chain.contains(&c) {
                break;
            }
            cur = self.classes.get(&c).and_then(|i| i.superclass.clone());
            chain.push(c);
        }
        chain
    }

    fn find_field(&self, class: &str, name: &str) -> Option<(String, FieldDecl)> {
        self.supers(class).into_iter().find_map(|c| {
            let info = self.classes.get(&c)?;
            let f = info.fields.iter().find(|f| f.name == name)?;
            Some((c, f.clone()))
        })
    }

    fn find_method(&self, class: &str, name: &str, arity: usize) -> Option<(String, String, bool)> {
        self.supers(class).into_iter().find_map(|c| {
            let info = self.classes.get(&c)?;
            let (ret, is_static) = info.methods.get(&(name.to_string(), arity))?;
            Some((c, ret.clone(), *is_static))
        })
    }
}

fn collect_classes(
    class: &ClassAst,
    outer: Option<&str>,
    out: &mut Vec<(String, Option<String>, ClassAst)>,
) {
    let qualified = match outer {
        Some(o) => format!("{o}.{}", class.name),
        None => class.name.clone(),
    };
    out.push((qualified.clone(), outer.map(str::to_string), class.clone()));
    for inner in &class.inner {
        collect_classes(inner, Some(&qualified), out);
    }
}

/// Lowers parsed files into compilation units. Statement ids are assigned
/// sequentially across files in the given order.
pub fn lower_files(files: &[ParsedFile<'_>]) -> Result<Vec<CompilationUnit>, LowerError> {
    let mut per_file = Vec::new();
    let mut symbols = Symbols {
        classes: BTreeMap::new(),
    };
    for file in files {
        let mut classes = Vec::new();
        for class in &file.ast.classes {
            collect_classes(class, None, &mut classes);
        }
        for (name, _, ast) in &classes {
            if symbols.classes.contains_key(name) {
                return Err(LowerError {
                    path: file.path.clone(),
                    error: SyntaxError::at(ast.pos, format!("class `{name}` declared twice")),
                });
            }
            symbols.classes.insert(
                name.clone(),
                ClassInfo {
                    superclass: ast.extends.clone(),
                    fields: Vec::new(),
                    methods: BTreeMap::new(),
                },
            );
        }
        per_file.push(classes);
    }
    // second pass: resolve superclasses, field types and method signatures
    for (file, classes) in files.iter().zip(&per_file) {
        for (name, _, ast) in classes {
            let err = |pos: Pos, msg: String| LowerError {
                path: file.path.clone(),
                error: SyntaxError::at(pos, msg),
            };
            let superclass = ast
                .extends
                .as_ref()
                .map(|s| symbols.resolve_class(s, name).unwrap_or_else(|| s.clone()));
            let mut fields = Vec::new();
            for f in &ast.fields {
                if fields.iter().any(|g: &FieldDecl| g.name == f.name) {
                    return Err(err(f.pos, format!("field `{}` declared twice", f.name)));
                }
                fields.push(FieldDecl {
                    name: f.name.clone(),
                    ty: symbols.resolve_type(&f.ty, name),
                    init: f.init.clone(),
                    is_static: f.is_static,
                });
            }
            let mut methods = BTreeMap::new();
            for m in &ast.methods {
                let ret = match &m.ret {
                    Some(r) => symbols.resolve_type(r, name),
                    None => "void".to_string(),
                };
                if methods
                    .insert((m.name.clone(), m.params.len()), (ret, m.is_static))
                    .is_some()
                {
                    return Err(err(
                        m.pos,
                        format!("method `{}/{}` declared twice", m.name, m.params.len()),
                    ));
                }
            }
            let info = symbols.classes.get_mut(name).expect("collected");
            info.superclass = superclass;
            info.fields = fields;
            info.methods = methods;
        }
    }
    for name in symbols.classes.keys() {
        let chain = symbols.supers(name);
        let last = chain.last().expect("non-empty");
        if symbols
            .classes
            .get(last)
            .and_then(|i| i.superclass.as_ref())
            .is_some_and(|s| chain.contains(s))
        {
            let (path, pos) = files
                .iter()
                .zip(&per_file)
                .find_map(|(f, cs)| {
                    cs.iter()
                        .find(|(n, _, _)| n == name)
                        .map(|(_, _, a)| (f.path.clone(), a.pos))
                })
                .expect("class comes from some file");
            return Err(LowerError {
                path,
                error: SyntaxError::at(pos, format!("cyclic inheritance involving `{name}`")),
            });
        }
    }

    let mut next_stmt = 0u32;
    let mut units = Vec::new();
    for (file, classes) in files.iter().zip(&per_file) {
        let mut unit = CompilationUnit {
            path: file.path.clone(),
            classes: Vec::new(),
            line_map: BTreeMap::new(),
            unresolved: Vec::new(),
        };
        let mut unresolved = BTreeSet::new();
        for (name, outer, ast) in classes {
            let info = &symbols.classes[name];
            let mut decl = ClassDecl {
                qualified_name: name.clone(),
                superclass: info.superclass.clone(),
                nested_in: outer.clone(),
                fields: info.fields.clone(),
                methods: Vec::new(),
                line: ast.pos.line,
            };
            for m in &ast.methods {
                let mut lowerer = MethodLowerer {
                    symbols: &symbols,
                    class: name,
                    file: &file.path,
                    src: file.src,
                    next_stmt: &mut next_stmt,
                    next_value: 0,
                    blocks: Vec::new(),
                    current: None,
                    vars: BTreeMap::new(),
                    types: BTreeMap::new(),
                    locals: BTreeMap::new(),
                    this: None,
                    line_map: &mut unit.line_map,
                    unresolved: &mut unresolved,
                    loc: Pos::default(),
                };
                let method = lowerer.lower_method(m).map_err(|error| LowerError {
                    path: file.path.clone(),
                    error,
                })?;
                decl.methods.push(method);
            }
            unit.classes.push(decl);
        }
        unit.unresolved = unresolved.into_iter().collect();
        units.push(unit);
    }
    Ok(units)
}

/// What a name or field-access chain denotes.
enum Denot {
    Value(ValueId, String),
    Class(String),
}

struct MethodLowerer<'a> {
    symbols: &'a Symbols,
    class: &'a str,
    file: &'a str,
    src: &'a str,
    next_stmt: &'a mut u32,
    next_value: u32,
    blocks: Vec<Block>,
    /// Index of the block receiving statements; `None` after a `return`.
    current: Option<usize>,
    vars: BTreeMap<String, ValueId>,
    types: BTreeMap<String, String>,
    locals: BTreeMap<ValueId, String>,
    this: Option<ValueId>,
    line_map: &'a mut BTreeMap<StmtId, SrcLoc>,
    unresolved: &'a mut BTreeSet<String>,
    /// Position of the source statement being lowered.
    loc: Pos,
}

const STRING: &str = "String";
const UNKNOWN: &str = "Object";

fn literal_type(lit: &Literal) -> &'static str {
    match lit {
        Literal::Null => "null",
        Literal::Bool(_) => "boolean",
        Literal::Int(_) => "int",
        Literal::Str(_) => STRING,
    }
}

/// Return types of the few library methods the corpus relies on.
fn external_return_type(class: &str, name: &str) -> &'static str {
    match (class, name) {
        (_, "equals" | "equalsIgnoreCase" | "isEmpty" | "startsWith" | "endsWith" | "contains") => {
            "boolean"
        }
        ("Boolean", "parseBoolean") => "boolean",
        (_, "length" | "parseInt" | "max" | "min" | "abs" | "size") => "int",
        (_, "trim" | "toLowerCase" | "toUpperCase" | "toString" | "valueOf" | "substring") => {
            STRING
        }
        ("RuntimeConfig", "get") => STRING,
        _ => UNKNOWN,
    }
}

impl<'a> MethodLowerer<'a> {
    fn new_value(&mut self) -> ValueId {
        let v = ValueId(self.next_value);
        self.next_value += 1;
        v
    }

    fn new_block(&mut self) -> usize {
        let id = BlockId(self.blocks.len() as u32);
        self.blocks.push(Block {
            id,
            statements: Vec::new(),
            next: None,
        });
        self.blocks.len() - 1
    }

    fn emit(&mut self, kind: StmtKind, uses: Vec<ValueId>, defs: Vec<ValueId>, text: Option<String>) {
        let id = StmtId(*self.next_stmt);
        *self.next_stmt += 1;
        self.line_map.insert(
            id,
            SrcLoc {
                file: self.file.to_string(),
                line: self.loc.line,
                col: self.loc.col,
            },
        );
        let block = self.current.expect("emitting into a live block");
        self.blocks[block].statements.push(Statement {
            id,
            kind,
            uses,
            defs,
            text,
        });
    }

    fn err(&self, pos: Pos, msg: impl Into<String>) -> SyntaxError {
        SyntaxError::at(pos, msg)
    }

    fn lower_method(&mut self, m: &MethodAst) -> Result<MethodDecl, SyntaxError> {
        let entry = self.new_block();
        self.current = Some(entry);
        self.loc = m.pos;
        let mut params = Vec::new();
        let mut param_types = Vec::new();
        for (index, (ty, name)) in m.params.iter().enumerate() {
            let ty = self.symbols.resolve_type(ty, self.class);
            let v = self.new_value();
            self.emit(StmtKind::Param { index }, Vec::new(), vec![v], Some(name.clone()));
            if self.vars.insert(name.clone(), v).is_some() {
                return Err(self.err(m.pos, format!("duplicate parameter `{name}`")));
            }
            self.types.insert(name.clone(), ty.clone());
            self.locals.insert(v, name.clone());
            params.push(v);
            param_types.push(ty);
        }
        if !m.is_static {
            // the receiver is modeled as one extra parameter after the declared ones
            let v = self.new_value();
            self.emit(
                StmtKind::Param { index: m.params.len() },
                Vec::new(),
                vec![v],
                Some("this".into()),
            );
            self.locals.insert(v, "this".into());
            self.this = Some(v);
        }
        self.lower_stmts(&m.body)?;
        let ret = match &m.ret {
            Some(r) => self.symbols.resolve_type(r, self.class),
            None => "void".to_string(),
        };
        Ok(MethodDecl {
            signature: Signature {
                class: self.class.to_string(),
                name: m.name.clone(),
                params: param_types,
                ret,
            },
            params,
            blocks: std::mem::take(&mut self.blocks),
            is_public: m.is_public,
            is_static: m.is_static,
            locals: std::mem::take(&mut self.locals),
            line: m.pos.line,
            end_line: m.end.line,
        })
    }

    fn lower_stmts(&mut self, stmts: &[Stmt]) -> Result<(), SyntaxError> {
        for stmt in stmts {
            if self.current.is_none() {
                return Err(self.err(stmt.pos, "unreachable statement"));
            }
            self.loc = stmt.pos;
            self.lower_stmt(stmt)?;
        }
        Ok(())
    }

    fn lower_stmt(&mut self, stmt: &Stmt) -> Result<(), SyntaxError> {
        match &stmt.kind {
            StmtAst::Local { ty, name, init } => {
                if self.vars.contains_key(name) {
                    return Err(self.err(stmt.pos, format!("variable `{name}` already defined")));
                }
                let ty = self.symbols.resolve_type(ty, self.class);
                self.bind_local(name, ty, init)
            }
            StmtAst::Assign { target, value } => self.lower_assign(target, value),
            StmtAst::Expr(e) => {
                self.lower_expr(e)?;
                Ok(())
            }
            StmtAst::Return(value) => {
                let uses = match value {
                    Some(e) => vec![self.lower_value(e)?.0],
                    None => Vec::new(),
                };
                let text = value.as_ref().map(|e| e.text(self.src).to_string());
                self.emit(StmtKind::Return, uses, Vec::new(), text);
                self.current = None;
                Ok(())
            }
            StmtAst::If { cond, then, els } => self.lower_if(stmt.pos, cond, then, els.as_deref()),
        }
    }

    fn bind_local(&mut self, name: &str, ty: String, init: &Expr) -> Result<(), SyntaxError> {
        let (v, fresh) = self.lower_value(init)?;
        let v = if fresh && !self.locals.contains_key(&v) {
            v
        } else {
            let copy = self.new_value();
            self.emit(
                StmtKind::Assign {
                    op: AssignOp::Copy,
                    literal: None,
                },
                vec![v],
                vec![copy],
                Some(init.text(self.src).to_string()),
            );
            copy
        };
        self.locals.insert(v, name.to_string());
        self.vars.insert(name.to_string(), v);
        self.types.insert(name.to_string(), ty);
        Ok(())
    }

    fn lower_assign(&mut self, target: &Expr, value: &Expr) -> Result<(), SyntaxError> {
        if let ExprKind::Name(name) = &target.kind {
            if self.vars.contains_key(name) {
                let ty = self.types[name].clone();
                return self.bind_local(name, ty, value);
            }
            if let Some((owner, field)) = self.lookup_bare_field(name) {
                let v = self.lower_value(value)?.0;
                return self.write_field(target, owner, field, None, v);
            }
            // assignment to an undeclared name introduces a local
            let ty = self.value_type(value)?;
            return self.bind_local(name, ty, value);
        }
        let ExprKind::Field(base, name) = &target.kind else {
            return Err(self.err(target.pos, "left side of `=` is not assignable"));
        };
        match self.denote(base)? {
            Denot::Class(class) => {
                let (owner, field) = match self.symbols.find_field(&class, name) {
                    Some((owner, f)) => (owner, f),
                    None => (class.clone(), unknown_field(name, true)),
                };
                let v = self.lower_value(value)?.0;
                self.write_field(target, owner, field, None, v)
            }
            Denot::Value(recv, ty) => {
                let (owner, field) = match self.symbols.find_field(&ty, name) {
                    Some((owner, f)) => (owner, f),
                    None => (ty.clone(), unknown_field(name, false)),
                };
                let v = self.lower_value(value)?.0;
                self.write_field(target, owner, field, Some(recv), v)
            }
        }
    }

    fn write_field(
        &mut self,
        target: &Expr,
        owner: String,
        field: FieldDecl,
        receiver: Option<ValueId>,
        value: ValueId,
    ) -> Result<(), SyntaxError> {
        let receiver = match receiver {
            Some(r) => Some(r),
            None if field.is_static => None,
            None => Some(
                self.this
                    .ok_or_else(|| self.err(target.pos, "instance field used in static method"))?,
            ),
        };
        let mut uses: Vec<ValueId> = receiver.into_iter().collect();
        uses.push(value);
        self.emit(
            StmtKind::FieldWrite {
                field: FieldRef {
                    class: owner,
                    name: field.name,
                    is_static: field.is_static,
                },
                receiver,
            },
            uses,
            Vec::new(),
            Some(target.text(self.src).to_string()),
        );
        Ok(())
    }

    fn lower_if(
        &mut self,
        pos: Pos,
        cond: &Expr,
        then: &[Stmt],
        els: Option<&[Stmt]>,
    ) -> Result<(), SyntaxError> {
        let c = self.lower_value(cond)?.0;
        let branch_block = self.current.expect("live block");
        let before = self.vars.clone();
        let before_types = self.types.clone();
        let then_block = self.new_block();
        let else_block = els.map(|_| self.new_block());
        self.emit(
            StmtKind::Branch {
                cond: c,
                then_block: BlockId(then_block as u32),
                else_block: else_block.map(|b| BlockId(b as u32)),
            },
            vec![c],
            Vec::new(),
            Some(cond.text(self.src).to_string()),
        );

        // each arm ends in (exit block, variable state) or None when it returned
        let mut arms: Vec<(usize, BTreeMap<String, ValueId>)> = Vec::new();
        self.current = Some(then_block);
        self.lower_stmts(then)?;
        if let Some(end) = self.current {
            arms.push((end, self.vars.clone()));
        }
        self.vars = before.clone();
        self.types = before_types.clone();
        match (els, else_block) {
            (Some(els), Some(eb)) => {
                self.current = Some(eb);
                self.lower_stmts(els)?;
                if let Some(end) = self.current {
                    arms.push((end, self.vars.clone()));
                }
                self.vars = before.clone();
                self.types = before_types;
            }
            _ => arms.push((branch_block, before.clone())),
        }
        if arms.is_empty() {
            self.current = None;
            return Ok(());
        }
        let join = self.new_block();
        for (end, _) in &arms {
            self.blocks[*end].next = Some(BlockId(join as u32));
        }
        self.current = Some(join);
        self.loc = pos;
        for (name, _) in before {
            let incoming: Vec<ValueId> = arms.iter().map(|(_, vars)| vars[&name]).collect();
            if incoming.iter().all(|v| *v == incoming[0]) {
                self.vars.insert(name, incoming[0]);
                continue;
            }
            let phi = self.new_value();
            let preds = arms.iter().map(|(b, _)| BlockId(*b as u32)).collect();
            self.emit(StmtKind::Phi { preds }, incoming, vec![phi], Some(name.clone()));
            self.locals.insert(phi, name.clone());
            self.vars.insert(name, phi);
        }
        Ok(())
    }

    fn lookup_bare_field(&self, name: &str) -> Option<(String, FieldDecl)> {
        if let Some(found) = self.symbols.find_field(self.class, name) {
            return Some(found);
        }
        // static fields of enclosing classes
        let mut scope = self.class;
        while let Some((outer, _)) = scope.rsplit_once('.') {
            if let Some((owner, f)) = self.symbols.find_field(outer, name) {
                if f.is_static {
                    return Some((owner, f));
                }
            }
            scope = outer;
        }
        None
    }

    fn denote(&mut self, e: &Expr) -> Result<Denot, SyntaxError> {
        if let Some(c) = self.static_denot(e) {
            return Ok(Denot::Class(c));
        }
        let ty = self.value_type(e)?;
        let (v, _) = self.lower_value(e)?;
        Ok(Denot::Value(v, ty))
    }

    /// Static type of `e`, computed without emitting statements.
    fn value_type(&self, e: &Expr) -> Result<String, SyntaxError> {
        Ok(match &e.kind {
            ExprKind::Lit(l) => literal_type(l).to_string(),
            ExprKind::This => self.class.to_string(),
            ExprKind::Name(name) => {
                if let Some(t) = self.types.get(name) {
                    t.clone()
                } else if let Some((_, f)) = self.lookup_bare_field(name) {
                    f.ty
                } else {
                    UNKNOWN.to_string()
                }
            }
            ExprKind::Field(base, name) => {
                let owner = match self.static_denot(base) {
                    Some(c) => c,
                    None => self.value_type(base)?,
                };
                match self.symbols.find_field(&owner, name) {
                    Some((_, f)) => f.ty,
                    None => UNKNOWN.to_string(),
                }
            }
            ExprKind::Call { recv, name, args } => {
                let owner = match recv {
                    None => self.class.to_string(),
                    Some(r) => match self.static_denot(r) {
                        Some(c) => c,
                        None => self.value_type(r)?,
                    },
                };
                match self.symbols.find_method(&owner, name, args.len()) {
                    Some((_, ret, _)) => ret,
                    None => external_return_type(&owner, name).to_string(),
                }
            }
            ExprKind::New { class, .. } => self
                .symbols
                .resolve_class(class, self.class)
                .unwrap_or_else(|| class.clone()),
            ExprKind::Unary(AssignOp::Not, _) => "boolean".into(),
            ExprKind::Unary(_, _) => "int".into(),
            ExprKind::Binary(op, l, r) => match op {
                AssignOp::Add
                    if self.value_type(l)? == STRING || self.value_type(r)? == STRING =>
                {
                    STRING.into()
                }
                AssignOp::Add | AssignOp::Sub | AssignOp::Mul | AssignOp::Div | AssignOp::Rem => {
                    "int".into()
                }
                _ => "boolean".into(),
            },
        })
    }

    /// The class an expression names when used as a static receiver.
    fn static_denot(&self, e: &Expr) -> Option<String> {
        match &e.kind {
            ExprKind::Name(name) => {
                if self.vars.contains_key(name) || self.lookup_bare_field(name).is_some() {
                    return None;
                }
                self.symbols.resolve_class(name, self.class).or_else(|| {
                    name.chars()
                        .next()
                        .is_some_and(|c| c.is_ascii_uppercase())
                        .then(|| name.clone())
                })
            }
            ExprKind::Field(base, name) => {
                let c = self.static_denot(base)?;
                if self.symbols.find_field(&c, name).is_some() {
                    return None;
                }
                let nested = format!("{c}.{name}");
                self.symbols.classes.contains_key(&nested).then_some(nested)
            }
            _ => None,
        }
    }

    /// Lowers `e` and requires it to produce a value.
    fn lower_value(&mut self, e: &Expr) -> Result<(ValueId, bool), SyntaxError> {
        let (v, fresh) = self.lower_expr(e)?;
        let v = v.ok_or_else(|| self.err(e.pos, "expression has no value"))?;
        Ok((v, fresh))
    }

    /// Returns the value (if any) and whether it was defined by a statement
    /// emitted for this very expression.
    fn lower_expr(&mut self, e: &Expr) -> Result<(Option<ValueId>, bool), SyntaxError> {
        let text = Some(e.text(self.src).to_string());
        match &e.kind {
            ExprKind::Lit(Literal::Str(s)) => {
                let v = self.new_value();
                self.emit(StmtKind::ConstString { value: s.clone() }, Vec::new(), vec![v], text);
                Ok((Some(v), true))
            }
            ExprKind::Lit(l) => {
                let v = self.new_value();
                self.emit(
                    StmtKind::Assign {
                        op: AssignOp::Lit,
                        literal: Some(l.clone()),
                    },
                    Vec::new(),
                    vec![v],
                    text,
                );
                Ok((Some(v), true))
            }
            ExprKind::This => match self.this {
                Some(v) => Ok((Some(v), false)),
                None => Err(self.err(e.pos, "`this` used in static method")),
            },
            ExprKind::Name(name) => {
                if let Some(v) = self.vars.get(name) {
                    return Ok((Some(*v), false));
                }
                if let Some((owner, field)) = self.lookup_bare_field(name) {
                    return self.read_field(owner, field, None, e.pos, text);
                }
                Err(self.err(e.pos, format!("unresolved name `{name}`")))
            }
            ExprKind::Field(base, name) => {
                if let Some(c) = self.static_denot(base) {
                    let (owner, field) = match self.symbols.find_field(&c, name) {
                        Some(found) => found,
                        None => (c, unknown_field(name, true)),
                    };
                    return self.read_field(owner, field, None, e.pos, text);
                }
                let ty = self.value_type(base)?;
                let (recv, _) = self.lower_value(base)?;
                let (owner, field) = match self.symbols.find_field(&ty, name) {
                    Some(found) => found,
                    None => (ty, unknown_field(name, false)),
                };
                self.read_field(owner, field, Some(recv), e.pos, text)
            }
            ExprKind::Unary(op, inner) => {
                let (a, _) = self.lower_value(inner)?;
                let v = self.new_value();
                self.emit(
                    StmtKind::Assign {
                        op: *op,
                        literal: None,
                    },
                    vec![a],
                    vec![v],
                    text,
                );
                Ok((Some(v), true))
            }
            ExprKind::Binary(op, l, r) => {
                let (a, _) = self.lower_value(l)?;
                let (b, _) = self.lower_value(r)?;
                let v = self.new_value();
                self.emit(
                    StmtKind::Assign {
                        op: *op,
                        literal: None,
                    },
                    vec![a, b],
                    vec![v],
                    text,
                );
                Ok((Some(v), true))
            }
            ExprKind::New { class, args } => {
                let class = self
                    .symbols
                    .resolve_class(class, self.class)
                    .unwrap_or_else(|| class.clone());
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.lower_value(a)?.0);
                }
                let callee = Callee::new(&class, "<init>", vals.len());
                let declared = self
                    .symbols
                    .classes
                    .get(&class)
                    .is_some_and(|i| i.methods.contains_key(&("<init>".to_string(), vals.len())));
                let known_class = self.symbols.classes.contains_key(&class);
                if !declared && (!known_class || !vals.is_empty()) {
                    self.unresolved.insert(callee.to_string());
                }
                let ret = self.new_value();
                self.emit(
                    StmtKind::Call {
                        callee,
                        receiver: None,
                        args: vals.clone(),
                        ret: Some(ret),
                    },
                    vals,
                    vec![ret],
                    text,
                );
                Ok((Some(ret), true))
            }
            ExprKind::Call { recv, name, args } => self.lower_call(e, recv.as_deref(), name, args),
        }
    }

    fn read_field(
        &mut self,
        owner: String,
        field: FieldDecl,
        receiver: Option<ValueId>,
        pos: Pos,
        text: Option<String>,
    ) -> Result<(Option<ValueId>, bool), SyntaxError> {
        let receiver = match receiver {
            Some(r) => Some(r),
            None if field.is_static => None,
            None => Some(
                self.this
                    .ok_or_else(|| self.err(pos, "instance field used in static method"))?,
            ),
        };
        let v = self.new_value();
        self.emit(
            StmtKind::FieldRead {
                field: FieldRef {
                    class: owner,
                    name: field.name,
                    is_static: field.is_static,
                },
                receiver,
            },
            receiver.into_iter().collect(),
            vec![v],
            text,
        );
        Ok((Some(v), true))
    }

    fn lower_call(
        &mut self,
        e: &Expr,
        recv: Option<&Expr>,
        name: &str,
        args: &[Expr],
    ) -> Result<(Option<ValueId>, bool), SyntaxError> {
        let text = Some(e.text(self.src).to_string());
        let (owner, receiver) = match recv {
            None => (self.class.to_string(), None),
            Some(r) => match self.static_denot(r) {
                Some(c) => (c, None),
                None => {
                    let ty = self.value_type(r)?;
                    let (v, _) = self.lower_value(r)?;
                    (ty, Some(v))
                }
            },
        };
        let mut vals = Vec::new();
        for a in args {
            vals.push(self.lower_value(a)?.0);
        }
        let (callee, returns, receiver) = match self.symbols.find_method(&owner, name, vals.len()) {
            Some((declaring, ret, is_static)) => {
                let receiver = match receiver {
                    Some(r) => Some(r),
                    None if is_static => None,
                    // implicit `this` for instance calls written without a receiver
                    None if recv.is_none() => self.this,
                    None => None,
                };
                (Callee::new(declaring, name, vals.len()), ret != "void", receiver)
            }
            None => {
                let callee = Callee::new(&owner, name, vals.len());
                if owner != LOG_CLASS {
                    self.unresolved.insert(callee.to_string());
                }
                let returns = callee.log_level().is_none();
                (callee, returns, receiver)
            }
        };
        let mut uses: Vec<ValueId> = receiver.into_iter().collect();
        uses.extend(&vals);
        let ret = returns.then(|| self.new_value());
        self.emit(
            StmtKind::Call {
                callee,
                receiver,
                args: vals,
                ret,
            },
            uses,
            ret.into_iter().collect(),
            text,
        );
        Ok((ret, ret.is_some()))
    }
}

fn unknown_field(name: &str, is_static: bool) -> FieldDecl {
    FieldDecl {
        name: name.to_string(),
        ty: UNKNOWN.to_string(),
        init: None,
        is_static,
    }
}

//! SSA intermediate representation and the program-wide index over it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! id_newtype {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_newtype!(StmtId);
id_newtype!(ValueId);
id_newtype!(BlockId);

/// Source position of the source-level statement an IR statement came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SrcLoc {
    pub file: String,
    pub line: u32,
    #[serde(default = "one")]
    pub col: u32,
}

fn one() -> u32 {
    1
}

impl fmt::Display for SrcLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Null,
    Bool(bool),
    Int(i64),
    Str(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => f.write_str("null"),
            Literal::Bool(b) => b.fmt(f),
            Literal::Int(i) => i.fmt(f),
            Literal::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// Callee reference: declaring class (or static receiver type), name, arity.
///
/// Serialized as `Class.name/arity`; constructors are named `<init>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Callee {
    pub class: String,
    pub name: String,
    pub arity: usize,
}

impl Callee {
    pub fn new(class: impl Into<String>, name: impl Into<String>, arity: usize) -> Self {
        Callee {
            class: class.into(),
            name: name.into(),
            arity,
        }
    }

    /// Logging calls are written `LOG.<level>(template, args...)`.
    pub fn log_level(&self) -> Option<LogLevel> {
        if self.class != LOG_CLASS {
            return None;
        }
        self.name.parse().ok()
    }
}

pub const LOG_CLASS: &str = "LOG";

impl fmt::Display for Callee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}/{}", self.class, self.name, self.arity)
    }
}

impl FromStr for Callee {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (path, arity) = s
            .rsplit_once('/')
            .ok_or_else(|| format!("callee `{s}` lacks `/arity`"))?;
        let arity = arity
            .parse()
            .map_err(|_| format!("callee `{s}` has a bad arity"))?;
        let (class, name) = path
            .rsplit_once('.')
            .ok_or_else(|| format!("callee `{s}` lacks `Class.`"))?;
        if class.is_empty() || name.is_empty() {
            return Err(format!("callee `{s}` is incomplete"));
        }
        Ok(Callee::new(class, name, arity))
    }
}

impl Serialize for Callee {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Callee {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Five-level severity scale, ordered TRACE < DEBUG < INFO < WARN < ERROR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogLevel {
    Trace,
    Debug,
    Info,
    Warn,
    Error,
}

impl LogLevel {
    pub const ALL: [LogLevel; 5] = [
        LogLevel::Trace,
        LogLevel::Debug,
        LogLevel::Info,
        LogLevel::Warn,
        LogLevel::Error,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Method name used in `LOG.<level>(...)`.
    pub fn method_name(self) -> &'static str {
        match self {
            LogLevel::Trace => "trace",
            LogLevel::Debug => "debug",
            LogLevel::Info => "info",
            LogLevel::Warn => "warn",
            LogLevel::Error => "error",
        }
    }
}

impl fmt::Display for LogLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.method_name().to_ascii_uppercase())
    }
}

impl FromStr for LogLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trace" => Ok(LogLevel::Trace),
            "debug" => Ok(LogLevel::Debug),
            "info" => Ok(LogLevel::Info),
            "warn" | "warning" => Ok(LogLevel::Warn),
            "error" => Ok(LogLevel::Error),
            _ => Err(format!("unknown log level `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldRef {
    pub class: String,
    pub name: String,
    #[serde(default, rename = "static")]
    pub is_static: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignOp {
    Copy,
    Lit,
    Not,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl AssignOp {
    pub fn arity(self) -> usize {
        match self {
            AssignOp::Lit => 0,
            AssignOp::Copy | AssignOp::Not | AssignOp::Neg => 1,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Copy | AssignOp::Lit => "",
            AssignOp::Not => "!",
            AssignOp::Neg => "-",
            AssignOp::Add => "+",
            AssignOp::Sub => "-",
            AssignOp::Mul => "*",
            AssignOp::Div => "/",
            AssignOp::Rem => "%",
            AssignOp::Eq => "==",
            AssignOp::Ne => "!=",
            AssignOp::Lt => "<",
            AssignOp::Le => "<=",
            AssignOp::Gt => ">",
            AssignOp::Ge => ">=",
            AssignOp::And => "&&",
            AssignOp::Or => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            AssignOp::Eq | AssignOp::Ne | AssignOp::Lt | AssignOp::Le | AssignOp::Gt | AssignOp::Ge
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StmtKind {
    /// Defines the method parameter at `index` on entry.
    Param { index: usize },
    Assign {
        op: AssignOp,
        /// Present exactly for `lit`; a JSON `null` here is the null literal.
        #[serde(
            default,
            skip_serializing_if = "Option::is_none",
            deserialize_with = "present_literal"
        )]
        literal: Option<Literal>,
    },
    ConstString { value: String },
    FieldRead {
        field: FieldRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        receiver: Option<ValueId>,
    },
    /// Writes the last use to `field`; the receiver, when present, is the first use.
    FieldWrite {
        field: FieldRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        receiver: Option<ValueId>,
    },
    Call {
        callee: Callee,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        receiver: Option<ValueId>,
        args: Vec<ValueId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ret: Option<ValueId>,
    },
    Branch {
        cond: ValueId,
        #[serde(rename = "then")]
        then_block: BlockId,
        #[serde(rename = "else", default, skip_serializing_if = "Option::is_none")]
        else_block: Option<BlockId>,
    },
    /// `uses[i]` flows in from `preds[i]`.
    Phi { preds: Vec<BlockId> },
    Return,
}

fn present_literal<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Literal>, D::Error> {
    Literal::deserialize(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StmtId,
    #[serde(flatten)]
    pub kind: StmtKind,
    #[serde(default)]
    pub uses: Vec<ValueId>,
    #[serde(default)]
    pub defs: Vec<ValueId>,
    /// Source text of the expression this statement computes, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Statement {
    pub fn is_branch(&self) -> bool {
        matches!(self.kind, StmtKind::Branch { .. })
    }

    pub fn callee(&self) -> Option<&Callee> {
        match &self.kind {
            StmtKind::Call { callee, .. } => Some(callee),
            _ => None,
        }
    }

    pub fn log_level(&self) -> Option<LogLevel> {
        self.callee().and_then(Callee::log_level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub statements: Vec<Statement>,
    /// Fall-through successor; also the false target of a branch without `else`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<BlockId>,
}

impl Block {
    pub fn successors(&self) -> Vec<BlockId> {
        match self.statements.last().map(|s| &s.kind) {
            Some(StmtKind::Branch {
                then_block,
                else_block,
                ..
            }) => {
                let mut succs = vec![*then_block];
                succs.extend(else_block.or(self.next));
                succs
            }
            Some(StmtKind::Return) => Vec::new(),
            _ => self.next.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub class: String,
    pub name: String,
    pub params: Vec<String>,
    pub ret: String,
}

impl Signature {
    pub fn callee(&self) -> Callee {
        Callee::new(&self.class, &self.name, self.params.len())
    }

    pub fn returns_value(&self) -> bool {
        self.ret != "void"
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}({}) -> {}",
            self.class,
            self.name,
            self.params.join(", "),
            self.ret
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub signature: Signature,
    pub params: Vec<ValueId>,
    pub blocks: Vec<Block>,
    pub is_public: bool,
    #[serde(default)]
    pub is_static: bool,
    /// Source-level variable names of SSA values.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub locals: BTreeMap<ValueId, String>,
    /// First and last source line of the declaration.
    #[serde(default)]
    pub line: u32,
    #[serde(default)]
    pub end_line: u32,
}

impl MethodDecl {
    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.blocks.iter().flat_map(|b| b.statements.iter())
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Literal>,
    #[serde(default, rename = "static")]
    pub is_static: bool,
}

impl FieldDecl {
    pub fn string_constant(&self) -> Option<&str> {
        match &self.init {
            Some(Literal::Str(s)) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub qualified_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superclass: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested_in: Option<String>,
    #[serde(default)]
    pub fields: Vec<FieldDecl>,
    #[serde(default)]
    pub methods: Vec<MethodDecl>,
    #[serde(default)]
    pub line: u32,
}

impl ClassDecl {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompilationUnit {
    pub path: String,
    pub classes: Vec<ClassDecl>,
    #[serde(with = "line_map_serde")]
    pub line_map: BTreeMap<StmtId, SrcLoc>,
    /// Calls whose callee could not be resolved; they are modeled as opaque.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved: Vec<String>,
}

mod line_map_serde {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        id: StmtId,
        file: String,
        line: u32,
        #[serde(default = "one")]
        col: u32,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<StmtId, SrcLoc>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(map.iter().map(|(id, loc)| Entry {
            id: *id,
            file: loc.file.clone(),
            line: loc.line,
            col: loc.col,
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<StmtId, SrcLoc>, D::Error> {
        let entries = Vec::<Entry>::deserialize(deserializer)?;
        let mut map = BTreeMap::new();
        for e in entries {
            let loc = SrcLoc {
                file: e.file,
                line: e.line,
                col: e.col,
            };
            if map.insert(e.id, loc).is_some() {
                return Err(serde::de::Error::custom(format!(
                    "statement {} appears twice in line_map",
                    e.id
                )));
            }
        }
        Ok(map)
    }
}

/// Dense handle for a method within a [`Program`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StmtPos {
    pub method: MethodId,
    pub block: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy)]
struct MethodSlot {
    unit: usize,
    class: usize,
    method: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ProgramError {
    #[error("statement id {0} is used more than once")]
    DuplicateStmt(StmtId),
    #[error("class `{0}` is declared more than once")]
    DuplicateClass(String),
    #[error("statement {0} has no line_map entry")]
    MissingLine(StmtId),
    #[error("line_map entry for unknown statement {0}")]
    StrayLine(StmtId),
}

/// A set of compilation units plus lookup tables across them.
#[derive(Debug, Clone)]
pub struct Program {
    units: Vec<CompilationUnit>,
    methods: Vec<MethodSlot>,
    stmt_pos: HashMap<StmtId, StmtPos>,
    classes: BTreeMap<String, (usize, usize)>,
    by_callee: HashMap<Callee, MethodId>,
    def_sites: HashMap<(MethodId, ValueId), StmtId>,
}

impl Program {
    pub fn new(units: Vec<CompilationUnit>) -> Result<Self, ProgramError> {
        let mut program = Program {
            units,
            methods: Vec::new(),
            stmt_pos: HashMap::new(),
            classes: BTreeMap::new(),
            by_callee: HashMap::new(),
            def_sites: HashMap::new(),
        };
        for (u, unit) in program.units.iter().enumerate() {
            for (c, class) in unit.classes.iter().enumerate() {
                if program
                    .classes
                    .insert(class.qualified_name.clone(), (u, c))
                    .is_some()
                {
                    return Err(ProgramError::DuplicateClass(class.qualified_name.clone()));
                }
                for (m, method) in class.methods.iter().enumerate() {
                    let id = MethodId(program.methods.len());
                    program.methods.push(MethodSlot {
                        unit: u,
                        class: c,
                        method: m,
                    });
                    program.by_callee.entry(method.signature.callee()).or_insert(id);
                    for (b, block) in method.blocks.iter().enumerate() {
                        for (i, stmt) in block.statements.iter().enumerate() {
                            let pos = StmtPos {
                                method: id,
                                block: b,
                                index: i,
                            };
                            if program.stmt_pos.insert(stmt.id, pos).is_some() {
                                return Err(ProgramError::DuplicateStmt(stmt.id));
                            }
                            if !unit.line_map.contains_key(&stmt.id) {
                                return Err(ProgramError::MissingLine(stmt.id));
                            }
                            for def in &stmt.defs {
                                program.def_sites.insert((id, *def), stmt.id);
                            }
                        }
                    }
                }
            }
            if let Some(stray) = unit
                .line_map
                .keys()
                .find(|id| !program.stmt_pos.contains_key(id))
            {
                return Err(ProgramError::StrayLine(*stray));
            }
        }
        Ok(program)
    }

    pub fn units(&self) -> &[CompilationUnit] {
        &self.units
    }

    pub fn into_units(self) -> Vec<CompilationUnit> {
        self.units
    }

    pub fn method_ids(&self) -> impl Iterator<Item = MethodId> {
        (0..self.methods.len()).map(MethodId)
    }

    pub fn method(&self, id: MethodId) -> &MethodDecl {
        let slot = self.methods[id.0];
        &self.units[slot.unit].classes[slot.class].methods[slot.method]
    }

    pub fn method_class(&self, id: MethodId) -> &ClassDecl {
        let slot = self.methods[id.0];
        &self.units[slot.unit].classes[slot.class]
    }

    pub fn method_unit(&self, id: MethodId) -> &CompilationUnit {
        &self.units[self.methods[id.0].unit]
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDecl> {
        self.classes
            .values()
            .map(|&(u, c)| &self.units[u].classes[c])
    }

    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.get(name).map(|&(u, c)| &self.units[u].classes[c])
    }

    /// The method a call resolves to, if it is declared in the program.
    pub fn resolve(&self, callee: &Callee) -> Option<MethodId> {
        self.by_callee.get(callee).copied()
    }

    /// Resolves `name/arity` starting at `class` and walking superclasses.
    pub fn lookup_method(&self, class: &str, name: &str, arity: usize) -> Option<MethodId> {
        let mut current = Some(class.to_string());
        let mut guard = 0;
        while let Some(c) = current {
            if let Some(id) = self.by_callee.get(&Callee::new(&c, name, arity)) {
                return Some(*id);
            }
            current = self.class(&c).and_then(|d| d.superclass.clone());
            guard += 1;
            if guard > self.classes.len() {
                break;
            }
        }
        None
    }

    pub fn stmt_pos(&self, id: StmtId) -> Option<StmtPos> {
        self.stmt_pos.get(&id).copied()
    }

    pub fn stmt(&self, id: StmtId) -> Option<&Statement> {
        let pos = self.stmt_pos(id)?;
        Some(&self.method(pos.method).blocks[pos.block].statements[pos.index])
    }

    pub fn stmt_method(&self, id: StmtId) -> Option<MethodId> {
        self.stmt_pos(id).map(|p| p.method)
    }

    pub fn loc(&self, id: StmtId) -> Option<&SrcLoc> {
        let pos = self.stmt_pos(id)?;
        self.method_unit(pos.method).line_map.get(&id)
    }

    /// The statement defining `value` within `method`.
    pub fn def_site(&self, method: MethodId, value: ValueId) -> Option<StmtId> {
        self.def_sites.get(&(method, value)).copied()
    }

    /// All statement ids in deterministic (unit, class, method, block) order.
    pub fn all_stmts(&self) -> impl Iterator<Item = (MethodId, &Statement)> {
        self.method_ids()
            .flat_map(move |m| self.method(m).statements().map(move |s| (m, s)))
    }

    /// Renders `value` as source-like text, using variable names when known.
    pub fn render_value(&self, method: MethodId, value: ValueId) -> String {
        self.render_value_depth(method, value, 0)
    }

    fn render_value_depth(&self, method: MethodId, value: ValueId, depth: usize) -> String {
        let decl = self.method(method);
        if let Some(name) = decl.locals.get(&value) {
            return name.clone();
        }
        let Some(stmt) = self.def_site(method, value).and_then(|s| self.stmt(s)) else {
            return format!("v{value}");
        };
        if let Some(text) = &stmt.text {
            return text.clone();
        }
        if depth > 16 {
            return format!("v{value}");
        }
        let sub = |v: &ValueId| self.render_value_depth(method, *v, depth + 1);
        match &stmt.kind {
            StmtKind::Param { index } => format!("p{index}"),
            StmtKind::ConstString { value } => format!("{value:?}"),
            StmtKind::Assign { op, literal } => match (op, stmt.uses.as_slice()) {
                (AssignOp::Lit, _) => literal.as_ref().map_or("null".into(), |l| l.to_string()),
                (AssignOp::Copy, [a]) => sub(a),
                (AssignOp::Not | AssignOp::Neg, [a]) => format!("{}{}", op.symbol(), sub(a)),
                (_, [a, b]) => format!("({} {} {})", sub(a), op.symbol(), sub(b)),
                _ => format!("v{value}"),
            },
            StmtKind::FieldRead { field, receiver } => match receiver {
                Some(r) => format!("{}.{}", sub(r), field.name),
                None if field.is_static => format!("{}.{}", field.class, field.name),
                None => format!("this.{}", field.name),
            },
            StmtKind::Call {
                callee,
                receiver,
                args,
                ..
            } => {
                let args: Vec<String> = args.iter().map(sub).collect();
                let target = match receiver {
                    Some(r) => sub(r),
                    None => callee.class.clone(),
                };
                if callee.name == "<init>" {
                    format!("new {}({})", callee.class, args.join(", "))
                } else {
                    format!("{target}.{}({})", callee.name, args.join(", "))
                }
            }
            _ => format!("v{value}"),
        }
    }
}

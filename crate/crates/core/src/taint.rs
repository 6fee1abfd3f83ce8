//! Source validation, bounded taint propagation, and sensitive-block extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::catalog::ParameterCatalog;
use crate::depgraph::{EdgeKind, Pdg};
use crate::engines::{getter_inventory, EngineKind, EngineSet, GetterStyle};
use crate::frontend::cfg::{Cfg, PostDominators};
use crate::frontend::ir::{BlockId, MethodId, Program, StmtId, StmtKind, ValueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceReason {
    /// Generic or built-in getter of a both holder.
    BothHolder,
    /// Dict holder getter whose key traces to colored constants only.
    ColoredKey,
    KeyHolderExcluded,
    UnconstrainedKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStatement {
    pub stmt: StmtId,
    pub engine: String,
    pub engine_kind: EngineKind,
    pub getter: String,
    pub style: GetterStyle,
    pub bound_keys: Vec<String>,
    pub valid: bool,
    pub reason: SourceReason,
    /// Set when tracing the key argument hit a parameter with no known caller.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub key_trace_incomplete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hop {
    pub stmt: StmtId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaintPath {
    pub source: StmtId,
    pub bound_keys: Vec<String>,
    pub hops: Vec<Hop>,
    pub sink: StmtId,
}

impl TaintPath {
    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    /// Whether every hop is an edge of `pdg` and the walk ends at the sink.
    pub fn replays_on(&self, pdg: &Pdg) -> bool {
        let mut at = self.source;
        for hop in &self.hops {
            if !pdg.has_edge(at, hop.stmt, hop.kind) {
                return false;
            }
            at = hop.stmt;
        }
        at == self.sink && self.hops.last().is_some_and(|h| h.kind == EdgeKind::Data)
    }
}

/// One arm of a branch: the blocks executed on that outcome before the
/// branches rejoin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Side {
    pub is_then: bool,
    pub entry: BlockId,
    pub blocks: Vec<BlockId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveBlock {
    pub block_id: String,
    pub method: String,
    pub file: String,
    pub entry_stmt: StmtId,
    pub entry_line: u32,
    pub checking_span: (u32, u32),
    pub handling_span: (u32, u32),
    pub parameters: Vec<String>,
    pub path_len: usize,
    pub paths: Vec<TaintPath>,
    pub existing_logs: Vec<StmtId>,
    #[serde(skip)]
    pub method_id: Option<MethodId>,
    #[serde(skip)]
    pub sides: Vec<Side>,
    /// Statements of the handling region (side bodies plus their forward
    /// data dependents within the method).
    #[serde(skip)]
    pub handling_stmts: BTreeSet<StmtId>,
    /// Statements of the method reached by taint from this block's sources.
    #[serde(skip)]
    pub tainted_stmts: BTreeSet<StmtId>,
    /// Whether the branch's post-dominator is the method exit.
    #[serde(skip)]
    pub rejoins_at_exit: bool,
}

impl SensitiveBlock {
    /// Whether `value` of the block's method carries taint.
    pub fn is_tainted(&self, program: &Program, value: ValueId) -> bool {
        self.method_id
            .and_then(|m| program.def_site(m, value))
            .is_some_and(|s| self.tainted_stmts.contains(&s))
    }
}

/// The slice of a block shown by `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub block_id: String,
    pub method: String,
    pub file: String,
    pub entry_line: u32,
    pub parameters: Vec<String>,
    pub path_len: usize,
    pub existing_logs: Vec<StmtId>,
}

impl From<&SensitiveBlock> for BlockReport {
    fn from(b: &SensitiveBlock) -> Self {
        BlockReport {
            block_id: b.block_id.clone(),
            method: b.method.clone(),
            file: b.file.clone(),
            entry_line: b.entry_line,
            parameters: b.parameters.clone(),
            path_len: b.path_len,
            existing_logs: b.existing_logs.clone(),
        }
    }
}

struct KeyTrace {
    keys: BTreeSet<String>,
    /// Every origin is a colored constant of a key or both holder.
    colored_only: bool,
    incomplete: bool,
}

struct KeyTracer<'a> {
    program: &'a Program,
    pdg: &'a Pdg,
    engines: &'a EngineSet,
    catalog: &'a ParameterCatalog,
    field_writes: BTreeMap<(String, String), Vec<StmtId>>,
}

impl<'a> KeyTracer<'a> {
    fn new(program: &'a Program, pdg: &'a Pdg, engines: &'a EngineSet, catalog: &'a ParameterCatalog) -> Self {
        let mut field_writes: BTreeMap<(String, String), Vec<StmtId>> = BTreeMap::new();
        for (_, s) in program.all_stmts() {
            if let StmtKind::FieldWrite { field, .. } = &s.kind {
                field_writes
                    .entry((field.class.clone(), field.name.clone()))
                    .or_default()
                    .push(s.id);
            }
        }
        KeyTracer {
            program,
            pdg,
            engines,
            catalog,
            field_writes,
        }
    }

    fn trace(&self, method: MethodId, value: ValueId) -> KeyTrace {
        let mut out = KeyTrace {
            keys: BTreeSet::new(),
            colored_only: true,
            incomplete: false,
        };
        let mut seen = BTreeSet::new();
        let mut work = vec![(method, value)];
        while let Some((m, v)) = work.pop() {
            let Some(def) = self.program.def_site(m, v) else {
                out.colored_only = false;
                continue;
            };
            if !seen.insert(def) {
                continue;
            }
            let stmt = self.program.stmt(def).expect("def site exists");
            match &stmt.kind {
                StmtKind::FieldRead { field, .. } => {
                    let holder_ok = self.engines.get(&field.class).is_some_and(|e| {
                        matches!(e.kind, EngineKind::KeyHolder | EngineKind::BothHolder)
                    });
                    if let Some(key) = self.engines.colored_key(&field.class, &field.name) {
                        out.keys.insert(key.to_string());
                        out.colored_only &= holder_ok;
                        continue;
                    }
                    let writes = self
                        .field_writes
                        .get(&(field.class.clone(), field.name.clone()));
                    match writes {
                        Some(ws) => {
                            for w in ws {
                                let wm = self.program.stmt_method(*w).expect("indexed");
                                let ws = self.program.stmt(*w).expect("indexed");
                                work.push((wm, *ws.uses.last().expect("write has a value")));
                            }
                        }
                        None => {
                            let init = self
                                .program
                                .class(&field.class)
                                .and_then(|c| c.field(&field.name))
                                .and_then(|f| f.string_constant());
                            if let Some(k) = init.filter(|k| self.catalog.contains(k)) {
                                out.keys.insert(k.to_string());
                            }
                            out.colored_only = false;
                        }
                    }
                }
                StmtKind::Assign {
                    op: crate::frontend::ir::AssignOp::Copy,
                    ..
                }
                | StmtKind::Phi { .. } => {
                    for u in &stmt.uses {
                        work.push((m, *u));
                    }
                }
                StmtKind::Param { .. } => {
                    let callers: Vec<StmtId> = self
                        .pdg
                        .predecessors(def)
                        .iter()
                        .filter(|(_, k)| *k == EdgeKind::CallArg)
                        .map(|(f, _)| *f)
                        .collect();
                    if callers.is_empty() {
                        out.colored_only = false;
                        out.incomplete = true;
                    }
                    for c in callers {
                        let cm = self.program.stmt_method(c).expect("indexed");
                        let cs = self.program.stmt(c).expect("indexed");
                        if let Some(d) = cs.defs.first() {
                            work.push((cm, *d));
                        }
                    }
                }
                StmtKind::ConstString { value } => {
                    if self.catalog.contains(value) {
                        out.keys.insert(value.clone());
                    }
                    out.colored_only = false;
                }
                _ => out.colored_only = false,
            }
        }
        out
    }

    /// Keys a built-in getter reads: colored constants and documented literals in its body.
    fn builtin_keys(&self, getter: MethodId) -> BTreeSet<String> {
        let mut keys = BTreeSet::new();
        for s in self.program.method(getter).statements() {
            match &s.kind {
                StmtKind::FieldRead { field, .. } => {
                    if let Some(k) = self.engines.colored_key(&field.class, &field.name) {
                        keys.insert(k.to_string());
                    }
                }
                StmtKind::ConstString { value } if self.catalog.contains(value) => {
                    keys.insert(value.clone());
                }
                _ => {}
            }
        }
        keys
    }
}

/// Every call to an engine getter, validated per engine kind.
pub fn find_sources(
    program: &Program,
    pdg: &Pdg,
    engines: &EngineSet,
    catalog: &ParameterCatalog,
) -> Vec<SourceStatement> {
    let tracer = KeyTracer::new(program, pdg, engines, catalog);
    let mut key_holder_getters = HashMap::new();
    for e in &engines.engines {
        if e.kind == EngineKind::KeyHolder {
            if let Some(c) = program.class(&e.class_name) {
                key_holder_getters.insert(e.class_name.clone(), getter_inventory(c));
            }
        }
    }
    let mut sources = Vec::new();
    for (m, stmt) in program.all_stmts() {
        let StmtKind::Call { callee, args, .. } = &stmt.kind else {
            continue;
        };
        if let Some(getters) = key_holder_getters.get(&callee.class) {
            if let Some(g) = getters.iter().find(|g| g.signature.callee() == *callee) {
                sources.push(SourceStatement {
                    stmt: stmt.id,
                    engine: callee.class.clone(),
                    engine_kind: EngineKind::KeyHolder,
                    getter: g.signature.to_string(),
                    style: g.style,
                    bound_keys: Vec::new(),
                    valid: false,
                    reason: SourceReason::KeyHolderExcluded,
                    key_trace_incomplete: false,
                });
            }
            continue;
        }
        let Some((engine, getter)) = engines.getter_for(callee) else {
            continue;
        };
        let (keys, colored_only, incomplete) = match (getter.style, getter.key_param) {
            (GetterStyle::GenericByKey, Some(i)) if i < args.len() => {
                let t = tracer.trace(m, args[i]);
                (t.keys, t.colored_only, t.incomplete)
            }
            _ => {
                let keys = program
                    .resolve(callee)
                    .map(|g| tracer.builtin_keys(g))
                    .unwrap_or_default();
                (keys, false, false)
            }
        };
        let (valid, reason) = match engine.kind {
            EngineKind::KeyHolder => (false, SourceReason::KeyHolderExcluded),
            EngineKind::BothHolder => (true, SourceReason::BothHolder),
            EngineKind::DictHolder if colored_only && !keys.is_empty() => {
                (true, SourceReason::ColoredKey)
            }
            EngineKind::DictHolder => (false, SourceReason::UnconstrainedKey),
        };
        sources.push(SourceStatement {
            stmt: stmt.id,
            engine: engine.class_name.clone(),
            engine_kind: engine.kind,
            getter: getter.signature.to_string(),
            style: getter.style,
            bound_keys: keys.into_iter().collect(),
            valid,
            reason,
            key_trace_incomplete: incomplete,
        });
    }
    sources.sort_by_key(|s| s.stmt);
    sources
}

/// Branches reachable from `source` within `max_hops` where the final edge
/// is a data edge, with their minimal path length.
pub fn sinks_of(
    program: &Program,
    pdg: &Pdg,
    source: StmtId,
    max_hops: usize,
) -> BTreeMap<StmtId, usize> {
    let mut dist = pdg.distances_within(source, max_hops).unwrap_or_default();
    dist.insert(source, 0);
    let mut sinks = BTreeMap::new();
    for (&node, &d) in &dist {
        if d >= max_hops {
            continue;
        }
        for &(next, kind) in pdg.successors(node) {
            if kind != EdgeKind::Data || !program.stmt(next).is_some_and(|s| s.is_branch()) {
                continue;
            }
            let len = d + 1;
            sinks
                .entry(next)
                .and_modify(|l: &mut usize| *l = (*l).min(len))
                .or_insert(len);
        }
    }
    sinks
}

/// Shortest walk from `source` to `sink` whose last edge is a data edge,
/// choosing the lexicographically smallest statement sequence.
pub fn witness(pdg: &Pdg, source: StmtId, sink: StmtId, max_hops: usize) -> Option<Vec<Hop>> {
    // remaining[x] = hops needed from x to finish at the sink
    let mut remaining: HashMap<StmtId, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for &(p, kind) in pdg.predecessors(sink) {
        if kind == EdgeKind::Data && !remaining.contains_key(&p) {
            remaining.insert(p, 1);
            queue.push_back(p);
        }
    }
    while let Some(x) = queue.pop_front() {
        let r = remaining[&x];
        if r >= max_hops {
            continue;
        }
        for &(p, _) in pdg.predecessors(x) {
            if let std::collections::hash_map::Entry::Vacant(e) = remaining.entry(p) {
                e.insert(r + 1);
                queue.push_back(p);
            }
        }
    }
    let total = *remaining.get(&source)?;
    if total > max_hops {
        return None;
    }
    let mut hops = Vec::with_capacity(total);
    let mut at = source;
    for step in (1..=total).rev() {
        let next = if step == 1 {
            Hop {
                stmt: sink,
                kind: EdgeKind::Data,
            }
        } else {
            let (stmt, kind) = pdg
                .successors(at)
                .iter()
                .filter(|(y, _)| remaining.get(y) == Some(&(step - 1)))
                .min()
                .copied()
                .expect("a successor continues the shortest walk");
            Hop { stmt, kind }
        };
        hops.push(next);
        at = next.stmt;
    }
    Some(hops)
}

/// One path per (valid source, sink branch) pair.
pub fn track_taints(
    program: &Program,
    pdg: &Pdg,
    sources: &[SourceStatement],
    max_path_len: usize,
) -> Vec<TaintPath> {
    let mut paths = Vec::new();
    for src in sources.iter().filter(|s| s.valid) {
        for (sink, _) in sinks_of(program, pdg, src.stmt, max_path_len) {
            if let Some(hops) = witness(pdg, src.stmt, sink, max_path_len) {
                paths.push(TaintPath {
                    source: src.stmt,
                    bound_keys: src.bound_keys.clone(),
                    hops,
                    sink,
                });
            }
        }
    }
    paths.sort();
    paths
}

/// Groups sinks into checking/handling blocks. Sinks whose sources bind no
/// documented key are dropped.
pub fn extract_blocks(
    program: &Program,
    pdg: &Pdg,
    paths: &[TaintPath],
    max_path_len: usize,
) -> Vec<SensitiveBlock> {
    let mut by_sink: BTreeMap<StmtId, Vec<&TaintPath>> = BTreeMap::new();
    for p in paths {
        by_sink.entry(p.sink).or_default().push(p);
    }
    let mut blocks = Vec::new();
    for (sink, paths) in by_sink {
        let parameters: BTreeSet<String> = paths
            .iter()
            .flat_map(|p| p.bound_keys.iter().cloned())
            .collect();
        if parameters.is_empty() {
            continue;
        }
        let pos = program.stmt_pos(sink).expect("sink is indexed");
        let m = pos.method;
        let method = program.method(m);
        let loc = program.loc(sink).expect("line map is total");
        let line_of = |s: StmtId| program.loc(s).map_or(loc.line, |l| l.line);

        let cfg = Cfg::of_method(method).expect("validated CFG");
        let pd = PostDominators::compute(&cfg);
        let join = pd.ipdom(pos.block);
        let mut sides = Vec::new();
        let block = &method.blocks[pos.block];
        let StmtKind::Branch {
            then_block,
            else_block,
            ..
        } = &block.statements[pos.index].kind
        else {
            continue;
        };
        let index: HashMap<BlockId, usize> = method
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        let arms = [(true, Some(*then_block)), (false, else_block.or(block.next))];
        for (is_then, entry) in arms {
            let Some(entry) = entry else { continue };
            let start = index[&entry];
            if start == join {
                continue;
            }
            let mut seen = BTreeSet::from([start]);
            let mut stack = vec![start];
            while let Some(b) = stack.pop() {
                for &s in &cfg.succs[b] {
                    if s != join && seen.insert(s) {
                        stack.push(s);
                    }
                }
            }
            sides.push(Side {
                is_then,
                entry,
                blocks: seen.into_iter().map(|i| method.blocks[i].id).collect(),
            });
        }

        let mut handling: BTreeSet<StmtId> = BTreeSet::new();
        for side in &sides {
            for b in &side.blocks {
                handling.extend(method.blocks[index[b]].statements.iter().map(|s| s.id));
            }
        }
        // forward data dependents within the method
        let mut work: Vec<StmtId> = handling.iter().copied().collect();
        while let Some(s) = work.pop() {
            for &(t, kind) in pdg.successors(s) {
                if kind == EdgeKind::Data
                    && program.stmt_method(t) == Some(m)
                    && t != sink
                    && handling.insert(t)
                {
                    work.push(t);
                }
            }
        }
        let entry_line = loc.line;
        let handling_span = handling
            .iter()
            .map(|s| line_of(*s))
            .fold(None, |acc: Option<(u32, u32)>, l| {
                Some(acc.map_or((l, l), |(a, b)| (a.min(l), b.max(l))))
            })
            .unwrap_or((entry_line, entry_line));
        let mut existing_logs: Vec<StmtId> = method
            .statements()
            .filter(|s| s.log_level().is_some())
            .filter(|s| handling.contains(&s.id) || line_of(s.id) == entry_line)
            .map(|s| s.id)
            .collect();
        existing_logs.sort();

        let mut tainted = BTreeSet::new();
        for p in &paths {
            let mut reach = pdg
                .distances_within(p.source, max_path_len)
                .unwrap_or_default();
            reach.insert(p.source, 0);
            tainted.extend(
                reach
                    .into_keys()
                    .filter(|s| program.stmt_method(*s) == Some(m)),
            );
        }
        let class = &method.signature.class;
        blocks.push(SensitiveBlock {
            block_id: format!("{}.{}:{}", class, method.signature.name, entry_line),
            method: method.signature.to_string(),
            file: loc.file.clone(),
            entry_stmt: sink,
            entry_line,
            checking_span: (entry_line, entry_line),
            handling_span,
            parameters: parameters.into_iter().collect(),
            path_len: paths.iter().map(|p| p.len()).min().unwrap_or(0),
            paths: paths.into_iter().cloned().collect(),
            existing_logs,
            method_id: Some(m),
            sides,
            handling_stmts: handling,
            tainted_stmts: tainted,
            rejoins_at_exit: join == pd.exit,
        });
    }
    blocks.sort_by(|a, b| {
        (&a.file, a.entry_line, &a.method, a.entry_stmt).cmp(&(&b.file, b.entry_line, &b.method, b.entry_stmt))
    });
    blocks
}

/// Everything the analysis stage produces.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub pdg: Pdg,
    pub sources: Vec<SourceStatement>,
    pub paths: Vec<TaintPath>,
    pub blocks: Vec<SensitiveBlock>,
}

pub fn analyze(
    program: &Program,
    catalog: &ParameterCatalog,
    engines: &EngineSet,
    max_path_len: usize,
    include_control: bool,
) -> Analysis {
    let pdg = crate::depgraph::build_pdg(program, include_control);
    let sources = find_sources(program, &pdg, engines, catalog);
    let paths = track_taints(program, &pdg, &sources, max_path_len);
    let blocks = extract_blocks(program, &pdg, &paths, max_path_len);
    Analysis {
        pdg,
        sources,
        paths,
        blocks,
    }
}

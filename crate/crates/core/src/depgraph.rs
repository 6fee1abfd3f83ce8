//! Program dependence graph over the SSA IR.
//!
//! Nodes are statements. Edges carry one of four kinds:
//! * `data`: a def reaching a use in the same method, plus a field write
//!   reaching reads of the same field (matched by declaring class and name);
//! * `control`: branch to each statement whose execution it decides;
//! * `call-arg`: argument def to the callee's parameter statement;
//! * `call-return`: callee `return` to the caller's call statement.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::frontend::cfg::{Cfg, PostDominators};
use crate::frontend::ir::{MethodId, Program, StmtId, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Data,
    Control,
    CallArg,
    CallReturn,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Data => "data",
            EdgeKind::Control => "control",
            EdgeKind::CallArg => "call-arg",
            EdgeKind::CallReturn => "call-return",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: StmtId,
    pub to: StmtId,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PdgError {
    #[error("statement {0} is not a node of the graph")]
    UnknownNode(StmtId),
    #[error("hop bound must be at least 1")]
    ZeroHops,
}

impl PdgError {
    pub fn code(&self) -> &'static str {
        match self {
            PdgError::UnknownNode(_) => "depgraph::UnknownNode",
            PdgError::ZeroHops => "depgraph::ZeroHops",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Pdg {
    pub nodes: Vec<StmtId>,
    pub edges: Vec<Edge>,
    #[serde(skip)]
    out: HashMap<StmtId, Vec<(StmtId, EdgeKind)>>,
    #[serde(skip)]
    inc: HashMap<StmtId, Vec<(StmtId, EdgeKind)>>,
}

impl PartialEq for Pdg {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Pdg {
    /// Builds a graph from explicit nodes and edges; edges are sorted and deduplicated.
    pub fn from_parts(nodes: impl IntoIterator<Item = StmtId>, edges: impl IntoIterator<Item = Edge>) -> Pdg {
        let nodes: BTreeSet<StmtId> = nodes.into_iter().collect();
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        let mut pdg = Pdg {
            nodes: nodes.into_iter().collect(),
            edges: edges.into_iter().collect(),
            out: HashMap::new(),
            inc: HashMap::new(),
        };
        pdg.index();
        pdg
    }

    fn index(&mut self) {
        self.out.clear();
        self.inc.clear();
        for n in &self.nodes {
            self.out.insert(*n, Vec::new());
            self.inc.insert(*n, Vec::new());
        }
        for e in &self.edges {
            self.out.entry(e.from).or_default().push((e.to, e.kind));
            self.inc.entry(e.to).or_default().push((e.from, e.kind));
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Pdg> {
        let raw: Pdg = serde_json::from_str(text)?;
        Ok(Pdg::from_parts(raw.nodes, raw.edges))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn contains(&self, node: StmtId) -> bool {
        self.out.contains_key(&node)
    }

    /// Outgoing `(target, kind)` pairs in ascending target order.
    pub fn successors(&self, node: StmtId) -> &[(StmtId, EdgeKind)] {
        self.out.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn predecessors(&self, node: StmtId) -> &[(StmtId, EdgeKind)] {
        self.inc.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn has_edge(&self, from: StmtId, to: StmtId, kind: EdgeKind) -> bool {
        self.successors(from).iter().any(|&(t, k)| t == to && k == kind)
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// Hop distance from `from` to every node reachable within `max_hops`,
    /// excluding `from` itself unless it lies on a cycle.
    pub fn distances_within(
        &self,
        from: StmtId,
        max_hops: usize,
    ) -> Result<BTreeMap<StmtId, usize>, PdgError> {
        if !self.contains(from) {
            return Err(PdgError::UnknownNode(from));
        }
        if max_hops == 0 {
            return Err(PdgError::ZeroHops);
        }
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::from([(from, 0usize)]);
        while let Some((node, d)) = queue.pop_front() {
            if d == max_hops {
                continue;
            }
            for &(next, _) in self.successors(node) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(next) {
                    e.insert(d + 1);
                    queue.push_back((next, d + 1));
                }
            }
        }
        Ok(dist)
    }

    /// Nodes reachable from `from` by a path of at most `max_hops` edges,
    /// excluding `from`.
    pub fn reachable_within(
        &self,
        from: StmtId,
        max_hops: usize,
    ) -> Result<BTreeSet<StmtId>, PdgError> {
        let mut set: BTreeSet<StmtId> = self.distances_within(from, max_hops)?.into_keys().collect();
        set.remove(&from);
        Ok(set)
    }
}

/// Builds the dependence graph of the whole program.
pub fn build_pdg(program: &Program, include_control: bool) -> Pdg {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut writes: BTreeMap<(String, String), Vec<StmtId>> = BTreeMap::new();
    let mut reads: BTreeMap<(String, String), Vec<StmtId>> = BTreeMap::new();

    for m in program.method_ids() {
        let method = program.method(m);
        for stmt in method.statements() {
            nodes.push(stmt.id);
            for u in &stmt.uses {
                if let Some(def) = program.def_site(m, *u) {
                    edges.push(Edge {
                        from: def,
                        to: stmt.id,
                        kind: EdgeKind::Data,
                    });
                }
            }
            match &stmt.kind {
                StmtKind::FieldWrite { field, .. } => writes
                    .entry((field.class.clone(), field.name.clone()))
                    .or_default()
                    .push(stmt.id),
                StmtKind::FieldRead { field, .. } => reads
                    .entry((field.class.clone(), field.name.clone()))
                    .or_default()
                    .push(stmt.id),
                StmtKind::Call {
                    callee, args, ret, ..
                } => {
                    if let Some(target) = program.resolve(callee) {
                        call_edges(program, m, stmt.id, args, ret.is_some(), target, &mut edges);
                    }
                }
                _ => {}
            }
        }
        if include_control {
            control_edges(program, m, &mut edges);
        }
    }
    for (key, ws) in &writes {
        if let Some(rs) = reads.get(key) {
            for w in ws {
                for r in rs {
                    edges.push(Edge {
                        from: *w,
                        to: *r,
                        kind: EdgeKind::Data,
                    });
                }
            }
        }
    }
    Pdg::from_parts(nodes, edges)
}

fn call_edges(
    program: &Program,
    caller: MethodId,
    call: StmtId,
    args: &[crate::frontend::ir::ValueId],
    has_ret: bool,
    target: MethodId,
    edges: &mut Vec<Edge>,
) {
    let callee = program.method(target);
    let params: HashMap<usize, StmtId> = callee
        .statements()
        .filter_map(|s| match s.kind {
            StmtKind::Param { index } => Some((index, s.id)),
            _ => None,
        })
        .collect();
    for (i, arg) in args.iter().enumerate() {
        if let (Some(def), Some(param)) = (program.def_site(caller, *arg), params.get(&i)) {
            edges.push(Edge {
                from: def,
                to: *param,
                kind: EdgeKind::CallArg,
            });
        }
    }
    if has_ret {
        for s in callee.statements() {
            if matches!(s.kind, StmtKind::Return) && !s.uses.is_empty() {
                edges.push(Edge {
                    from: s.id,
                    to: call,
                    kind: EdgeKind::CallReturn,
                });
            }
        }
    }
}

fn control_edges(program: &Program, m: MethodId, edges: &mut Vec<Edge>) {
    let method = program.method(m);
    let Ok(cfg) = Cfg::of_method(method) else {
        return;
    };
    let pd = PostDominators::compute(&cfg);
    for (a, b) in pd.control_dependence() {
        let Some(branch) = method.blocks[a].statements.last().filter(|s| s.is_branch()) else {
            continue;
        };
        for s in &method.blocks[b].statements {
            if s.id != branch.id {
                edges.push(Edge {
                    from: branch.id,
                    to: s.id,
                    kind: EdgeKind::Control,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_sources;

    fn program(src: &str) -> Program {
        Program::new(parse_sources(&[("T.cj".into(), src.into())]).unwrap()).unwrap()
    }

    fn line_of(p: &Program, id: StmtId) -> u32 {
        p.loc(id).unwrap().line
    }

    #[test]
    fn straight_line_single_data_edge() {
        let p = program("class T {\n  static void f() {\n    int a = 1;\n    int b = a;\n  }\n}\n");
        let pdg = build_pdg(&p, true);
        assert_eq!(pdg.nodes.len(), 2);
        assert_eq!(
            pdg.edges,
            vec![Edge {
                from: pdg.nodes[0],
                to: pdg.nodes[1],
                kind: EdgeKind::Data
            }]
        );
    }

    #[test]
    fn branch_controls_body() {
        let p = program(
            "class T {\n  static void f(boolean c) {\n    int x = 0;\n    if (c) {\n      x = 1;\n    }\n  }\n}\n",
        );
        let pdg = build_pdg(&p, true);
        let control: Vec<_> = pdg.edges_of_kind(EdgeKind::Control).collect();
        assert_eq!(control.len(), 1);
        assert_eq!(line_of(&p, control[0].from), 4);
        assert_eq!(line_of(&p, control[0].to), 5);
        let without = build_pdg(&p, false);
        assert_eq!(without.edges_of_kind(EdgeKind::Control).count(), 0);
        assert!(without.edges.iter().all(|e| pdg.edges.contains(e)));
    }

    #[test]
    fn call_arg_and_return_edges() {
        let p = program(
            "class T {\n  static int id(int p) {\n    return p;\n  }\n  static void g() {\n    int v = 7;\n    int w = id(v);\n  }\n}\n",
        );
        let pdg = build_pdg(&p, true);
        let arg: Vec<_> = pdg.edges_of_kind(EdgeKind::CallArg).collect();
        assert_eq!(arg.len(), 1);
        assert_eq!(line_of(&p, arg[0].from), 6);
        assert!(matches!(
            p.stmt(arg[0].to).unwrap().kind,
            StmtKind::Param { index: 0 }
        ));
        let ret: Vec<_> = pdg.edges_of_kind(EdgeKind::CallReturn).collect();
        assert_eq!(ret.len(), 1);
        assert_eq!(line_of(&p, ret[0].from), 3);
        assert_eq!(line_of(&p, ret[0].to), 7);
    }

    #[test]
    fn field_write_reaches_reads() {
        let p = program(
            "class T {\n  int f;\n  void set(int v) {\n    this.f = v;\n  }\n  int get() {\n    return f;\n  }\n}\n",
        );
        let pdg = build_pdg(&p, true);
        let write = p
            .all_stmts()
            .find(|(_, s)| matches!(s.kind, StmtKind::FieldWrite { .. }))
            .unwrap()
            .1
            .id;
        let read = p
            .all_stmts()
            .find(|(_, s)| matches!(s.kind, StmtKind::FieldRead { .. }))
            .unwrap()
            .1
            .id;
        assert!(pdg.has_edge(write, read, EdgeKind::Data));
    }

    #[test]
    fn bounded_chain() {
        let nodes: Vec<StmtId> = (0..=31).map(StmtId).collect();
        let edges = (0..31).map(|i| Edge {
            from: StmtId(i),
            to: StmtId(i + 1),
            kind: EdgeKind::Data,
        });
        let pdg = Pdg::from_parts(nodes, edges);
        let r30 = pdg.reachable_within(StmtId(0), 30).unwrap();
        assert!(!r30.contains(&StmtId(31)));
        assert_eq!(r30.len(), 30);
        assert!(pdg.reachable_within(StmtId(0), 31).unwrap().contains(&StmtId(31)));
        assert!(pdg.reachable_within(StmtId(31), 5).unwrap().is_empty());
        assert_eq!(
            pdg.reachable_within(StmtId(99), 1),
            Err(PdgError::UnknownNode(StmtId(99)))
        );
        assert_eq!(pdg.reachable_within(StmtId(0), 0), Err(PdgError::ZeroHops));
    }

    #[test]
    fn json_round_trip() {
        let p = program(
            "class T {\n  static void f(boolean c) {\n    if (c) {\n      LOG.info(\"x\");\n    }\n  }\n}\n",
        );
        let pdg = build_pdg(&p, true);
        let text = pdg.to_json();
        assert!(text.contains("\"kind\": \"control\""));
        assert_eq!(Pdg::from_json(&text).unwrap(), pdg);
    }
}

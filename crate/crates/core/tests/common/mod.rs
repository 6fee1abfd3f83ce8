#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use conflog::catalog::ConfigParameter;
use conflog::depgraph::{build_pdg, EdgeKind, Pdg};
use conflog::engines::label_engines;
use conflog::frontend::parse_sources;
use conflog::taint::{find_sources, track_taints};
use conflog::{ParameterCatalog, Program, StmtId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn catalog(keys: &[&str]) -> ParameterCatalog {
    ParameterCatalog::from_parameters(keys.iter().map(|k| ConfigParameter::new(*k))).unwrap()
}

pub fn program(files: &[(&str, String)]) -> Program {
    let sources: Vec<(String, String)> = files
        .iter()
        .map(|(p, s)| (p.to_string(), s.clone()))
        .collect();
    Program::new(parse_sources(&sources).unwrap()).unwrap()
}

pub const RANDOM_KEYS: [&str; 5] = ["gen.key.0", "gen.key.1", "gen.key.2", "gen.key.3", "gen.own"];

const SUPPORT: &str = "class Keys {
  public static final String K0 = \"gen.key.0\";
  public static final String K1 = \"gen.key.1\";
  public static final String K2 = \"gen.key.2\";
  public static final String K3 = \"gen.key.3\";
  public static int getDefaultPort() {
    return 8;
  }
}
class Conf {
  public static final String OWN = \"gen.own\";
  public int getInt(String name, int d) {
    return d;
  }
  public int getPort() {
    return 1;
  }
}
class Settings {
  Keys keys;
  public int lookup(String name, int d) {
    return d;
  }
}
";

/// Emits random method bodies over three engines of different kinds.
struct Gen {
    rng: ChaCha8Rng,
    budget: usize,
    next_var: usize,
    out: String,
}

impl Gen {
    fn fresh(&mut self) -> String {
        self.next_var += 1;
        format!("v{}", self.next_var)
    }

    fn operand(&mut self, scope: &[String]) -> String {
        if scope.is_empty() || self.rng.gen_bool(0.2) {
            self.rng.gen_range(0..10).to_string()
        } else {
            scope.choose(&mut self.rng).unwrap().clone()
        }
    }

    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth + 2 {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block(&mut self, depth: usize, scope: &mut Vec<String>, len: usize, helpers: &[String]) {
        let base = scope.len();
        for _ in 0..len {
            if self.budget == 0 {
                break;
            }
            self.budget -= 1;
            let choice = self.rng.gen_range(0..14);
            match choice {
                0 | 1 => {
                    let v = self.fresh();
                    let k = self.rng.gen_range(0..4);
                    self.line(depth, &format!("int {v} = conf.getInt(Keys.K{k}, 3);"));
                    scope.push(v);
                }
                2 => {
                    let v = self.fresh();
                    let k = self.rng.gen_range(0..4);
                    self.line(depth, &format!("int {v} = settings.lookup(Keys.K{k}, 3);"));
                    scope.push(v);
                }
                3 => {
                    let v = self.fresh();
                    self.line(depth, &format!("int {v} = settings.lookup(\"gen.key.1\", 3);"));
                    scope.push(v);
                }
                4 => {
                    let v = self.fresh();
                    let call = if self.rng.gen_bool(0.5) {
                        "Keys.getDefaultPort()"
                    } else {
                        "conf.getPort()"
                    };
                    self.line(depth, &format!("int {v} = {call};"));
                    scope.push(v);
                }
                5 | 6 => {
                    let v = self.fresh();
                    let a = self.operand(scope);
                    let b = self.operand(scope);
                    let op = ["+", "-", "*"].choose(&mut self.rng).unwrap();
                    self.line(depth, &format!("int {v} = {a} {op} {b};"));
                    scope.push(v);
                }
                7 if !scope.is_empty() => {
                    let t = scope.choose(&mut self.rng).unwrap().clone();
                    let a = self.operand(scope);
                    self.line(depth, &format!("{t} = {a};"));
                }
                8 => {
                    let f = self.rng.gen_range(0..2);
                    let a = self.operand(scope);
                    self.line(depth, &format!("this.f{f} = {a};"));
                }
                9 => {
                    let v = self.fresh();
                    let f = self.rng.gen_range(0..2);
                    self.line(depth, &format!("int {v} = this.f{f};"));
                    scope.push(v);
                }
                10 if !helpers.is_empty() => {
                    let v = self.fresh();
                    let h = helpers.choose(&mut self.rng).unwrap().clone();
                    let a = self.operand(scope);
                    self.line(depth, &format!("int {v} = {h}(conf, settings, {a});"));
                    scope.push(v);
                }
                11..=13 if depth < 3 => {
                    let a = self.operand(scope);
                    let b = self.operand(scope);
                    let op = ["<", ">", "==", "!=", "<=", ">="].choose(&mut self.rng).unwrap();
                    self.line(depth, &format!("if ({a} {op} {b}) {{"));
                    let n = self.rng.gen_range(1..4);
                    self.block(depth + 1, scope, n, helpers);
                    if self.rng.gen_bool(0.4) {
                        self.line(depth, "} else {");
                        let n = self.rng.gen_range(1..3);
                        self.block(depth + 1, scope, n, helpers);
                    }
                    self.line(depth, "}");
                }
                _ => {
                    let v = self.fresh();
                    let a = self.operand(scope);
                    self.line(depth, &format!("int {v} = {a};"));
                    scope.push(v);
                }
            }
        }
        scope.truncate(base);
    }
}

/// A random program of at most `max_stmts` source statements in the user
/// class, plus the fixed engine classes.
pub fn random_program(seed: u64, max_stmts: usize) -> Vec<(&'static str, String)> {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        budget: max_stmts,
        next_var: 0,
        out: String::new(),
    };
    let methods = g.rng.gen_range(1..4);
    g.out.push_str("class App {\n  int f0;\n  int f1;\n");
    let mut helpers = Vec::new();
    for i in 0..methods {
        let name = format!("m{i}");
        g.out.push_str(&format!("  int {name}(Conf conf, Settings settings, int p) {{\n"));
        let mut scope = vec!["p".to_string()];
        let n = g.rng.gen_range(1..=max_stmts.max(1));
        g.block(0, &mut scope, n, &helpers);
        let r = g.operand(&scope);
        g.out.push_str(&format!("    return {r};\n  }}\n"));
        helpers.push(name);
    }
    g.out.push_str("}\n");
    vec![("Support.cj", SUPPORT.to_string()), ("App.cj", g.out)]
}

pub type Pairs = BTreeSet<(StmtId, StmtId)>;

/// (valid source, sink) pairs the tracker reports.
pub fn tracked_pairs(program: &Program, include_control: bool, k: usize) -> (Pdg, Vec<StmtId>, Pairs) {
    let catalog = catalog(&RANDOM_KEYS);
    let engines = label_engines(program, &catalog, &[]);
    let pdg = build_pdg(program, include_control);
    let sources = find_sources(program, &pdg, &engines, &catalog);
    let valid: Vec<StmtId> = sources.iter().filter(|s| s.valid).map(|s| s.stmt).collect();
    let pairs = track_taints(program, &pdg, &sources, k)
        .into_iter()
        .map(|p| (p.source, p.sink))
        .collect();
    (pdg, valid, pairs)
}

/// Bounded-walk oracle: layer j holds every node some walk of exactly j
/// edges reaches; a branch is a sink when a data edge into it leaves some
/// layer below k.
pub fn oracle_pairs(program: &Program, pdg: &Pdg, valid: &[StmtId], k: usize) -> Pairs {
    let branches: HashSet<StmtId> = program
        .all_stmts()
        .filter(|(_, s)| s.is_branch())
        .map(|(_, s)| s.id)
        .collect();
    let mut out = BTreeSet::new();
    for &s in valid {
        let mut layer: BTreeSet<StmtId> = BTreeSet::from([s]);
        let mut seen_layers: Vec<BTreeSet<StmtId>> = Vec::new();
        for _ in 0..k {
            for &n in &layer {
                for &(next, kind) in pdg.successors(n) {
                    if kind == EdgeKind::Data && branches.contains(&next) {
                        out.insert((s, next));
                    }
                }
            }
            let next: BTreeSet<StmtId> = layer
                .iter()
                .flat_map(|&n| pdg.successors(n).iter().map(|&(m, _)| m))
                .collect();
            if next.is_empty() || seen_layers.contains(&next) {
                break;
            }
            seen_layers.push(layer);
            layer = next;
        }
    }
    out
}

/// A straight-line chain where the only branch sits `hops` edges from the
/// getter call.
pub fn chain_program(hops: usize) -> Vec<(&'static str, String)> {
    assert!(hops >= 2);
    let mut body = String::from("    int c0 = conf.getInt(Conf.OWN, 1);\n");
    for i in 1..=hops - 2 {
        body.push_str(&format!("    int c{i} = c{};\n", i - 1));
    }
    body.push_str(&format!("    boolean big = c{} > 4;\n", hops - 2));
    body.push_str("    if (big) {\n      return 1;\n    }\n    return 0;\n");
    let app = format!("class App {{\n  int run(Conf conf) {{\n{body}  }}\n}}\n");
    vec![("Support.cj", SUPPORT.to_string()), ("App.cj", app)]
}

pub fn sink_count(pairs: &Pairs) -> BTreeMap<StmtId, usize> {
    let mut m = BTreeMap::new();
    for (s, _) in pairs {
        *m.entry(*s).or_insert(0) += 1;
    }
    m
}

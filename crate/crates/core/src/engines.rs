//! Configuration engine labeling.
//!
//! Seeds are classes declaring a string constant equal to a documented key.
//! The seed set grows to a fixpoint along superclass links (both ways),
//! lexical nesting, and fields typed as an engine; a reached class joins only
//! if its own members classify it as one of the three holder kinds.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::catalog::ParameterCatalog;
use crate::frontend::ir::{Callee, ClassDecl, Program, Signature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    KeyHolder,
    DictHolder,
    BothHolder,
}

impl EngineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::KeyHolder => "key_holder",
            EngineKind::DictHolder => "dict_holder",
            EngineKind::BothHolder => "both_holder",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GetterStyle {
    GenericByKey,
    BuiltInSpecific,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Getter {
    pub signature: Signature,
    pub style: GetterStyle,
    /// Index of the key argument for generic getters (the first `String` parameter).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_param: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEngine {
    pub class_name: String,
    pub kind: EngineKind,
    /// Constant field name → documented key.
    pub colored_constants: BTreeMap<String, String>,
    /// String constants whose values are not documented keys; only recorded
    /// for key holders reached by expansion.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncatalogued_constants: Vec<String>,
    pub getters: Vec<Getter>,
}

impl ConfigEngine {
    /// Whether the engine satisfies the membership rule of its kind.
    pub fn satisfies_kind(&self) -> bool {
        let generic = self.count(GetterStyle::GenericByKey);
        let builtin = self.count(GetterStyle::BuiltInSpecific);
        let colored = self.colored_constants.len();
        match self.kind {
            EngineKind::KeyHolder => {
                (colored >= 1 || !self.uncatalogued_constants.is_empty()) && self.getters.is_empty()
            }
            EngineKind::DictHolder => generic >= 1 && colored == 0 && builtin == 0,
            EngineKind::BothHolder => generic >= 1 && (colored >= 1 || builtin >= 1),
        }
    }

    fn count(&self, style: GetterStyle) -> usize {
        self.getters.iter().filter(|g| g.style == style).count()
    }

    pub fn getter(&self, callee: &Callee) -> Option<&Getter> {
        self.getters.iter().find(|g| g.signature.callee() == *callee)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionReason {
    Seed,
    Inheritance,
    Composition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub class: String,
    pub reason: ExpansionReason,
    /// The engine this class was reached from; absent for seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineSet {
    /// Sorted by class name.
    pub engines: Vec<ConfigEngine>,
    /// In discovery order.
    pub expansion_trace: Vec<TraceEntry>,
    #[serde(skip)]
    pub labeling_time: Duration,
}

impl EngineSet {
    pub fn get(&self, class: &str) -> Option<&ConfigEngine> {
        self.engines
            .binary_search_by(|e| e.class_name.as_str().cmp(class))
            .ok()
            .map(|i| &self.engines[i])
    }

    /// The engine and getter a call resolves to, when it targets an inventory getter.
    pub fn getter_for(&self, callee: &Callee) -> Option<(&ConfigEngine, &Getter)> {
        let engine = self.get(&callee.class)?;
        engine.getter(callee).map(|g| (engine, g))
    }

    /// Documented key carried by constant `class.field`, if it is colored.
    pub fn colored_key(&self, class: &str, field: &str) -> Option<&str> {
        self.get(class)?
            .colored_constants
            .get(field)
            .map(String::as_str)
    }

    pub fn trace_entry(&self, class: &str) -> Option<&TraceEntry> {
        self.expansion_trace.iter().find(|t| t.class == class)
    }

    /// Seed classes `class` descends from through the trace.
    pub fn seeds_of(&self, class: &str) -> Vec<String> {
        let mut cur = class.to_string();
        let mut guard = 0;
        while let Some(TraceEntry {
            parent: Some(p), ..
        }) = self.trace_entry(&cur)
        {
            cur = p.clone();
            guard += 1;
            if guard > self.expansion_trace.len() {
                break;
            }
        }
        vec![cur]
    }
}

/// Getters declared by `class` itself: public, value-returning methods.
pub fn getter_inventory(class: &ClassDecl) -> Vec<Getter> {
    let mut getters = Vec::new();
    for m in &class.methods {
        let sig = &m.signature;
        if !m.is_public || !sig.returns_value() || sig.name == "<init>" {
            continue;
        }
        match sig.params.iter().position(|p| p == "String") {
            Some(i) => getters.push(Getter {
                signature: sig.clone(),
                style: GetterStyle::GenericByKey,
                key_param: Some(i),
            }),
            None if is_accessor_name(&sig.name) => getters.push(Getter {
                signature: sig.clone(),
                style: GetterStyle::BuiltInSpecific,
                key_param: None,
            }),
            None => {}
        }
    }
    getters
}

fn is_accessor_name(name: &str) -> bool {
    ["get", "is", "has"].iter().any(|p| {
        name.strip_prefix(p)
            .and_then(|rest| rest.chars().next())
            .is_some_and(|c| c.is_ascii_uppercase())
    })
}

fn colored_constants(class: &ClassDecl, catalog: &ParameterCatalog) -> BTreeMap<String, String> {
    class
        .fields
        .iter()
        .filter_map(|f| {
            let value = f.string_constant()?;
            catalog
                .contains(value)
                .then(|| (f.name.clone(), value.to_string()))
        })
        .collect()
}

/// Classifies `class` from its own members; `expanded` enables the rules
/// that only apply to classes reached by expansion.
pub fn classify(class: &ClassDecl, catalog: &ParameterCatalog, expanded: bool) -> Option<ConfigEngine> {
    let colored = colored_constants(class, catalog);
    let getters = getter_inventory(class);
    let generic = getters
        .iter()
        .filter(|g| g.style == GetterStyle::GenericByKey)
        .count();
    let builtin = getters.len() - generic;
    let mut engine = ConfigEngine {
        class_name: class.qualified_name.clone(),
        kind: EngineKind::KeyHolder,
        colored_constants: colored,
        uncatalogued_constants: Vec::new(),
        getters,
    };
    let colored = engine.colored_constants.len();
    if generic >= 1 && (colored >= 1 || builtin >= 1) {
        engine.kind = EngineKind::BothHolder;
    } else if generic >= 1 {
        engine.kind = EngineKind::DictHolder;
    } else if colored >= 1 {
        // identifier holder: accessors without a key argument are not value getters here
        engine.getters.clear();
    } else if expanded {
        let constants: Vec<String> = class
            .fields
            .iter()
            .filter(|f| f.is_static && f.string_constant().is_some())
            .map(|f| f.name.clone())
            .collect();
        if constants.is_empty() {
            return None;
        }
        engine.uncatalogued_constants = constants;
        engine.getters.clear();
    } else {
        return None;
    }
    Some(engine)
}

/// Labels every engine class of `program`. Classes named in `extra` are
/// treated as additional seeds when they classify.
pub fn label_engines(program: &Program, catalog: &ParameterCatalog, extra: &[String]) -> EngineSet {
    let start = Instant::now();
    let classes: BTreeMap<&str, &ClassDecl> = program
        .classes()
        .map(|c| (c.qualified_name.as_str(), c))
        .collect();
    let mut subclasses: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut nested: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut holders: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for c in classes.values() {
        if let Some(s) = &c.superclass {
            subclasses.entry(s.as_str()).or_default().push(&c.qualified_name);
        }
        if let Some(o) = &c.nested_in {
            nested.entry(o.as_str()).or_default().push(&c.qualified_name);
        }
        for f in &c.fields {
            holders.entry(f.ty.as_str()).or_default().insert(&c.qualified_name);
        }
    }

    let mut engines: BTreeMap<String, ConfigEngine> = BTreeMap::new();
    let mut trace = Vec::new();
    let mut queue = VecDeque::new();
    let extra: BTreeSet<&str> = extra.iter().map(String::as_str).collect();
    for c in classes.values() {
        let seed = !colored_constants(c, catalog).is_empty() || extra.contains(c.qualified_name.as_str());
        if !seed {
            continue;
        }
        if let Some(engine) = classify(c, catalog, false) {
            trace.push(TraceEntry {
                class: c.qualified_name.clone(),
                reason: ExpansionReason::Seed,
                parent: None,
            });
            engines.insert(c.qualified_name.clone(), engine);
            queue.push_back(c.qualified_name.clone());
        }
    }
    while let Some(current) = queue.pop_front() {
        let decl = classes[current.as_str()];
        let mut candidates: Vec<(&str, ExpansionReason)> = Vec::new();
        if let Some(s) = &decl.superclass {
            candidates.push((s.as_str(), ExpansionReason::Inheritance));
        }
        for s in subclasses.get(current.as_str()).into_iter().flatten() {
            candidates.push((s, ExpansionReason::Inheritance));
        }
        for n in nested.get(current.as_str()).into_iter().flatten() {
            candidates.push((n, ExpansionReason::Composition));
        }
        for h in holders.get(current.as_str()).into_iter().flatten() {
            candidates.push((h, ExpansionReason::Composition));
        }
        for (name, reason) in candidates {
            if engines.contains_key(name) {
                continue;
            }
            let Some(class) = classes.get(name) else {
                continue;
            };
            if let Some(engine) = classify(class, catalog, true) {
                trace.push(TraceEntry {
                    class: name.to_string(),
                    reason,
                    parent: Some(current.clone()),
                });
                engines.insert(name.to_string(), engine);
                queue.push_back(name.to_string());
            }
        }
    }
    EngineSet {
        engines: engines.into_values().collect(),
        expansion_trace: trace,
        labeling_time: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ConfigParameter;
    use crate::frontend::parse_sources;

    fn catalog(keys: &[&str]) -> ParameterCatalog {
        ParameterCatalog::from_parameters(keys.iter().map(|k| ConfigParameter::new(*k))).unwrap()
    }

    fn program(files: &[(&str, &str)]) -> Program {
        let sources: Vec<(String, String)> = files
            .iter()
            .map(|(p, s)| (p.to_string(), s.to_string()))
            .collect();
        Program::new(parse_sources(&sources).unwrap()).unwrap()
    }

    const DFS: &str = "class DFSConfigKeys extends CommonConfigurationKeys {\n  public static final String DFS_NAMENODE_AVOID_STALE_DATANODE_FOR_WRITE_KEY = \"dfs.namenode.avoid.write.stale.datanode\";\n}\n";
    const COMMON: &str = "class CommonConfigurationKeys {\n  public static final String IPC_PING_KEY = \"ipc.ping.interval\";\n}\n";
    const CONF: &str = "class Configuration {\n  public static final String FS_DEFAULT = \"fs.defaultFS\";\n  public boolean getBoolean(String name, boolean dflt) {\n    return dflt;\n  }\n}\n";

    #[test]
    fn seed_key_holder_and_inherited_expansion() {
        let p = program(&[("a.cj", DFS), ("b.cj", COMMON)]);
        let set = label_engines(&p, &catalog(&["dfs.namenode.avoid.write.stale.datanode"]), &[]);
        let dfs = set.get("DFSConfigKeys").unwrap();
        assert_eq!(dfs.kind, EngineKind::KeyHolder);
        assert_eq!(
            dfs.colored_constants["DFS_NAMENODE_AVOID_STALE_DATANODE_FOR_WRITE_KEY"],
            "dfs.namenode.avoid.write.stale.datanode"
        );
        let common = set.get("CommonConfigurationKeys").unwrap();
        assert_eq!(common.kind, EngineKind::KeyHolder);
        let t = set.trace_entry("CommonConfigurationKeys").unwrap();
        assert_eq!(t.reason, ExpansionReason::Inheritance);
        assert_eq!(t.parent.as_deref(), Some("DFSConfigKeys"));
        assert_eq!(set.seeds_of("CommonConfigurationKeys"), vec!["DFSConfigKeys".to_string()]);
        assert!(set.engines.iter().all(ConfigEngine::satisfies_kind));
    }

    #[test]
    fn generic_getter_plus_colored_constant_is_both_holder() {
        let p = program(&[("c.cj", CONF)]);
        let set = label_engines(&p, &catalog(&["fs.defaultFS"]), &[]);
        let conf = set.get("Configuration").unwrap();
        assert_eq!(conf.kind, EngineKind::BothHolder);
        assert_eq!(conf.getters.len(), 1);
        assert_eq!(conf.getters[0].style, GetterStyle::GenericByKey);
        assert_eq!(conf.getters[0].key_param, Some(0));
    }

    #[test]
    fn inventory_styles() {
        let p = program(&[(
            "g.cj",
            "class G {\n  public boolean getBoolean(String k, boolean d) { return d; }\n  public boolean getResilient() { return true; }\n  public void setX(String k) { }\n  boolean hidden(String k) { return true; }\n  public int compute() { return 1; }\n}\n",
        )]);
        let inv = getter_inventory(p.class("G").unwrap());
        let styles: Vec<_> = inv.iter().map(|g| (g.signature.name.as_str(), g.style)).collect();
        assert_eq!(
            styles,
            vec![
                ("getBoolean", GetterStyle::GenericByKey),
                ("getResilient", GetterStyle::BuiltInSpecific)
            ]
        );
    }

    #[test]
    fn dict_holder_reached_by_nesting() {
        let p = program(&[(
            "z.cj",
            "class ZKConfig {\n  public static final String CLIENT_PORT = \"clientPort\";\n  class Props {\n    public String getProperty(String key) { return key; }\n  }\n}\n",
        )]);
        let set = label_engines(&p, &catalog(&["clientPort"]), &[]);
        assert_eq!(set.get("ZKConfig.Props").unwrap().kind, EngineKind::DictHolder);
        assert_eq!(
            set.trace_entry("ZKConfig.Props").unwrap().reason,
            ExpansionReason::Composition
        );
    }

    #[test]
    fn unrelated_dict_like_class_is_not_an_engine() {
        let p = program(&[
            ("c.cj", CONF),
            ("u.cj", "class Lookup {\n  public String find(String name) { return name; }\n}\n"),
        ]);
        let set = label_engines(&p, &catalog(&["fs.defaultFS"]), &[]);
        assert!(set.get("Lookup").is_none());
        let set = label_engines(&p, &catalog(&["fs.defaultFS"]), &["Lookup".to_string()]);
        assert_eq!(set.get("Lookup").unwrap().kind, EngineKind::DictHolder);
    }
}

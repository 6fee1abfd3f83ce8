//! Configuration parameter catalog loaded from documentation files.
//!
//! Three documentation shapes are accepted:
//!
//! * `kvdoc-xml`: a Hadoop-style property list,
//!   `<configuration><property><name/><value/><description/></property>...</configuration>`
//! * `kvdoc-json`: an array of `{"name", "value", "type", "description"}` objects
//! * `kvdoc-tsv`: `key<TAB>default<TAB>description` rows
//!
//! Keys are case-sensitive and unique within a catalog.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed documentation {path}: {reason}")]
    MalformedDoc { path: PathBuf, reason: String },
    #[error("duplicate parameter key `{key}` at {first} and {second}")]
    DuplicateKey {
        key: String,
        first: DocLocation,
        second: DocLocation,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::MalformedDoc { .. } => "catalog::MalformedDoc",
            CatalogError::DuplicateKey { .. } => "catalog::DuplicateKey",
            CatalogError::Io { .. } => "catalog::Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocFormat {
    KvdocXml,
    KvdocJson,
    KvdocTsv,
}

impl DocFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Option<DocFormat> {
        match path.extension()?.to_str()? {
            "xml" => Some(DocFormat::KvdocXml),
            "json" => Some(DocFormat::KvdocJson),
            "tsv" | "tab" => Some(DocFormat::KvdocTsv),
            _ => None,
        }
    }
}

impl FromStr for DocFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kvdoc-xml" | "xml" => Ok(DocFormat::KvdocXml),
            "kvdoc-json" | "json" => Ok(DocFormat::KvdocJson),
            "kvdoc-tsv" | "tsv" => Ok(DocFormat::KvdocTsv),
            other => Err(format!("unknown documentation format `{other}`")),
        }
    }
}

/// Where a parameter entry was found: file path and zero-based entry index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocLocation {
    pub path: PathBuf,
    pub index: usize,
}

impl fmt::Display for DocLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.path.display(), self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "values")]
pub enum ValueType {
    String,
    Int,
    Float,
    Bool,
    Duration,
    Path,
    EnumOf(Vec<String>),
    Untyped,
}

impl ValueType {
    /// Parses a documentation type hint. Unknown or empty hints are `Untyped`.
    pub fn from_hint(hint: Option<&str>) -> ValueType {
        let Some(hint) = hint.map(str::trim).filter(|h| !h.is_empty()) else {
            return ValueType::Untyped;
        };
        let lower = hint.to_ascii_lowercase();
        // ascii lowercasing keeps byte offsets, so members are cut from `hint`
        let members = if lower.starts_with("enum(") && lower.ends_with(')') {
            Some(&hint[5..hint.len() - 1])
        } else if lower.starts_with("enum:") {
            Some(&hint[5..])
        } else {
            None
        };
        if let Some(members) = members {
            let members = members
                .split(['|', ','])
                .map(|m| m.trim().to_string())
                .filter(|m| !m.is_empty())
                .collect();
            return ValueType::EnumOf(members);
        }
        match lower.as_str() {
            "string" | "str" | "text" => ValueType::String,
            "int" | "integer" | "long" | "short" => ValueType::Int,
            "float" | "double" | "number" => ValueType::Float,
            "bool" | "boolean" => ValueType::Bool,
            "duration" | "time" => ValueType::Duration,
            "path" | "file" | "dir" | "directory" => ValueType::Path,
            _ => ValueType::Untyped,
        }
    }

    fn as_hint(&self) -> Option<String> {
        Some(match self {
            ValueType::String => "string".into(),
            ValueType::Int => "int".into(),
            ValueType::Float => "float".into(),
            ValueType::Bool => "bool".into(),
            ValueType::Duration => "duration".into(),
            ValueType::Path => "path".into(),
            ValueType::EnumOf(members) => format!("enum({})", members.join("|")),
            ValueType::Untyped => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigParameter {
    pub key: String,
    pub value_type: ValueType,
    pub default_value: Option<String>,
    pub description: Option<String>,
    pub source_doc: DocLocation,
}

impl ConfigParameter {
    /// An untyped parameter with no default, description, or source location.
    pub fn new(key: impl Into<String>) -> Self {
        ConfigParameter {
            key: key.into(),
            value_type: ValueType::Untyped,
            default_value: None,
            description: None,
            source_doc: DocLocation {
                path: PathBuf::new(),
                index: 0,
            },
        }
    }
}

/// Counters for entries that were read but not admitted to the catalog.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadDiagnostics {
    pub skipped_without_key: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParameterCatalog {
    parameters: Vec<ConfigParameter>,
    #[serde(skip)]
    key_index: HashMap<String, usize>,
    #[serde(default)]
    pub diagnostics: LoadDiagnostics,
}

impl PartialEq for ParameterCatalog {
    fn eq(&self, other: &Self) -> bool {
        self.parameters == other.parameters
    }
}

/// A raw documentation entry before validation.
struct RawEntry {
    key: Option<String>,
    value: Option<String>,
    type_hint: Option<String>,
    description: Option<String>,
}

impl ParameterCatalog {
    /// Builds a catalog from parameters, enforcing key validity and uniqueness.
    pub fn from_parameters(
        parameters: impl IntoIterator<Item = ConfigParameter>,
    ) -> Result<Self, CatalogError> {
        let mut catalog = ParameterCatalog::default();
        for param in parameters {
            catalog.insert(param)?;
        }
        Ok(catalog)
    }

    fn insert(&mut self, param: ConfigParameter) -> Result<(), CatalogError> {
        if param.key.is_empty() || param.key.chars().any(char::is_whitespace) {
            return Err(CatalogError::MalformedDoc {
                path: param.source_doc.path.clone(),
                reason: format!("invalid parameter key {:?}", param.key),
            });
        }
        if let Some(&existing) = self.key_index.get(&param.key) {
            return Err(CatalogError::DuplicateKey {
                key: param.key.clone(),
                first: self.parameters[existing].source_doc.clone(),
                second: param.source_doc,
            });
        }
        self.key_index
            .insert(param.key.clone(), self.parameters.len());
        self.parameters.push(param);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn parameters(&self) -> &[ConfigParameter] {
        &self.parameters
    }

    pub fn get(&self, key: &str) -> Option<&ConfigParameter> {
        self.key_index.get(key).map(|&i| &self.parameters[i])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.key_index.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.parameters.iter().map(|p| p.key.as_str())
    }

    fn rebuild_index(&mut self) {
        self.key_index = self
            .parameters
            .iter()
            .enumerate()
            .map(|(i, p)| (p.key.clone(), i))
            .collect();
    }

    /// Deserializes a catalog previously produced by `serde_json::to_string`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mut catalog: ParameterCatalog = serde_json::from_str(text)?;
        catalog.rebuild_index();
        Ok(catalog)
    }

    /// Renders the catalog as a `kvdoc-json` document.
    pub fn to_kvdoc_json(&self) -> String {
        let entries: Vec<JsonEntry> = self
            .parameters
            .iter()
            .map(|p| JsonEntry {
                name: Some(p.key.clone()),
                value: p.default_value.clone(),
                r#type: p.value_type.as_hint(),
                description: p.description.clone(),
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("catalog entries serialize")
    }

    /// Finds every standalone occurrence of a catalog key in `text`.
    ///
    /// A key occurrence must be bounded on both sides by a character outside
    /// `[A-Za-z0-9_.-]` or by the string edge. Matches are scanned left to
    /// right and never overlap; at a given start the longest key wins.
    pub fn match_parameters_in_text(&self, text: &str) -> Vec<KeyMatch> {
        let mut lengths: Vec<usize> = self.key_index.keys().map(String::len).collect();
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        lengths.dedup();

        let bytes = text.as_bytes();
        let mut matches = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let bounded_start = i == 0 || !is_ident_byte(bytes[i - 1]);
            if bounded_start && text.is_char_boundary(i) {
                let hit = lengths.iter().find_map(|&len| {
                    let end = i + len;
                    let candidate = text.get(i..end)?;
                    let bounded_end = end == bytes.len() || !is_ident_byte(bytes[end]);
                    (bounded_end && self.key_index.contains_key(candidate)).then_some(end)
                });
                if let Some(end) = hit {
                    matches.push(KeyMatch {
                        key: text[i..end].to_string(),
                        start: i,
                        end,
                    });
                    i = end;
                    continue;
                }
            }
            i += 1;
        }
        matches
    }
}

/// Identifier characters for key matching: `[A-Za-z0-9_.-]`.
pub fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMatch {
    pub key: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEntry {
    #[serde(default)]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r#type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
}

pub fn load_catalog(path: &Path, format: DocFormat) -> Result<ParameterCatalog, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_catalog(&text, path, format)
}

/// Parses documentation text; `path` is used only for locations in errors.
pub fn parse_catalog(
    text: &str,
    path: &Path,
    format: DocFormat,
) -> Result<ParameterCatalog, CatalogError> {
    let malformed = |reason: String| CatalogError::MalformedDoc {
        path: path.to_path_buf(),
        reason,
    };
    let entries = match format {
        DocFormat::KvdocXml => parse_xml(text).map_err(malformed)?,
        DocFormat::KvdocJson => parse_json(text).map_err(malformed)?,
        DocFormat::KvdocTsv => parse_tsv(text).map_err(malformed)?,
    };

    let mut catalog = ParameterCatalog::default();
    for (index, entry) in entries.into_iter().enumerate() {
        let key = entry.key.map(|k| k.trim().to_string()).unwrap_or_default();
        if key.is_empty() {
            catalog.diagnostics.skipped_without_key += 1;
            continue;
        }
        catalog.insert(ConfigParameter {
            key,
            value_type: ValueType::from_hint(entry.type_hint.as_deref()),
            default_value: entry.value.filter(|v| !v.is_empty()),
            description: entry
                .description
                .map(|d| d.trim().to_string())
                .filter(|d| !d.is_empty()),
            source_doc: DocLocation {
                path: path.to_path_buf(),
                index,
            },
        })?;
    }
    Ok(catalog)
}

fn parse_json(text: &str) -> Result<Vec<RawEntry>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let entries: Vec<JsonEntry> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(entries
        .into_iter()
        .map(|e| RawEntry {
            key: e.name,
            value: e.value,
            type_hint: e.r#type,
            description: e.description,
        })
        .collect())
}

fn parse_tsv(text: &str) -> Result<Vec<RawEntry>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        if record.len() > 3 {
            return Err(format!(
                "line {}: expected at most 3 columns, found {}",
                record.position().map_or(0, |p| p.line()),
                record.len()
            ));
        }
        let field = |i: usize| record.get(i).map(str::to_string);
        entries.push(RawEntry {
            key: field(0),
            value: field(1),
            type_hint: None,
            description: field(2),
        });
    }
    Ok(entries)
}

fn parse_xml(text: &str) -> Result<Vec<RawEntry>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);

    let mut entries = Vec::new();
    let mut current: Option<RawEntry> = None;
    let mut field: Option<String> = None;
    let mut stack: Vec<String> = Vec::new();
    let mut saw_root = false;

    loop {
        let event = reader
            .read_event()
            .map_err(|e| format!("at byte {}: {e}", reader.buffer_position()))?;
        match event {
            Event::Start(start) => {
                let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                match (stack.len(), name.as_str()) {
                    (0, "configuration") => saw_root = true,
                    (0, other) => return Err(format!("unexpected root element <{other}>")),
                    (1, "property") => {
                        current = Some(RawEntry {
                            key: None,
                            value: None,
                            type_hint: None,
                            description: None,
                        })
                    }
                    (2, "name" | "value" | "description" | "type") => field = Some(name.clone()),
                    _ => {}
                }
                stack.push(name);
            }
            Event::Empty(start) => {
                if stack.is_empty() && start.name().as_ref() == b"configuration" {
                    saw_root = true;
                }
            }
            Event::Text(t) => {
                if let (Some(entry), Some(f)) = (current.as_mut(), field.as_deref()) {
                    let value = t.unescape().map_err(|e| e.to_string())?.into_owned();
                    append_field(entry, f, &value);
                }
            }
            Event::CData(t) => {
                if let (Some(entry), Some(f)) = (current.as_mut(), field.as_deref()) {
                    let value = String::from_utf8_lossy(&t).into_owned();
                    append_field(entry, f, &value);
                }
            }
            Event::End(_) => {
                let closed = stack.pop().ok_or("unbalanced closing tag")?;
                if stack.len() == 2 {
                    field = None;
                }
                if closed == "property" && stack.len() == 1 {
                    entries.extend(current.take());
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(format!("unclosed element <{}>", stack.last().unwrap()));
    }
    if !saw_root {
        return Err("missing <configuration> root".into());
    }
    Ok(entries)
}

fn append_field(entry: &mut RawEntry, field: &str, value: &str) {
    let slot = match field {
        "name" => &mut entry.key,
        "value" => &mut entry.value,
        "description" => &mut entry.description,
        _ => &mut entry.type_hint,
    };
    slot.get_or_insert_with(String::new).push_str(value);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xml(text: &str) -> Result<ParameterCatalog, CatalogError> {
        parse_catalog(text, Path::new("doc.xml"), DocFormat::KvdocXml)
    }

    #[test]
    fn xml_single_property() {
        let catalog = xml(
            "<configuration><property><name>dfs.namenode.avoid.write.stale.datanode</name>\
             <value>false</value><description>Avoid stale nodes.</description></property>\
             </configuration>",
        )
        .unwrap();
        assert_eq!(catalog.len(), 1);
        let p = catalog.get("dfs.namenode.avoid.write.stale.datanode").unwrap();
        assert_eq!(p.default_value.as_deref(), Some("false"));
        assert_eq!(p.value_type, ValueType::Untyped);
        assert_eq!(p.source_doc.index, 0);
    }

    #[test]
    fn empty_documents_yield_empty_catalogs() {
        assert!(xml("").unwrap().is_empty());
        assert!(xml("<configuration></configuration>").unwrap().is_empty());
        assert!(xml("<configuration/>").unwrap().is_empty());
        let json = parse_catalog("[]", Path::new("d.json"), DocFormat::KvdocJson).unwrap();
        assert!(json.is_empty());
        let tsv = parse_catalog("", Path::new("d.tsv"), DocFormat::KvdocTsv).unwrap();
        assert!(tsv.is_empty());
    }

    #[test]
    fn tsv_duplicate_key_reports_both_locations() {
        let err = parse_catalog("a.b\t1\tfirst\na.b\t2\tsecond\n", Path::new("d.tsv"), DocFormat::KvdocTsv)
            .unwrap_err();
        match err {
            CatalogError::DuplicateKey { key, first, second } => {
                assert_eq!(key, "a.b");
                assert_eq!(first.index, 0);
                assert_eq!(second.index, 1);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn entries_without_key_are_counted() {
        let catalog = parse_catalog(
            r#"[{"name":"x.y","type":"int"},{"value":"3"},{"name":"  "}]"#,
            Path::new("d.json"),
            DocFormat::KvdocJson,
        )
        .unwrap();
        assert_eq!(catalog.len(), 1);
        assert_eq!(catalog.diagnostics.skipped_without_key, 2);
        assert_eq!(catalog.get("x.y").unwrap().value_type, ValueType::Int);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(xml("<configuration><property>"), Err(CatalogError::MalformedDoc { .. })));
        assert!(matches!(xml("<conf></conf>"), Err(CatalogError::MalformedDoc { .. })));
        let bad_json = parse_catalog("{", Path::new("d.json"), DocFormat::KvdocJson);
        assert!(matches!(bad_json, Err(CatalogError::MalformedDoc { .. })));
        let spaced = parse_catalog("a b\t1\t\n", Path::new("d.tsv"), DocFormat::KvdocTsv);
        assert!(matches!(spaced, Err(CatalogError::MalformedDoc { .. })));
    }

    #[test]
    fn type_hints() {
        assert_eq!(ValueType::from_hint(Some("Boolean")), ValueType::Bool);
        assert_eq!(ValueType::from_hint(None), ValueType::Untyped);
        assert_eq!(ValueType::from_hint(Some("weird")), ValueType::Untyped);
        assert_eq!(
            ValueType::from_hint(Some("enum(Yarn|local)")),
            ValueType::EnumOf(vec!["Yarn".into(), "local".into()])
        );
        assert_eq!(
            ValueType::from_hint(Some("enum:a,b")),
            ValueType::EnumOf(vec!["a".into(), "b".into()])
        );
    }

    fn catalog_of(keys: &[&str]) -> ParameterCatalog {
        ParameterCatalog::from_parameters(keys.iter().enumerate().map(|(i, k)| ConfigParameter {
            key: k.to_string(),
            value_type: ValueType::Untyped,
            default_value: None,
            description: None,
            source_doc: DocLocation {
                path: "t".into(),
                index: i,
            },
        }))
        .unwrap()
    }

    #[test]
    fn matches_key_in_log_line() {
        let catalog = catalog_of(&["mapred.local.dir"]);
        let text = "No valid local directories in property: mapred.local.dir";
        let found = catalog.match_parameters_in_text(text);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].key, "mapred.local.dir");
        assert_eq!(&text[found[0].start..found[0].end], "mapred.local.dir");
        assert!(catalog.match_parameters_in_text("nothing here").is_empty());
    }

    #[test]
    fn longest_key_wins_and_boundaries_hold() {
        let catalog = catalog_of(&["a.b", "a.b.c"]);
        let found = catalog.match_parameters_in_text("a.b.c");
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].key, "a.b.c");
        // `xa.b` and `a.bc` are not standalone
        assert!(catalog.match_parameters_in_text("xa.b a.bc a.b_").is_empty());
        let quoted = catalog.match_parameters_in_text("set 'a.b' or (a.b.c)");
        let keys: Vec<_> = quoted.iter().map(|m| m.key.as_str()).collect();
        assert_eq!(keys, ["a.b", "a.b.c"]);
    }

    #[test]
    fn json_roundtrip_preserves_entries() {
        let catalog = parse_catalog(
            r#"[{"name":"a","value":"1","type":"enum(x|y)","description":"d"},{"name":"b"}]"#,
            Path::new("d.json"),
            DocFormat::KvdocJson,
        )
        .unwrap();
        let again = parse_catalog(&catalog.to_kvdoc_json(), Path::new("d.json"), DocFormat::KvdocJson)
            .unwrap();
        assert_eq!(catalog, again);
        let via_serde = ParameterCatalog::from_json(&serde_json::to_string(&catalog).unwrap()).unwrap();
        assert_eq!(via_serde, catalog);
        assert!(via_serde.contains("b"));
    }
}

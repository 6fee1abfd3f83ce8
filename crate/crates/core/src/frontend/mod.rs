//! Front end: source parsing, SSA lowering, and the CIR interchange format.

pub mod cfg;
pub mod cir;
pub mod ir;
pub mod lower;
pub mod syntax;

use std::path::{Path, PathBuf};

use ir::CompilationUnit;

/// File extension of source files in the mini language.
pub const SOURCE_EXT: &str = "cj";

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error("{file}:{line}:{col}: {message}")]
    SyntaxError {
        file: String,
        line: u32,
        col: u32,
        message: String,
    },
    #[error("{path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("{method}: {reason}")]
    SsaViolation { method: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FrontendError {
    pub fn code(&self) -> &'static str {
        match self {
            FrontendError::SyntaxError { .. } => "frontend::SyntaxError",
            FrontendError::SchemaViolation { .. } => "frontend::SchemaViolation",
            FrontendError::SsaViolation { .. } => "frontend::SsaViolation",
            FrontendError::Io { .. } => "frontend::Io",
        }
    }
}

/// Lists the source files under `dir` in sorted order, as paths relative to it.
pub fn source_files(dir: &Path) -> Result<Vec<String>, FrontendError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| FrontendError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|e| e == SOURCE_EXT) {
            let rel = path.strip_prefix(dir).unwrap_or(path);
            let rel: Vec<String> = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            files.push(rel.join("/"));
        }
    }
    files.sort();
    Ok(files)
}

/// Parses every source file under `dir` into one unit per file.
pub fn parse_source(dir: &Path) -> Result<Vec<CompilationUnit>, FrontendError> {
    if !dir.is_dir() {
        return Err(FrontendError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut sources = Vec::new();
    for rel in source_files(dir)? {
        let full = dir.join(&rel);
        let text = std::fs::read_to_string(&full).map_err(|source| FrontendError::Io {
            path: full.clone(),
            source,
        })?;
        sources.push((rel, text));
    }
    parse_sources(&sources)
}

/// Parses in-memory `(path, text)` pairs; paths are used verbatim in the IR.
pub fn parse_sources(sources: &[(String, String)]) -> Result<Vec<CompilationUnit>, FrontendError> {
    let mut parsed = Vec::new();
    for (path, text) in sources {
        let ast = syntax::parse_file(text).map_err(|e| FrontendError::SyntaxError {
            file: path.clone(),
            line: e.line,
            col: e.col,
            message: e.message,
        })?;
        parsed.push(lower::ParsedFile {
            path: path.clone(),
            src: text,
            ast,
        });
    }
    let units = lower::lower_files(&parsed).map_err(|e| FrontendError::SyntaxError {
        file: e.path,
        line: e.error.line,
        col: e.error.col,
        message: e.error.message,
    })?;
    debug_assert!(cir::validate_units(&units).is_ok());
    Ok(units)
}

pub fn load_ir(path: &Path) -> Result<Vec<CompilationUnit>, FrontendError> {
    let text = std::fs::read_to_string(path).map_err(|source| FrontendError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    cir::parse_cir(&text, &path.display().to_string())
}

pub use cir::{emit_cir, validate_units};

//! The `conflog` command line.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 on internal invariant
//! violations. Every run emits a manifest with the tool version, the echoed
//! configuration and per-stage timings.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::catalog::{load_catalog, DocFormat, ParameterCatalog};
use crate::engines::{label_engines, EngineSet};
use crate::eval::{self, GroundTruthPoint};
use crate::frontend::{self, ir::Program};
use crate::synth::{self, EnhanceReport, ExternalGenerator};
use crate::taint::{self, BlockReport};

#[derive(Debug, Parser)]
#[command(name = "conflog", version, about = "Configuration-aware logging enhancement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Suppress the human-readable table.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Where to write the run manifest (default: next to --report, else stderr).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label configuration engine classes.
    Engines(InputArgs),
    /// Report configuration-sensitive blocks.
    Analyze(AnalyzeArgs),
    /// Inject log statements into sensitive blocks.
    Enhance(EnhanceArgs),
    /// Score predicted log points against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocsFormat {
    KvdocXml,
    KvdocJson,
    KvdocTsv,
}

impl From<DocsFormat> for DocFormat {
    fn from(f: DocsFormat) -> Self {
        match f {
            DocsFormat::KvdocXml => DocFormat::KvdocXml,
            DocsFormat::KvdocJson => DocFormat::KvdocJson,
            DocsFormat::KvdocTsv => DocFormat::KvdocTsv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendArg {
    Template,
    External,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Source directory of `.cj` files.
    #[arg(long, conflicts_with = "ir", required_unless_present = "ir")]
    pub src: Option<PathBuf>,
    /// CIR document instead of sources.
    #[arg(long)]
    pub ir: Option<PathBuf>,
    /// Parameter documentation.
    #[arg(long)]
    pub docs: PathBuf,
    /// Documentation format (default: from the file extension).
    #[arg(long, value_enum)]
    pub docs_format: Option<DocsFormat>,
    /// File listing extra engine classes, one per line.
    #[arg(long)]
    pub extra_engines: Option<PathBuf>,
    /// Structured report destination (default: stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalysisArgs {
    /// Bound on taint path length in dependence edges.
    #[arg(long, default_value_t = crate::DEFAULT_MAX_PATH_LEN,
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub max_path_len: usize,
    /// Leave control dependence edges out of the graph.
    #[arg(long)]
    pub no_control_dep: bool,
    /// Write the dependence graph to this file.
    #[arg(long)]
    pub dump_pdg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnhanceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    /// Output directory for enhanced sources.
    #[arg(long)]
    pub out: PathBuf,
    /// Draft generator.
    #[arg(long, value_enum, default_value = "template")]
    pub backend: BackendArg,
    /// External generator URL.
    #[arg(long, env = "CONFLOG_ENDPOINT")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Ground-truth points.
    #[arg(long)]
    pub truth: PathBuf,
    /// Predicted points, or an `enhance` report.
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Log lines of a run, one per line, scored for direct localization.
    #[arg(long, requires_all = ["injected", "docs"])]
    pub run_log: Option<PathBuf>,
    /// Injected misconfigured keys, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub injected: Vec<String>,
    /// Parameter documentation used to match keys in the run log.
    #[arg(long)]
    pub docs: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub docs_format: Option<DocsFormat>,
    /// Indirect inference endpoint, consulted when the direct phase fails.
    #[arg(long)]
    pub indirect_endpoint: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit 1.
    Input { code: String, message: String },
    /// Broken internal invariant: exit 2.
    Internal { code: String, message: String },
}

impl CliError {
    fn input(code: &str, message: impl fmt::Display) -> Self {
        CliError::Input {
            code: code.to_string(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => 1,
            CliError::Internal { .. } => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input { code, message } | CliError::Internal { code, message } => {
                write!(f, "error[{code}]: {message}")
            }
        }
    }
}

impl From<frontend::FrontendError> for CliError {
    fn from(e: frontend::FrontendError) -> Self {
        CliError::input(e.code(), e)
    }
}

impl From<crate::catalog::CatalogError> for CliError {
    fn from(e: crate::catalog::CatalogError) -> Self {
        CliError::input(e.code(), e)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::input("cli::Io", format!("{}: {e}", path.display()))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: serde_json::Value,
    /// Per-stage durations in execution order.
    pub timings: Vec<StageTiming>,
    pub engine_labeling_secs: Option<f64>,
    pub total_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub secs: f64,
}

struct Timer {
    stages: Vec<StageTiming>,
    start: Instant,
    labeling: Option<Duration>,
}

impl Timer {
    fn new() -> Self {
        Timer {
            stages: Vec::new(),
            start: Instant::now(),
            labeling: None,
        }
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage: name.to_string(),
            secs: t.elapsed().as_secs_f64(),
        });
        out
    }
}

fn docs_format(docs: &Path, format: Option<DocsFormat>) -> Result<DocFormat, CliError> {
    match format {
        Some(f) => Ok(f.into()),
        None => DocFormat::from_path(docs).ok_or_else(|| {
            CliError::input(
                "cli::UnknownDocFormat",
                format!("cannot infer the format of {}; pass --docs-format", docs.display()),
            )
        }),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Loaded inputs of an analysis command.
pub struct Loaded {
    pub program: Program,
    pub catalog: ParameterCatalog,
    /// Source texts by relative path; empty for `--ir` input.
    pub sources: BTreeMap<String, String>,
    pub engines: EngineSet,
}

fn load(input: &InputArgs, timer: &mut Timer) -> Result<Loaded, CliError> {
    let format = docs_format(&input.docs, input.docs_format)?;
    let catalog = timer.stage("catalog", || load_catalog(&input.docs, format))?;
    let mut sources = BTreeMap::new();
    let units = timer.stage("frontend", || -> Result<_, CliError> {
        match (&input.src, &input.ir) {
            (Some(dir), None) => {
                if !dir.is_dir() {
                    return Err(CliError::input("frontend::Io", format!("{} is not a directory", dir.display())));
                }
                for rel in frontend::source_files(dir)? {
                    let text = read(&dir.join(&rel))?;
                    sources.insert(rel, text);
                }
                let pairs: Vec<(String, String)> =
                    sources.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                Ok(frontend::parse_sources(&pairs)?)
            }
            (None, Some(ir)) => Ok(frontend::load_ir(ir)?),
            _ => Err(CliError::input("cli::Usage", "exactly one of --src and --ir is required")),
        }
    })?;
    let program = Program::new(units).map_err(|e| CliError::input("frontend::SchemaViolation", e))?;
    let extra: Vec<String> = match &input.extra_engines {
        Some(path) => read(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };
    let engines = timer.stage("labeling", || label_engines(&program, &catalog, &extra));
    timer.labeling = Some(engines.labeling_time);
    Ok(Loaded {
        program,
        catalog,
        sources,
        engines,
    })
}

#[derive(Debug, Serialize)]
struct EngineRow {
    class: String,
    kind: crate::engines::EngineKind,
    seeds: Vec<String>,
    reason: Option<crate::engines::ExpansionReason>,
    getters: Vec<String>,
}

#[derive(Debug, Serialize)]
struct EnginesReport {
    engines: Vec<EngineRow>,
    labeling_time_secs: f64,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    blocks: Vec<BlockReport>,
    sources: usize,
    valid_sources: usize,
    paths: usize,
}

/// Output of one command: the structured report and its table.
struct Output {
    json: String,
    table: String,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn run_engines(input: &InputArgs, timer: &mut Timer) -> Result<Output, CliError> {
    let loaded = load(input, timer)?;
    let e = &loaded.engines;
    let rows: Vec<EngineRow> = e
        .engines
        .iter()
        .map(|g| EngineRow {
            class: g.class_name.clone(),
            kind: g.kind,
            seeds: e.seeds_of(&g.class_name),
            reason: e.trace_entry(&g.class_name).map(|t| t.reason),
            getters: g.getters.iter().map(|x| x.signature.to_string()).collect(),
        })
        .collect();
    let mut table = String::from("class\tkind\treason\tseeds\n");
    for r in &rows {
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.class,
            r.kind.as_str(),
            r.reason.map_or("-".to_string(), |x| format!("{x:?}").to_lowercase()),
            r.seeds.join(",")
        ));
    }
    table.push_str(&format!("labeling time {:.6}s\n", e.labeling_time.as_secs_f64()));
    Ok(Output {
        json: to_json(&EnginesReport {
            engines: rows,
            labeling_time_secs: e.labeling_time.as_secs_f64(),
        }),
        table,
    })
}

fn analysis(
    loaded: &Loaded,
    args: &AnalysisArgs,
    timer: &mut Timer,
) -> Result<taint::Analysis, CliError> {
    let pdg = timer.stage("pdg", || crate::depgraph::build_pdg(&loaded.program, !args.no_control_dep));
    if let Some(path) = &args.dump_pdg {
        write(path, &pdg.to_json())?;
    }
    let sources = timer.stage("sources", || {
        taint::find_sources(&loaded.program, &pdg, &loaded.engines, &loaded.catalog)
    });
    let paths = timer.stage("taint", || {
        taint::track_taints(&loaded.program, &pdg, &sources, args.max_path_len)
    });
    if let Some(bad) = paths.iter().find(|p| !p.replays_on(&pdg) || p.len() > args.max_path_len) {
        return Err(CliError::Internal {
            code: "taint::PathInvariant".into(),
            message: format!("path {} -> {} does not replay within the bound", bad.source, bad.sink),
        });
    }
    let blocks = timer.stage("blocks", || {
        taint::extract_blocks(&loaded.program, &pdg, &paths, args.max_path_len)
    });
    Ok(taint::Analysis {
        pdg,
        sources,
        paths,
        blocks,
    })
}

fn run_analyze(args: &AnalyzeArgs, timer: &mut Timer) -> Result<Output, CliError> {
    let loaded = load(&args.input, timer)?;
    let a = analysis(&loaded, &args.analysis, timer)?;
    let report = AnalyzeReport {
        blocks: a.blocks.iter().map(BlockReport::from).collect(),
        sources: a.sources.len(),
        valid_sources: a.sources.iter().filter(|s| s.valid).count(),
        paths: a.paths.len(),
    };
    let mut table = String::from("block\tfile:line\tparameters\tpath_len\tlogs\n");
    for b in &report.blocks {
        table.push_str(&format!(
            "{}\t{}:{}\t{}\t{}\t{}\n",
            b.block_id,
            b.file,
            b.entry_line,
            b.parameters.join(","),
            b.path_len,
            b.existing_logs.len()
        ));
    }
    table.push_str(&format!("{} sensitive blocks\n", report.blocks.len()));
    Ok(Output {
        json: to_json(&report),
        table,
    })
}

fn run_enhance(args: &EnhanceArgs, timer: &mut Timer) -> Result<Output, CliError> {
    if args.input.src.is_none() {
        return Err(CliError::input("cli::Usage", "enhance rewrites sources and needs --src"));
    }
    let generator = match args.backend {
        BackendArg::Template => None,
        BackendArg::External => Some(ExternalGenerator::new(args.endpoint.clone().ok_or_else(|| {
            CliError::input("cli::Usage", "--backend external needs --endpoint or CONFLOG_ENDPOINT")
        })?)),
    };
    let loaded = load(&args.input, timer)?;
    let a = analysis(&loaded, &args.analysis, timer)?;
    let mut report = timer.stage("synth", || synth::draft_blocks(&loaded.program, &a.blocks));
    if let Some(g) = &generator {
        timer.stage("external", || {
            synth::apply_external(g, &loaded.sources, &loaded.program, &a.blocks, &mut report)
        });
    }
    let rewrite = timer.stage("rewrite", || synth::rewrite_sources(&loaded.sources, &report.drafts));
    report.injected = rewrite.applied.len();
    report.failures.extend(rewrite.failures.iter().cloned());
    let applied: BTreeSet<usize> = rewrite.applied.iter().copied().collect();
    let mut kept = Vec::new();
    for (i, d) in report.drafts.drain(..).enumerate() {
        if applied.contains(&i) {
            kept.push(d);
        }
    }
    report.drafts = kept;
    timer.stage("write", || -> Result<(), CliError> {
        for (rel, text) in &rewrite.files {
            write(&args.out.join(rel), text)?;
        }
        Ok(())
    })?;
    Ok(Output {
        json: to_json(&report),
        table: enhance_table(&report),
    })
}

fn enhance_table(report: &EnhanceReport) -> String {
    let mut table = String::from("block\tdecision\tscenario\tline\tlevel\n");
    for b in &report.blocks {
        let draft = report.drafts.iter().find(|d| d.block_id == b.block_id);
        table.push_str(&format!(
            "{}\t{:?}\t{:?}\t{}\t{}\n",
            b.block_id,
            b.decision,
            b.scenario,
            draft.map_or("-".into(), |d| d.insert_line.to_string()),
            draft.map_or("-".into(), |d| d.level.to_string()),
        ));
    }
    table.push_str(&format!("{} injected\n", report.injected));
    table
}

/// Reads GroundTruthPoint records, or the drafts of an `enhance` report.
pub fn read_points(text: &str) -> Result<Vec<GroundTruthPoint>, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("drafts").is_some() {
        let report: EnhanceReport = serde_json::from_value(value)?;
        return Ok(report
            .drafts
            .into_iter()
            .map(|d| GroundTruthPoint {
                file: d.file,
                line: d.insert_line,
                block_id: d.block_id,
                level: d.level,
                variables: d.variables,
                text: d.message_template,
            })
            .collect());
    }
    serde_json::from_value(value)
}

fn run_evaluate(args: &EvaluateArgs, timer: &mut Timer) -> Result<Output, CliError> {
    let parse = |path: &Path| -> Result<Vec<GroundTruthPoint>, CliError> {
        read_points(&read(path)?).map_err(|e| CliError::input("eval::Malformed", format!("{}: {e}", path.display())))
    };
    let truth = parse(&args.truth)?;
    let predicted = parse(&args.predicted)?;
    let mut report = timer
        .stage("evaluate", || eval::evaluate(&truth, &predicted))
        .map_err(|e| CliError::input(e.code(), e))?;
    if let (Some(log), Some(docs)) = (&args.run_log, &args.docs) {
        let catalog = load_catalog(docs, docs_format(docs, args.docs_format)?)?;
        let lines: Vec<String> = read(log)?.lines().map(str::to_string).collect();
        let injected: BTreeSet<String> = args.injected.iter().cloned().collect();
        let hook = args.indirect_endpoint.as_ref().map(|e| eval::HttpIndirect {
            endpoint: e.clone(),
            timeout: Duration::from_secs(30),
        });
        report.hit = Some(eval::direct_hit(
            &lines,
            &catalog,
            &injected,
            hook.as_ref().map(|h| h as &dyn eval::IndirectInference),
        ));
    }
    Ok(Output {
        json: to_json(&report),
        table: eval::render_table(&report),
    })
}

fn manifest_path(cli: &Cli) -> Option<PathBuf> {
    if let Some(m) = &cli.manifest {
        return Some(m.clone());
    }
    let report = match &cli.command {
        Command::Engines(a) => a.report.as_ref(),
        Command::Analyze(a) => a.input.report.as_ref(),
        Command::Enhance(a) => a.input.report.as_ref(),
        Command::Evaluate(a) => a.report.as_ref(),
    }?;
    Some(report.with_extension("manifest.json"))
}

fn execute(cli: &Cli, timer: &mut Timer) -> Result<Output, CliError> {
    match &cli.command {
        Command::Engines(a) => run_engines(a, timer),
        Command::Analyze(a) => run_analyze(a, timer),
        Command::Enhance(a) => run_enhance(a, timer),
        Command::Evaluate(a) => run_evaluate(a, timer),
    }
}

fn report_path(cli: &Cli) -> Option<&PathBuf> {
    match &cli.command {
        Command::Engines(a) => a.report.as_ref(),
        Command::Analyze(a) => a.input.report.as_ref(),
        Command::Enhance(a) => a.input.report.as_ref(),
        Command::Evaluate(a) => a.report.as_ref(),
    }
}

/// Runs one command line, writing to the given streams; returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let mut timer = Timer::new();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(&cli, &mut timer)))
        .unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(CliError::Internal {
                code: "cli::Internal".into(),
                message,
            })
        });
    let output = match outcome {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            return e.exit_code();
        }
    };
    match report_path(&cli) {
        Some(path) => {
            if let Err(e) = write(path, &output.json) {
                let _ = writeln!(stderr, "{e}");
                return 1;
            }
            if !cli.quiet {
                let _ = stdout.write_all(output.table.as_bytes());
            }
        }
        None => {
            let _ = stdout.write_all(output.json.as_bytes());
            if !cli.quiet {
                let _ = stderr.write_all(output.table.as_bytes());
            }
        }
    }
    let (command, config) = match &cli.command {
        Command::Engines(a) => ("engines", serde_json::to_value(a)),
        Command::Analyze(a) => ("analyze", serde_json::to_value(a)),
        Command::Enhance(a) => ("enhance", serde_json::to_value(a)),
        Command::Evaluate(a) => ("evaluate", serde_json::to_value(a)),
    };
    let manifest = Manifest {
        tool: "conflog",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: config.unwrap_or(serde_json::Value::Null),
        timings: timer.stages.clone(),
        engine_labeling_secs: timer.labeling.map(|d| d.as_secs_f64()),
        total_secs: timer.start.elapsed().as_secs_f64(),
    };
    let text = to_json(&manifest);
    match manifest_path(&cli) {
        Some(path) => {
            if let Err(e) = write(&path, &text) {
                let _ = writeln!(stderr, "{e}");
                return 1;
            }
        }
        None => {
            let _ = stderr.write_all(text.as_bytes());
        }
    }
    0
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

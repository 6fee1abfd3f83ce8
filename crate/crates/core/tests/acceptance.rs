//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use conflog::catalog::{load_catalog, DocFormat};
use conflog::cli::run_with;
use conflog::engines::label_engines;
use conflog::eval::{
    coverage, direct_hit, format_percent, level_metrics, position_accuracy, specific_rate,
    text_metrics, variable_metrics, GroundTruthPoint,
};
use conflog::frontend::ir::LogLevel;
use conflog::frontend::parse_source;
use conflog::interp::Interpreter;
use conflog::taint::{analyze, SourceReason};
use conflog::{EngineKind, Program};
use serde::Deserialize;
use serde_json::Value;

const TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

#[derive(Deserialize)]
struct Entry {
    class: String,
    method: String,
}

#[derive(Deserialize)]
struct Case {
    id: String,
    block_id: String,
    scenario: String,
    entry: Entry,
    misconfig: BTreeMap<String, String>,
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["conflog"];
    full.extend_from_slice(args);
    let code = run_with(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn check(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn enhance(src: &Path, out: &Path, report: &Path) -> Result<Value, String> {
    let docs = common::fixtures().join("params.xml");
    let manifest = report.with_extension("manifest.json");
    let (code, _, err) = cli(&[
        "enhance",
        "--quiet",
        "--src",
        path_str(src),
        "--docs",
        path_str(&docs),
        "--out",
        path_str(out),
        "--report",
        path_str(report),
        "--manifest",
        path_str(&manifest),
    ]);
    check(code == 0, format!("enhance exited {code}: {err}"))?;
    Ok(read_json(report))
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    conflog::frontend::source_files(dir)
        .unwrap()
        .into_iter()
        .map(|f| {
            let bytes = std::fs::read(dir.join(&f)).unwrap();
            (f, bytes)
        })
        .collect()
}

fn silent_failure_elimination() -> Outcome {
    let started = Instant::now();
    let fx = common::fixtures();
    let corpus = fx.join("minicorpus");
    let cases: Vec<Case> =
        serde_json::from_str(&std::fs::read_to_string(fx.join("cases.json")).unwrap()).unwrap();
    check(cases.len() >= 10, format!("only {} cases", cases.len()))?;

    let tmp = tempfile::tempdir().unwrap();
    let (code, stdout, err) = cli(&[
        "analyze",
        "--quiet",
        "--src",
        path_str(&corpus),
        "--docs",
        path_str(&fx.join("params.xml")),
        "--manifest",
        path_str(&tmp.path().join("analyze.manifest.json")),
    ]);
    check(code == 0, format!("analyze exited {code}: {err}"))?;
    let report: Value = serde_json::from_str(&stdout).map_err(|e| e.to_string())?;
    let found: BTreeSet<String> = report["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["block_id"].as_str().unwrap().to_string())
        .collect();
    let expected: BTreeSet<String> = cases.iter().map(|c| c.block_id.clone()).collect();
    let missing: Vec<_> = expected.difference(&found).collect();
    check(missing.is_empty(), format!("blocks not found: {missing:?}"))?;

    let out = tmp.path().join("out");
    let enhanced = enhance(&corpus, &out, &tmp.path().join("enhance.json"))?;
    let drafts = enhanced["drafts"].as_array().unwrap();
    let injected_blocks: BTreeMap<String, String> = drafts
        .iter()
        .map(|d| {
            (
                d["block_id"].as_str().unwrap().to_string(),
                d["scenario"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    for c in &cases {
        let scenario = injected_blocks
            .get(&c.block_id)
            .ok_or_else(|| format!("{}: no log injected in {}", c.id, c.block_id))?;
        check(
            *scenario == c.scenario,
            format!("{}: scenario {scenario}, expected {}", c.id, c.scenario),
        )?;
    }

    let catalog = load_catalog(&fx.join("params.xml"), DocFormat::KvdocXml).map_err(|e| e.to_string())?;
    let before = Program::new(parse_source(&corpus).unwrap()).unwrap();
    let after = Program::new(parse_source(&out).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut silent_before = 0;
    let mut hits = 0;
    for c in &cases {
        let keys: BTreeSet<String> = c.misconfig.keys().cloned().collect();
        let mut orig = Interpreter::new(&before, c.misconfig.clone());
        orig.run_entry(&c.entry.class, &c.entry.method)
            .map_err(|e| format!("{}: {e}", c.id))?;
        if direct_hit(&orig.log, &catalog, &keys, None).overall == 0.0 {
            silent_before += 1;
        }
        let mut run = Interpreter::new(&after, c.misconfig.clone());
        run.run_entry(&c.entry.class, &c.entry.method)
            .map_err(|e| format!("{}: {e}", c.id))?;
        let hit = direct_hit(&run.log, &catalog, &keys, None);
        check(
            hit.overall == 1.0 && hit.direct_phase == 1,
            format!("{}: hit {:?}, log {:?}", c.id, hit, run.log),
        )?;
        hits += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    check(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "{}/{n} blocks found, {}/{n} injected, {hits}/{n} direct hits ({silent_before}/{n} silent before), {secs:.2}s",
        expected.len(),
        injected_blocks.len(),
        n = cases.len()
    ))
}

fn taint_oracle_equivalence() -> Outcome {
    let mut programs = 0;
    let mut comparisons = 0;
    let mut with_sinks = 0;
    for seed in 0..1000u64 {
        let files = common::random_program(seed, 50);
        let program = common::program(&files);
        programs += 1;
        let include_control = seed % 2 == 0;
        for k in [1, 3, 30] {
            let (pdg, valid, tracked) = common::tracked_pairs(&program, include_control, k);
            let oracle = common::oracle_pairs(&program, &pdg, &valid, k);
            comparisons += 1;
            if tracked != oracle {
                return Err(format!(
                    "seed {seed}, k={k}: tracker {tracked:?} vs oracle {oracle:?}"
                ));
            }
            if k == 30 && !tracked.is_empty() {
                with_sinks += 1;
            }
        }
    }
    check(with_sinks * 2 > programs, format!("only {with_sinks} programs reach a sink"))?;
    Ok(format!(
        "{programs} programs, {comparisons} comparisons for k in {{1,3,30}}, 0 mismatches ({with_sinks} with sinks)"
    ))
}

fn path_bound_fidelity() -> Outcome {
    let program = common::program(&common::chain_program(31));
    let (_, _, at30) = common::tracked_pairs(&program, true, 30);
    let (_, _, at31) = common::tracked_pairs(&program, true, 31);
    check(at30.is_empty(), format!("{} sinks at 30", at30.len()))?;
    check(at31.len() == 1, format!("{} sinks at 31", at31.len()))?;
    Ok("31-hop chain: 0 sinks at k=30, 1 sink at k=31".into())
}

fn metric_fixtures() -> Outcome {
    use LogLevel::*;
    let truth = |line: u32, block: &str| GroundTruthPoint {
        file: "A.cj".into(),
        line,
        block_id: block.into(),
        level: Warn,
        variables: Vec::new(),
        text: String::new(),
    };
    check(position_accuracy("A.cj", 10, "A.f:9", &truth(10, "A.f:9")) == 1, "PA same line")?;
    check(position_accuracy("A.cj", 12, "A.f:9", &truth(10, "A.f:9")) == 0, "PA distance 2")?;
    check(position_accuracy("A.cj", 11, "A.g:20", &truth(10, "A.f:9")) == 0, "PA other block")?;

    for (t, i, la, aod) in [(Warn, Warn, 1, 1.0), (Error, Warn, 0, 0.75), (Info, Error, 0, 0.0)] {
        let (l, a) = level_metrics(t, i);
        check(l == la && close(a, aod), format!("level ({t:?},{i:?}) gave ({l},{a})"))?;
    }

    let same = variable_metrics(&["a", "b"], &["a", "b"]);
    check(
        [same.precision, same.recall, same.f1].iter().all(|v| v.is_some_and(|v| close(v, 1.0))),
        "identical variables",
    )?;
    let partial = variable_metrics(&["a", "b"], &["a"]);
    check(
        partial.precision.is_some_and(|v| close(v, 1.0))
            && partial.recall.is_some_and(|v| close(v, 0.5))
            && partial.f1.is_some_and(|v| close(v, 2.0 / 3.0)),
        format!("F1({{a,b}},{{a}}) gave {partial:?}"),
    )?;
    let empty = variable_metrics::<&str>(&[], &[]);
    check(
        empty.precision.is_none() && empty.recall.is_none() && empty.f1.is_none(),
        "empty variables are omitted",
    )?;

    let id = text_metrics("replication factor is {}", "replication factor is {}");
    check(
        [id.bleu1, id.bleu4, id.rouge1, id.rouge_l].iter().all(|v| close(*v, 1.0)),
        format!("identical texts gave {id:?}"),
    )?;
    let disjoint = text_metrics("alpha beta gamma", "delta epsilon zeta");
    check(
        [disjoint.bleu1, disjoint.bleu4, disjoint.rouge1, disjoint.rouge_l]
            .iter()
            .all(|v| close(*v, 0.0)),
        format!("disjoint texts gave {disjoint:?}"),
    )?;
    let r = text_metrics("set yarn framework", "set the yarn framework").rouge1;
    check(close(r, 6.0 / 7.0), format!("ROUGE-1 gave {r}"))?;

    let set = |xs: &[&'static str]| xs.iter().copied().collect::<BTreeSet<_>>();
    let rates = [
        (specific_rate(&set(&["a", "b", "c"]), &set(&["b"])), 2.0 / 3.0),
        (specific_rate(&set(&["a", "b"]), &set(&["a", "b"])), 0.0),
        (specific_rate(&set(&["a", "b"]), &set(&[])), 1.0),
    ];
    for (got, want) in rates {
        check(close(got, want), format!("specific_rate {got} != {want}"))?;
    }

    let pa: Vec<u8> = (0..90).map(|i| u8::from(i < 67)).collect();
    let c = coverage(&pa);
    check(close(c, 67.0 / 90.0), format!("coverage {c}"))?;
    check(format_percent(c) == "74%", format!("coverage rendered {}", format_percent(c)))?;
    Ok("PA, LA/AOD, variable P/R/F1, BLEU/ROUGE, specific_rate and coverage 67/90 = \"74%\" within 1e-9".into())
}

fn engine_kind_rules() -> Outcome {
    let dir = common::fixtures().join("engine_kinds");
    let catalog = load_catalog(&dir.join("params.json"), DocFormat::KvdocJson).map_err(|e| e.to_string())?;
    let program = Program::new(parse_source(&dir).unwrap()).unwrap();
    let engines = label_engines(&program, &catalog, &[]);
    let kinds: BTreeMap<&str, EngineKind> = engines
        .engines
        .iter()
        .map(|e| (e.class_name.as_str(), e.kind))
        .collect();
    let want_kinds = BTreeMap::from([
        ("HdfsKeys", EngineKind::KeyHolder),
        ("Props", EngineKind::DictHolder),
        ("YarnConf", EngineKind::BothHolder),
    ]);
    check(kinds == want_kinds, format!("engine kinds {kinds:?}"))?;

    let analysis = analyze(&program, &catalog, &engines, 30, true);
    let got: BTreeMap<u32, (bool, SourceReason)> = analysis
        .sources
        .iter()
        .map(|s| (program.loc(s.stmt).unwrap().line, (s.valid, s.reason)))
        .collect();
    let want = BTreeMap::from([
        (3, (false, SourceReason::KeyHolderExcluded)),
        (4, (true, SourceReason::BothHolder)),
        (5, (true, SourceReason::BothHolder)),
        (6, (true, SourceReason::BothHolder)),
        (7, (true, SourceReason::ColoredKey)),
        (8, (false, SourceReason::UnconstrainedKey)),
        (10, (true, SourceReason::ColoredKey)),
    ]);
    check(got == want, format!("classifications {got:?}"))?;
    Ok("key_holder getter invalid, both_holder getters valid untyped, dict_holder valid only with colored keys (7/7 sources)".into())
}

fn determinism_and_idempotence() -> Outcome {
    let corpus = common::fixtures().join("minicorpus");
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let first = enhance(&corpus, &t.join("a"), &t.join("a.json"))?;
    let again = enhance(&corpus, &t.join("b"), &t.join("b.json"))?;
    check(
        std::fs::read(t.join("a.json")).unwrap() == std::fs::read(t.join("b.json")).unwrap(),
        "repeated enhance reports differ",
    )?;
    check(dir_bytes(&t.join("a")) == dir_bytes(&t.join("b")), "repeated enhance outputs differ")?;
    check(first == again, "reports differ")?;

    let second = enhance(&t.join("a"), &t.join("c"), &t.join("c.json"))?;
    let n = second["injected"].as_u64().unwrap();
    check(n == 0, format!("second run injected {n}"))?;
    check(dir_bytes(&t.join("a")) == dir_bytes(&t.join("c")), "second run changed sources")?;
    Ok(format!(
        "repeat runs byte-identical; first injected {}, second injected 0 with unchanged sources",
        first["injected"]
    ))
}

fn labeling_speed() -> Outcome {
    let fx = common::fixtures();
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("engines.manifest.json");
    let (code, _, err) = cli(&[
        "engines",
        "--quiet",
        "--src",
        path_str(&fx.join("minicorpus")),
        "--docs",
        path_str(&fx.join("params.xml")),
        "--report",
        path_str(&tmp.path().join("engines.json")),
        "--manifest",
        path_str(&manifest),
    ]);
    check(code == 0, format!("engines exited {code}: {err}"))?;
    let m = read_json(&manifest);
    let secs = m["engine_labeling_secs"]
        .as_f64()
        .ok_or("manifest lacks engine_labeling_secs")?;
    check(secs < 1.0, format!("labeling took {secs}s"))?;
    let stages = m["timings"].as_array().ok_or("manifest lacks timings")?;
    check(
        stages.iter().all(|s| s["secs"].as_f64().is_some_and(|v| v >= 0.0)),
        "negative stage timing",
    )?;
    Ok(format!("labeling {secs:.6}s, recorded in the manifest"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("silent-failure elimination on the mini-corpus", silent_failure_elimination),
        ("taint oracle equivalence", taint_oracle_equivalence),
        ("path-bound fidelity", path_bound_fidelity),
        ("metric fixtures", metric_fixtures),
        ("engine-kind source rules", engine_kind_rules),
        ("determinism and idempotence", determinism_and_idempotence),
        ("engine-labeling speed", labeling_speed),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

mod common;

use std::path::Path;

use conflog::cli::run_with;
use serde_json::Value;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["conflog"];
    full.extend_from_slice(args);
    let code = run_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus() -> String {
    common::fixtures().join("minicorpus").to_str().unwrap().to_string()
}

fn docs() -> String {
    common::fixtures().join("params.xml").to_str().unwrap().to_string()
}

#[test]
fn zero_path_bound_is_rejected() {
    let (code, _, err) = cli(&["analyze", "--src", &corpus(), "--docs", &docs(), "--max-path-len", "0"]);
    assert_eq!(code, 1);
    assert!(err.contains("max-path-len"), "{err}");
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(cli(&["analyze", "--src", "a", "--ir", "b", "--docs", &docs()]).0, 1);
    assert_eq!(cli(&["analyze", "--docs", &docs()]).0, 1);
    assert_eq!(cli(&["frobnicate"]).0, 1);
    assert_eq!(cli(&["--help"]).0, 0);
    assert_eq!(cli(&["--version"]).0, 0);
}

#[test]
fn missing_inputs_are_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&["analyze", "--src", &corpus(), "--docs", s(&tmp.path().join("none.xml"))]);
    assert_eq!(code, 1, "{err}");
    let (code, _, _) = cli(&["analyze", "--src", s(&tmp.path().join("nowhere")), "--docs", &docs()]);
    assert_eq!(code, 1);
    let weird = tmp.path().join("params.yaml");
    std::fs::write(&weird, "").unwrap();
    let (code, _, err) = cli(&["analyze", "--src", &corpus(), "--docs", s(&weird)]);
    assert_eq!(code, 1);
    assert!(err.contains("docs-format"), "{err}");
}

#[test]
fn analyze_lists_every_seeded_block() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("blocks.json");
    let pdg = tmp.path().join("pdg.json");
    let (code, stdout, _) = cli(&[
        "analyze",
        "--src",
        &corpus(),
        "--docs",
        &docs(),
        "--report",
        s(&report),
        "--dump-pdg",
        s(&pdg),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("10 sensitive blocks"), "{stdout}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["blocks"].as_array().unwrap().len(), 10);
    assert!(conflog::Pdg::from_json(&std::fs::read_to_string(&pdg).unwrap()).is_ok());
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("blocks.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "analyze");
    assert_eq!(manifest["config"]["analysis"]["max_path_len"], 30);
}

#[test]
fn short_bound_and_no_control_shrink_the_report() {
    let count = |extra: &[&str]| {
        let (c, d) = (corpus(), docs());
        let mut args = vec!["analyze", "--quiet", "--src", &c, "--docs", &d];
        args.extend_from_slice(extra);
        let (code, stdout, _) = cli(&args);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&stdout).unwrap();
        v["blocks"].as_array().unwrap().len()
    };
    let full = count(&[]);
    assert!(count(&["--max-path-len", "2"]) < full);
    assert!(count(&["--no-control-dep"]) <= full);
}

#[test]
fn cir_input_matches_source_input() {
    let tmp = tempfile::tempdir().unwrap();
    let units = conflog::frontend::parse_source(Path::new(&corpus())).unwrap();
    let cir = tmp.path().join("corpus.cir.json");
    std::fs::write(&cir, conflog::frontend::cir::emit_cir(&units)).unwrap();
    let (_, from_src, _) = cli(&["analyze", "--quiet", "--src", &corpus(), "--docs", &docs()]);
    let (code, from_ir, err) = cli(&["analyze", "--quiet", "--ir", s(&cir), "--docs", &docs()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(from_src, from_ir);
}

#[test]
fn engines_honours_extra_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    std::fs::create_dir(&src).unwrap();
    std::fs::write(
        src.join("Settings.cj"),
        "class Settings {\n  public String lookup(String name) {\n    return name;\n  }\n}\n",
    )
    .unwrap();
    let extra = tmp.path().join("extra.txt");
    std::fs::write(&extra, "# hand-labeled\nSettings\n").unwrap();
    let (code, stdout, _) = cli(&["engines", "--quiet", "--src", s(&src), "--docs", &docs()]);
    assert_eq!(code, 0);
    assert!(!stdout.contains("\"Settings\""));
    let (code, stdout, _) =
        cli(&["engines", "--quiet", "--src", s(&src), "--docs", &docs(), "--extra-engines", s(&extra)]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"Settings\""), "{stdout}");
}

#[test]
fn enhance_requires_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let cir = tmp.path().join("c.json");
    std::fs::write(&cir, "[]").unwrap();
    let (code, _, err) = cli(&["enhance", "--ir", s(&cir), "--docs", &docs(), "--out", s(tmp.path())]);
    assert_eq!(code, 1);
    assert!(err.contains("--src"), "{err}");
}

#[test]
fn unreachable_generator_falls_back_to_templates() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("r.json");
    let (code, _, err) = cli(&[
        "enhance",
        "--quiet",
        "--src",
        &corpus(),
        "--docs",
        &docs(),
        "--out",
        s(&tmp.path().join("out")),
        "--report",
        s(&report),
        "--backend",
        "external",
        "--endpoint",
        "http://127.0.0.1:9/generate",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["injected"], 10);
    let failures = v["failures"].as_array().unwrap();
    assert!(failures.iter().any(|f| f.to_string().contains("EndpointUnavailable")));
    assert!(v["drafts"].as_array().unwrap().iter().all(|d| d["backend"] == "template"));
}

#[test]
fn evaluate_scores_an_enhance_report() {
    let tmp = tempfile::tempdir().unwrap();
    let enhanced = tmp.path().join("enhanced.json");
    let (code, _, _) = cli(&[
        "enhance",
        "--quiet",
        "--src",
        &corpus(),
        "--docs",
        &docs(),
        "--out",
        s(&tmp.path().join("out")),
        "--report",
        s(&enhanced),
    ]);
    assert_eq!(code, 0);
    let log = tmp.path().join("run.log");
    std::fs::write(&log, "WARN Configuration 'mapreduce.framework.name' switches a service path\n").unwrap();
    let eval = tmp.path().join("eval.json");
    let (code, stdout, err) = cli(&[
        "evaluate",
        "--truth",
        s(&enhanced),
        "--predicted",
        s(&enhanced),
        "--report",
        s(&eval),
        "--run-log",
        s(&log),
        "--injected",
        "mapreduce.framework.name",
        "--docs",
        &docs(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("100%"), "{stdout}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&eval).unwrap()).unwrap();
    assert_eq!(v["aggregates"]["coverage"], 1.0);
    assert_eq!(v["hit"]["overall"], 1.0);
    assert_eq!(v["hit"]["direct_phase"], 1);
}

#[test]
fn evaluate_rejects_malformed_points() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let (code, _, _) = cli(&["evaluate", "--truth", s(&bad), "--predicted", s(&bad)]);
    assert_eq!(code, 1);
}

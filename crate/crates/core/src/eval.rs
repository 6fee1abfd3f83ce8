//! Scoring injected logs against ground truth, and the direct-hit
//! misconfiguration matcher.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::catalog::ParameterCatalog;
use crate::frontend::ir::LogLevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPoint {
    pub file: String,
    pub line: u32,
    pub block_id: String,
    pub level: LogLevel,
    #[serde(default)]
    pub variables: Vec<String>,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("ground-truth point {index} has line 0")]
    BadLine { index: usize },
    #[error("{0}")]
    Malformed(String),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::BadLine { .. } => "eval::BadLine",
            EvalError::Malformed(_) => "eval::Malformed",
        }
    }
}

/// 1 when the prediction is within one line of the truth and in the same block.
pub fn position_accuracy(file: &str, line: u32, block_id: &str, truth: &GroundTruthPoint) -> u8 {
    u8::from(file == truth.file && line.abs_diff(truth.line) <= 1 && block_id == truth.block_id)
}

/// Largest ordinal distance from `level` to any level of the scale.
pub fn max_dist(level: LogLevel) -> usize {
    let o = level.ordinal();
    o.max(LogLevel::ALL.len() - 1 - o)
}

/// (LA, AOD) for a truth level and an injected level.
pub fn level_metrics(truth: LogLevel, injected: LogLevel) -> (u8, f64) {
    let dist = truth.ordinal().abs_diff(injected.ordinal());
    (u8::from(dist == 0), 1.0 - dist as f64 / max_dist(truth) as f64)
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct VariableScores {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
}

/// Precision, recall and F1 of injected variables against truth variables;
/// each is omitted where its denominator vanishes.
pub fn variable_metrics<S: AsRef<str>>(truth: &[S], injected: &[S]) -> VariableScores {
    let t: BTreeSet<String> = truth.iter().map(|s| normalize_ws(s.as_ref())).collect();
    let i: BTreeSet<String> = injected.iter().map(|s| normalize_ws(s.as_ref())).collect();
    let common = t.intersection(&i).count() as f64;
    let precision = (!i.is_empty()).then(|| common / i.len() as f64);
    let recall = (!t.is_empty()).then(|| common / t.len() as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    VariableScores {
        precision,
        recall,
        f1,
    }
}

/// Lowercased whitespace tokens with `{}`, `%s` and `%d` mapped to `<*>`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|t| t.replace("{}", "<*>").replace("%s", "<*>").replace("%d", "<*>"))
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Sentence BLEU up to order `max_n`; orders above one are add-one smoothed.
pub fn bleu(reference: &[String], hypothesis: &[String], max_n: usize) -> f64 {
    if reference.is_empty() && hypothesis.is_empty() {
        return 1.0;
    }
    if hypothesis.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let refs = ngrams(reference, n);
        let hyps = ngrams(hypothesis, n);
        let matched: usize = hyps
            .iter()
            .map(|(g, c)| (*c).min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        let total = hypothesis.len().saturating_sub(n - 1);
        let (num, den) = if n == 1 {
            (matched as f64, total as f64)
        } else {
            (matched as f64 + 1.0, total as f64 + 1.0)
        };
        if num == 0.0 {
            return 0.0;
        }
        log_sum += (num / den).ln() / max_n as f64;
    }
    let (c, r) = (hypothesis.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * log_sum.exp()
}

fn f1(matched: f64, hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 && ref_len == 0 {
        return 1.0;
    }
    if matched == 0.0 {
        return 0.0;
    }
    let p = matched / hyp_len as f64;
    let r = matched / ref_len as f64;
    2.0 * p * r / (p + r)
}

pub fn rouge1(reference: &[String], hypothesis: &[String]) -> f64 {
    let refs = ngrams(reference, 1);
    let matched: usize = ngrams(hypothesis, 1)
        .iter()
        .map(|(g, c)| (*c).min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    f1(matched as f64, hypothesis.len(), reference.len())
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn rouge_l(reference: &[String], hypothesis: &[String]) -> f64 {
    f1(lcs(reference, hypothesis) as f64, hypothesis.len(), reference.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextScores {
    pub bleu1: f64,
    pub bleu4: f64,
    pub rouge1: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

pub fn text_metrics(truth: &str, injected: &str) -> TextScores {
    let (r, h) = (tokenize(truth), tokenize(injected));
    TextScores {
        bleu1: bleu(&r, &h, 1),
        bleu4: bleu(&r, &h, 4),
        rouge1: rouge1(&r, &h),
        rouge_l: rouge_l(&r, &h),
    }
}

/// Fraction of valid cases not also valid in the other version.
pub fn specific_rate<S: Ord>(valid: &BTreeSet<S>, other: &BTreeSet<S>) -> f64 {
    if valid.is_empty() {
        return 0.0;
    }
    valid.difference(other).count() as f64 / valid.len() as f64
}

/// Second-phase inference used when no injected key shows up in the logs.
pub trait IndirectInference {
    /// Whether the run log lets the hook recover one of `injected`.
    fn infer(&self, run_log: &[String], injected: &BTreeSet<String>) -> bool;
}

/// Posts the run log to an endpoint answering `{"params": [...]}`.
#[derive(Debug, Clone)]
pub struct HttpIndirect {
    pub endpoint: String,
    pub timeout: Duration,
}

#[derive(Serialize)]
struct InferRequest<'a> {
    logs: &'a [String],
}

#[derive(Deserialize)]
struct InferResponse {
    #[serde(default)]
    params: Vec<String>,
}

impl IndirectInference for HttpIndirect {
    fn infer(&self, run_log: &[String], injected: &BTreeSet<String>) -> bool {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        agent
            .post(&self.endpoint)
            .send_json(InferRequest { logs: run_log })
            .ok()
            .and_then(|r| r.into_json::<InferResponse>().ok())
            .is_some_and(|r| r.params.iter().any(|p| injected.contains(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub overall: f64,
    pub direct_phase: i8,
}

/// Direct phase: some log line names an injected key.
pub fn direct_hit(
    run_log: &[String],
    catalog: &ParameterCatalog,
    injected: &BTreeSet<String>,
    indirect: Option<&dyn IndirectInference>,
) -> Hit {
    let direct = run_log.iter().any(|line| {
        catalog
            .match_parameters_in_text(line)
            .iter()
            .any(|m| injected.contains(&m.key))
    });
    if direct {
        return Hit {
            overall: 1.0,
            direct_phase: 1,
        };
    }
    let recovered = !run_log.is_empty() && indirect.is_some_and(|h| h.infer(run_log, injected));
    Hit {
        overall: if recovered { 0.5 } else { 0.0 },
        direct_phase: -1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub file: String,
    pub line: u32,
    pub block_id: String,
    pub pa: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub la: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aod: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge1: Option<f64>,
    #[serde(rename = "rougeL", skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Aggregates {
    pub points: usize,
    pub pa_hits: usize,
    pub coverage: f64,
    /// Means over PA=1 points; a metric absent from every point is omitted.
    pub means: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub points: Vec<PointReport>,
    pub aggregates: Aggregates,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hit: Option<Hit>,
}

/// Coverage rendered as a whole percentage, e.g. 67/90 as "74%".
pub fn format_percent(fraction: f64) -> String {
    format!("{:.0}%", fraction * 100.0)
}

pub fn coverage(pa: &[u8]) -> f64 {
    if pa.is_empty() {
        return 0.0;
    }
    pa.iter().filter(|p| **p == 1).count() as f64 / pa.len() as f64
}

/// Matches each truth point to the closest same-block prediction and scores it.
pub fn evaluate(truth: &[GroundTruthPoint], predicted: &[GroundTruthPoint]) -> Result<EvalReport, EvalError> {
    for (index, t) in truth.iter().enumerate() {
        if t.line == 0 {
            return Err(EvalError::BadLine { index });
        }
    }
    let mut points = Vec::new();
    for t in truth {
        let best = predicted
            .iter()
            .filter(|p| position_accuracy(&p.file, p.line, &p.block_id, t) == 1)
            .min_by_key(|p| (p.line.abs_diff(t.line), p.line));
        let mut r = PointReport {
            file: t.file.clone(),
            line: t.line,
            block_id: t.block_id.clone(),
            pa: u8::from(best.is_some()),
            la: None,
            aod: None,
            var_precision: None,
            var_recall: None,
            var_f1: None,
            bleu1: None,
            bleu4: None,
            rouge1: None,
            rouge_l: None,
        };
        if let Some(p) = best {
            let (la, aod) = level_metrics(t.level, p.level);
            let v = variable_metrics(&t.variables, &p.variables);
            let s = text_metrics(&t.text, &p.text);
            r.la = Some(la);
            r.aod = Some(aod);
            r.var_precision = v.precision;
            r.var_recall = v.recall;
            r.var_f1 = v.f1;
            r.bleu1 = Some(s.bleu1);
            r.bleu4 = Some(s.bleu4);
            r.rouge1 = Some(s.rouge1);
            r.rouge_l = Some(s.rouge_l);
        }
        points.push(r);
    }
    let pa: Vec<u8> = points.iter().map(|p| p.pa).collect();
    let mut means = BTreeMap::new();
    let columns: [(&str, fn(&PointReport) -> Option<f64>); 9] = [
        ("la", |p| p.la.map(f64::from)),
        ("aod", |p| p.aod),
        ("var_precision", |p| p.var_precision),
        ("var_recall", |p| p.var_recall),
        ("var_f1", |p| p.var_f1),
        ("bleu1", |p| p.bleu1),
        ("bleu4", |p| p.bleu4),
        ("rouge1", |p| p.rouge1),
        ("rougeL", |p| p.rouge_l),
    ];
    for (name, get) in columns {
        let vals: Vec<f64> = points.iter().filter(|p| p.pa == 1).filter_map(get).collect();
        if !vals.is_empty() {
            means.insert(name.to_string(), vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    Ok(EvalReport {
        aggregates: Aggregates {
            points: points.len(),
            pa_hits: pa.iter().filter(|p| **p == 1).count(),
            coverage: coverage(&pa),
            means,
        },
        points,
        hit: None,
    })
}

/// Human-readable summary table.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::from("file:line\tblock\tPA\tLA\tAOD\tVarF1\tBLEU-4\tROUGE-L\n");
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    for p in &report.points {
        out.push_str(&format!(
            "{}:{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            p.file,
            p.line,
            p.block_id,
            p.pa,
            p.la.map_or("-".into(), |v| v.to_string()),
            cell(p.aod),
            cell(p.var_f1),
            cell(p.bleu4),
            cell(p.rouge_l)
        ));
    }
    let a = &report.aggregates;
    out.push_str(&format!(
        "coverage {} ({}/{})\n",
        format_percent(a.coverage),
        a.pa_hits,
        a.points
    ));
    for (k, v) in &a.means {
        out.push_str(&format!("mean {k} {v:.3}\n"));
    }
    if let Some(h) = &report.hit {
        out.push_str(&format!("hit {} (direct {})\n", h.overall, h.direct_phase));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(line: u32, block: &str) -> GroundTruthPoint {
        GroundTruthPoint {
            file: "A.cj".into(),
            line,
            block_id: block.into(),
            level: LogLevel::Warn,
            variables: Vec::new(),
            text: String::new(),
        }
    }

    #[test]
    fn position() {
        let t = point(10, "A.f:9");
        assert_eq!(position_accuracy("A.cj", 10, "A.f:9", &t), 1);
        assert_eq!(position_accuracy("A.cj", 12, "A.f:9", &t), 0);
        assert_eq!(position_accuracy("A.cj", 11, "A.f:11", &t), 0);
    }

    #[test]
    fn levels() {
        assert_eq!(level_metrics(LogLevel::Warn, LogLevel::Warn), (1, 1.0));
        assert_eq!(level_metrics(LogLevel::Error, LogLevel::Warn), (0, 0.75));
        assert_eq!(level_metrics(LogLevel::Info, LogLevel::Error), (0, 0.0));
    }

    #[test]
    fn rouge_hand_count() {
        let s = text_metrics("set yarn framework", "set the yarn framework");
        assert!((s.rouge1 - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_logs_never_hit() {
        struct Yes;
        impl IndirectInference for Yes {
            fn infer(&self, _: &[String], _: &BTreeSet<String>) -> bool {
                true
            }
        }
        let c = ParameterCatalog::from_parameters(Vec::<crate::catalog::ConfigParameter>::new()).unwrap();
        let h = direct_hit(&[], &c, &BTreeSet::new(), Some(&Yes));
        assert_eq!((h.overall, h.direct_phase), (0.0, -1));
    }
}

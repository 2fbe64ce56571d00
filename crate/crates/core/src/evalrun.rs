//! Scoring prediction files against reference answers and rendering reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::dataset::{select_part, DataSplit, DatasetError, Part, PredictionRecord};
use crate::jsonl::{self, JsonlError};
use crate::metrics::{aggregate, MetricError, MetricRegistry, MetricTriple};
use crate::spanlab::LabeledExample;
use crate::text::{tokenize, TokenSeq};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no prediction for example {id:?} in model {model:?}")]
    MissingPrediction { model: String, id: String },
    #[error("prediction file lists example {0:?} more than once")]
    DuplicatePrediction(String),
    #[error("nothing to evaluate: the reference set is empty")]
    NoReferences,
    #[error("unknown report format {0:?} (expected text, csv or jsonl)")]
    UnknownFormat(String),
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionSet {
    pub model_name: String,
    pub predictions: BTreeMap<String, String>,
}

impl PredictionSet {
    pub fn from_records(model_name: &str, records: Vec<PredictionRecord>) -> Result<Self, EvalError> {
        let mut predictions = BTreeMap::new();
        for rec in records {
            if predictions.insert(rec.id.clone(), rec.prediction).is_some() {
                return Err(EvalError::DuplicatePrediction(rec.id));
            }
        }
        Ok(PredictionSet {
            model_name: model_name.to_string(),
            predictions,
        })
    }

    pub fn parse(model_name: &str, text: &str, path: &Path) -> Result<Self, EvalError> {
        PredictionSet::from_records(model_name, jsonl::parse_jsonl(text, path)?)
    }

    /// Reads `{id, prediction}` lines. The model name defaults to the file
    /// stem.
    pub fn load(path: &Path, model_name: Option<&str>) -> Result<Self, EvalError> {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".to_string());
        PredictionSet::from_records(model_name.unwrap_or(&stem), jsonl::read_jsonl(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub id: String,
    pub answer: String,
}

/// Reference answers for one split part, flagged posts excluded unless asked.
pub fn references_for(
    examples: &[LabeledExample],
    split: &DataSplit,
    part: Part,
    include_flagged: bool,
) -> Result<Vec<Reference>, EvalError> {
    Ok(select_part(examples, split, part, include_flagged)?
        .into_iter()
        .map(|ex| Reference {
            id: ex.id().to_string(),
            answer: ex.post.answer.clone(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model_name: String,
    pub rouge1: MetricTriple,
    pub rouge2: MetricTriple,
    pub rouge_l: MetricTriple,
    /// Absent when no embedding provider was configured.
    pub semantic: Option<MetricTriple>,
}

impl ReportRow {
    /// The 12 score cells in column order.
    pub fn cells(&self) -> [Option<f64>; 12] {
        let mut out = [None; 12];
        let triples = [Some(self.rouge1), Some(self.rouge2), Some(self.rouge_l), self.semantic];
        for (i, t) in triples.iter().enumerate() {
            if let Some(t) = t {
                for (j, v) in t.as_array().into_iter().enumerate() {
                    out[i * 3 + j] = Some(v);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split_id: String,
    pub example_count: usize,
    pub rows: Vec<ReportRow>,
}

struct ExampleScores {
    rouge1: MetricTriple,
    rouge2: MetricTriple,
    rouge_l: MetricTriple,
    semantic: Option<MetricTriple>,
}

fn score_one(metrics: &MetricRegistry, prediction: &str, reference: &str) -> Result<ExampleScores, MetricError> {
    let cand = tokenize(prediction);
    let refs = tokenize(reference);
    let has_semantic = metrics.get("semantic").is_some();
    if cand.is_empty() || refs.is_empty() {
        return Ok(ExampleScores {
            rouge1: MetricTriple::zero(),
            rouge2: MetricTriple::zero(),
            rouge_l: MetricTriple::zero(),
            semantic: has_semantic.then(MetricTriple::zero),
        });
    }
    let run = |name: &str, c: &TokenSeq, r: &TokenSeq| metrics.require(name)?.score(c, r);
    Ok(ExampleScores {
        rouge1: run("rouge1", &cand, &refs)?,
        rouge2: run("rouge2", &cand, &refs)?,
        rouge_l: run("rougeL", &cand, &refs)?,
        semantic: match metrics.get("semantic") {
            Some(m) => Some(m.score(&cand, &refs)?),
            None => None,
        },
    })
}

/// Scores one model over `references`, macro-averaged.
///
/// Empty predictions score zero on every metric. Per-example scoring is
/// spread over a few threads; results are combined in reference order.
pub fn evaluate(
    predictions: &PredictionSet,
    references: &[Reference],
    metrics: &MetricRegistry,
) -> Result<ReportRow, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let mut pairs = Vec::with_capacity(references.len());
    for r in references {
        let pred = predictions
            .predictions
            .get(&r.id)
            .ok_or_else(|| EvalError::MissingPrediction {
                model: predictions.model_name.clone(),
                id: r.id.clone(),
            })?;
        pairs.push((pred.as_str(), r.answer.as_str()));
    }

    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = pairs.len().div_ceil(workers);
    let scores: Vec<ExampleScores> = thread::scope(|s| {
        let handles: Vec<_> = pairs
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|(p, r)| score_one(metrics, p, r))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scoring thread panicked"))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.into_iter().flatten().collect())
    })?;

    let column = |f: fn(&ExampleScores) -> Option<MetricTriple>| -> Result<Option<MetricTriple>, MetricError> {
        let values: Option<Vec<MetricTriple>> = scores.iter().map(f).collect();
        values.map(|v| aggregate(&v)).transpose()
    };
    Ok(ReportRow {
        model_name: predictions.model_name.clone(),
        rouge1: column(|s| Some(s.rouge1))?.expect("rouge1 always present"),
        rouge2: column(|s| Some(s.rouge2))?.expect("rouge2 always present"),
        rouge_l: column(|s| Some(s.rouge_l))?.expect("rougeL always present"),
        semantic: column(|s| s.semantic)?,
    })
}

/// Evaluates several models on the same references.
pub fn evaluate_all(
    split_id: &str,
    prediction_sets: &[PredictionSet],
    references: &[Reference],
    metrics: &MetricRegistry,
) -> Result<EvalReport, EvalError> {
    let rows = prediction_sets
        .iter()
        .map(|p| evaluate(p, references, metrics))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        split_id: split_id.to_string(),
        example_count: references.len(),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    TextTable,
    Csv,
    Jsonl,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "text_table" | "table" => Ok(ReportFormat::TextTable),
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" => Ok(ReportFormat::Jsonl),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

pub const METRIC_LABELS: [&str; 4] = ["ROUGE-1", "ROUGE-2", "ROUGE-L", "Semantic"];
const METRIC_KEYS: [&str; 4] = ["rouge1", "rouge2", "rougeL", "semantic"];
const NA: &str = "n/a";

/// Score as a percentage with two decimals.
pub fn format_score(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}", v * 100.0),
        None => NA.to_string(),
    }
}

fn csv_header() -> Vec<String> {
    let mut h = vec!["model".to_string()];
    for key in METRIC_KEYS {
        for part in ["p", "r", "f"] {
            h.push(format!("{key}_{part}"));
        }
    }
    h
}

#[derive(Serialize)]
struct JsonlRow<'a> {
    model: &'a str,
    split_id: &'a str,
    example_count: usize,
    scores: BTreeMap<&'static str, Option<BTreeMap<&'static str, f64>>>,
}

fn rounded(v: f64) -> f64 {
    (v * 10_000.0).round() / 100.0
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::TextTable => render_table(report),
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(csv_header()).expect("write to memory");
            for row in &report.rows {
                let mut rec = vec![row.model_name.clone()];
                rec.extend(row.cells().iter().map(|c| format_score(*c)));
                w.write_record(&rec).expect("write to memory");
            }
            String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is utf-8")
        }
        ReportFormat::Jsonl => {
            let rows: Vec<JsonlRow> = report
                .rows
                .iter()
                .map(|row| {
                    let cells = row.cells();
                    let scores = METRIC_KEYS
                        .iter()
                        .enumerate()
                        .map(|(i, key)| {
                            let triple = cells[i * 3].map(|_| {
                                ["precision", "recall", "f1"]
                                    .into_iter()
                                    .zip(&cells[i * 3..i * 3 + 3])
                                    .map(|(k, v)| (k, rounded(v.expect("complete triple"))))
                                    .collect()
                            });
                            (*key, triple)
                        })
                        .collect();
                    JsonlRow {
                        model: &row.model_name,
                        split_id: &report.split_id,
                        example_count: report.example_count,
                        scores,
                    }
                })
                .collect();
            jsonl::to_jsonl(&rows)
        }
    }
}

fn render_table(report: &EvalReport) -> String {
    const CELL: usize = 7;
    let name_w = report
        .rows
        .iter()
        .map(|r| r.model_name.chars().count())
        .chain(["Model".len()])
        .max()
        .unwrap_or(5);
    let group_w = CELL * 3 + 2;
    let mut out = String::new();
    let _ = writeln!(out, "split: {}  examples: {}", report.split_id, report.example_count);
    let mut line = format!("{:<name_w$}", "Model");
    for label in METRIC_LABELS {
        let _ = write!(line, " | {label:^group_w$}");
    }
    let _ = writeln!(out, "{}", line.trim_end());
    let mut line = format!("{:<name_w$}", "");
    for _ in METRIC_LABELS {
        let _ = write!(line, " | {:>CELL$} {:>CELL$} {:>CELL$}", "P", "R", "F");
    }
    let _ = writeln!(out, "{}", line.trim_end());
    let _ = writeln!(out, "{}", "-".repeat(name_w + 4 * (group_w + 3)));
    for row in &report.rows {
        let cells = row.cells();
        let mut line = format!("{:<name_w$}", row.model_name);
        for group in cells.chunks(3) {
            line.push_str(" |");
            for c in group {
                let _ = write!(line, " {:>CELL$}", format_score(*c));
            }
        }
        let _ = writeln!(out, "{line}");
    }
    out
}

/// One row read back from a CSV report; `None` stands for "n/a".
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRow {
    pub model_name: String,
    pub values: [Option<f64>; 12],
}

pub fn parse_csv_report(text: &str) -> Result<Vec<ParsedRow>, EvalError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| EvalError::MalformedReport(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != csv_header() {
        return Err(EvalError::MalformedReport("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| EvalError::MalformedReport(e.to_string()))?;
        let mut values = [None; 12];
        for (slot, cell) in values.iter_mut().zip(rec.iter().skip(1)) {
            *slot = match cell {
                NA => None,
                v => Some(v.parse::<f64>().map_err(|e| EvalError::MalformedReport(format!("{v:?}: {e}")))?),
            };
        }
        rows.push(ParsedRow {
            model_name: rec[0].to_string(),
            values,
        });
    }
    Ok(rows)
}

//! Per-class F1, confusion tallies, evaluation reports and sweep tables.
//!
//! The toxic label is the positive class. Accuracy is not reported; it can
//! be recovered from the published confusion counts.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::backend::LanguageModel;
use crate::classifiers::{ClassifyError, Decision, Method, MethodKind};
use crate::corpus::{Dataset, Document, Label};

/// `2tp / (2tp + fp + fn)`, or 0 when nothing was predicted or present.
pub fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    /// Documents dropped because classification failed.
    pub skipped: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, gold: Label, predicted: Label) {
        match (gold, predicted) {
            (Label::Toxic, Label::Toxic) => self.tp += 1,
            (Label::NonToxic, Label::Toxic) => self.fp += 1,
            (Label::Toxic, Label::NonToxic) => self.fn_ += 1,
            (Label::NonToxic, Label::NonToxic) => self.tn += 1,
        }
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn scored(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn total(&self) -> u64 {
        self.scored() + self.skipped
    }

    pub fn scores(&self) -> ClassF1 {
        ClassF1::from_counts(self)
    }
}

impl Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
            skipped: self.skipped + rhs.skipped,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Tallies `(gold, predicted)` pairs.
pub fn tally(pairs: impl IntoIterator<Item = (Label, Label)>) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for (gold, predicted) in pairs {
        counts.record(gold, predicted);
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassF1 {
    pub neg_f1: f64,
    pub pos_f1: f64,
    pub macro_f1: f64,
}

impl ClassF1 {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let pos_f1 = f1(c.tp, c.fp, c.fn_);
        // negative class: its true positives are tn, its false positives are fn
        let neg_f1 = f1(c.tn, c.fn_, c.fp);
        ClassF1 {
            neg_f1,
            pos_f1,
            macro_f1: (neg_f1 + pos_f1) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_name: String,
    pub method: MethodKind,
    pub backend_name: String,
    pub prompt_id: Option<String>,
    pub neg_f1: f64,
    pub pos_f1: f64,
    pub macro_f1: f64,
    pub counts: ConfusionCounts,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("document '{0}' has no gold label")]
    Unlabeled(String),
    #[error("dataset '{0}' is empty")]
    EmptyDataset(String),
    #[error("all {skipped} documents failed to classify; first failure: {first_error}")]
    AllSkipped {
        skipped: u64,
        first_error: String,
        transport: bool,
    },
    #[error("{skipped} of {total} documents skipped, above the allowed rate {max_rate}")]
    SkipRateExceeded { skipped: u64, total: u64, max_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipPolicy {
    pub max_skip_rate: f64,
}

impl Default for SkipPolicy {
    fn default() -> Self {
        SkipPolicy { max_skip_rate: 0.01 }
    }
}

/// A classifier plus the prompt identifier reported alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    pub prompt_id: Option<String>,
}

impl MethodRun {
    pub fn new(method: Method, prompt_id: Option<String>) -> Self {
        MethodRun { method, prompt_id }
    }
}

/// Classifies a batch of documents, returning results in input order.
pub trait DocumentRunner {
    fn classify_all(
        &self,
        docs: &[Document],
        method: &Method,
        model: &dyn LanguageModel,
    ) -> Vec<Result<Decision, ClassifyError>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl DocumentRunner for Sequential {
    fn classify_all(
        &self,
        docs: &[Document],
        method: &Method,
        model: &dyn LanguageModel,
    ) -> Vec<Result<Decision, ClassifyError>> {
        docs.iter().map(|d| method.classify(d, model)).collect()
    }
}

/// Evaluation result together with the per-document outcomes behind it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub outcomes: Vec<Result<Decision, ClassifyError>>,
}

pub fn evaluate(
    dataset: &Dataset,
    run: &MethodRun,
    model: &dyn LanguageModel,
    config_fingerprint: &str,
    policy: SkipPolicy,
) -> Result<Evaluation, EvalError> {
    evaluate_with(&Sequential, dataset, run, model, config_fingerprint, policy)
}

pub fn evaluate_with(
    runner: &dyn DocumentRunner,
    dataset: &Dataset,
    run: &MethodRun,
    model: &dyn LanguageModel,
    config_fingerprint: &str,
    policy: SkipPolicy,
) -> Result<Evaluation, EvalError> {
    if let Some(doc) = dataset.first_unlabeled() {
        return Err(EvalError::Unlabeled(doc.id.clone()));
    }
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset(dataset.name.clone()));
    }
    let outcomes = runner.classify_all(dataset.documents(), &run.method, model);

    let mut counts = ConfusionCounts::default();
    let mut first_error = None;
    let mut all_transport = true;
    for (doc, outcome) in dataset.documents().iter().zip(&outcomes) {
        let gold = doc.gold_label.expect("labels checked above");
        match outcome {
            Ok(decision) => counts.record(gold, decision.label),
            Err(err) => {
                counts.skip();
                all_transport &= matches!(err, ClassifyError::Backend(b) if b.is_transport());
                first_error.get_or_insert_with(|| format!("{}: {err}", doc.id));
            }
        }
    }

    if counts.scored() == 0 {
        return Err(EvalError::AllSkipped {
            skipped: counts.skipped,
            first_error: first_error.unwrap_or_default(),
            transport: all_transport,
        });
    }
    let rate = counts.skipped as f64 / counts.total() as f64;
    if rate > policy.max_skip_rate {
        return Err(EvalError::SkipRateExceeded {
            skipped: counts.skipped,
            total: counts.total(),
            max_rate: policy.max_skip_rate,
        });
    }

    let scores = counts.scores();
    Ok(Evaluation {
        report: EvalReport {
            dataset_name: dataset.name.clone(),
            method: run.method.kind(),
            backend_name: model.name().to_string(),
            prompt_id: run.prompt_id.clone(),
            neg_f1: scores.neg_f1,
            pos_f1: scores.pos_f1,
            macro_f1: scores.macro_f1,
            counts,
            config_fingerprint: config_fingerprint.to_string(),
        },
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub model: String,
    pub method: MethodKind,
    pub dataset: String,
    /// Scores, or the note explaining why the cell failed.
    pub outcome: Result<ClassF1, String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub const HEADER: &'static str = "model,method,dataset,neg_f1,pos_f1,macro_f1";

    /// Plot-ready CSV; failed cells keep their row with empty metric fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for cell in &self.cells {
            out.push_str(&csv_field(&cell.model));
            out.push(',');
            out.push_str(cell.method.as_str());
            out.push(',');
            out.push_str(&csv_field(&cell.dataset));
            match &cell.outcome {
                Ok(s) => out.push_str(&format!(",{},{},{}\n", s.neg_f1, s.pos_f1, s.macro_f1)),
                Err(_) => out.push_str(",,,\n"),
            }
        }
        out
    }

    pub fn failures(&self) -> impl Iterator<Item = (&SweepCell, &str)> {
        self.cells
            .iter()
            .filter_map(|c| c.outcome.as_ref().err().map(|note| (c, note.as_str())))
    }
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Evaluates every (backend, method, dataset) combination in that nesting
/// order. A failing cell is recorded with its error and the sweep goes on.
pub fn sweep_with(
    runner: &dyn DocumentRunner,
    backends: &[&dyn LanguageModel],
    methods: &[MethodRun],
    datasets: &[Dataset],
    config_fingerprint: &str,
    policy: SkipPolicy,
    mut on_cell: impl FnMut(&SweepCell),
) -> SweepTable {
    let mut table = SweepTable::default();
    for model in backends {
        for run in methods {
            for dataset in datasets {
                let outcome = evaluate_with(runner, dataset, run, *model, config_fingerprint, policy)
                    .map(|e| ClassF1 {
                        neg_f1: e.report.neg_f1,
                        pos_f1: e.report.pos_f1,
                        macro_f1: e.report.macro_f1,
                    })
                    .map_err(|e| e.to_string());
                let cell = SweepCell {
                    model: model.name().to_string(),
                    method: run.method.kind(),
                    dataset: dataset.name.clone(),
                    outcome,
                };
                on_cell(&cell);
                table.cells.push(cell);
            }
        }
    }
    table
}

pub fn sweep(
    backends: &[&dyn LanguageModel],
    methods: &[MethodRun],
    datasets: &[Dataset],
    config_fingerprint: &str,
    policy: SkipPolicy,
) -> SweepTable {
    sweep_with(&Sequential, backends, methods, datasets, config_fingerprint, policy, |_| {})
}

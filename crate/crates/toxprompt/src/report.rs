//! Output artifacts: report table/record/CSV, decision records and explanations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use toxprompt_core::attribution::Explanation;
use toxprompt_core::classifiers::{Decision, Evidence, MethodKind};
use toxprompt_core::corpus::{Document, Label};
use toxprompt_core::evaluation::EvalReport;

use crate::error::LoadError;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

/// Human-readable table, one row per report.
pub fn render_table(reports: &[EvalReport], fingerprint: &str) -> String {
    let header = ["dataset", "backend", "method", "prompt", "neg-F1", "pos-F1", "macro-F1", "skipped"];
    let rows: Vec<[String; 8]> = reports
        .iter()
        .map(|r| {
            [
                r.dataset_name.clone(),
                r.backend_name.clone(),
                r.method.as_str().to_string(),
                r.prompt_id.clone().unwrap_or_else(|| "-".into()),
                format!("{:.4}", r.neg_f1),
                format!("{:.4}", r.pos_f1),
                format!("{:.4}", r.macro_f1),
                r.counts.skipped.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            // text columns left-aligned, numbers right-aligned
            .map(|(i, (c, w))| if i < 4 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        format!("{}\n", padded.join(" | ").trim_end())
    };
    let mut out = format!("config fingerprint: {fingerprint}\n");
    out.push_str(&line(&header.map(String::from)));
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("{}\n", rule.join("-+-")));
    for row in &rows {
        out.push_str(&line(row));
    }
    out
}

pub fn render_json(reports: &[EvalReport]) -> String {
    let mut out = serde_json::to_string_pretty(reports).expect("reports serialize");
    out.push('\n');
    out
}

pub fn render_csv(reports: &[EvalReport]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "dataset", "backend", "method", "prompt_id", "neg_f1", "pos_f1", "macro_f1", "tp", "fp", "fn", "tn",
            "skipped", "config_fingerprint",
        ])
        .expect("in-memory write");
    for r in reports {
        writer
            .write_record([
                r.dataset_name.clone(),
                r.backend_name.clone(),
                r.method.as_str().to_string(),
                r.prompt_id.clone().unwrap_or_default(),
                r.neg_f1.to_string(),
                r.pos_f1.to_string(),
                r.macro_f1.to_string(),
                r.counts.tp.to_string(),
                r.counts.fp.to_string(),
                r.counts.fn_.to_string(),
                r.counts.tn.to_string(),
                r.counts.skipped.to_string(),
                r.config_fingerprint.clone(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), LoadError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| LoadError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| LoadError::io(path, e))
}

/// Writes the three report forms into `dir`, returning their paths.
pub fn write_reports(dir: &Path, reports: &[EvalReport], fingerprint: &str) -> Result<Vec<PathBuf>, LoadError> {
    let files = [
        (REPORT_TXT, render_table(reports, fingerprint)),
        (REPORT_JSON, render_json(reports)),
        (REPORT_CSV, render_csv(reports)),
    ];
    let mut paths = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        write_file(&path, &contents)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRecord<'a> {
    pub id: &'a str,
    pub backend: &'a str,
    pub method: MethodKind,
    pub label: Label,
    pub p_toxic: f64,
    pub s_pos: f64,
    pub s_neg: f64,
    pub evidence: &'a Evidence,
    pub config_fingerprint: &'a str,
}

impl<'a> DecisionRecord<'a> {
    pub fn new(doc: &'a Document, backend: &'a str, decision: &'a Decision, fingerprint: &'a str) -> Self {
        DecisionRecord {
            id: &doc.id,
            backend,
            method: decision.method,
            label: decision.label,
            p_toxic: decision.p_toxic,
            s_pos: decision.s_pos,
            s_neg: decision.s_neg,
            evidence: &decision.evidence,
            config_fingerprint: fingerprint,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("decision serializes")
    }
}

/// An explanation with the surrounding row of the qualitative table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationRecord {
    pub id: String,
    pub text: String,
    pub gold_label: Option<Label>,
    pub predicted_label: Label,
    pub p_toxic: f64,
    pub method: MethodKind,
    pub backend: String,
    /// Lexicon terms present in the text.
    pub bad_words: Vec<String>,
    /// Tokens whose |weight| exceeds the highlight threshold, in text order.
    pub highlighted: Vec<String>,
    pub highlight_threshold: f64,
    #[serde(flatten)]
    pub explanation: Explanation,
    pub config_fingerprint: String,
}

impl ExplanationRecord {
    pub fn highlighted_indices(explanation: &Explanation, threshold: f64) -> Vec<usize> {
        explanation
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| w.abs() > threshold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("explanation serializes");
        out.push('\n');
        out
    }

    /// One qualitative-table row followed by the signed weight of every token.
    pub fn to_text(&self) -> String {
        let label = |l: Label| (l as u8).to_string();
        let highlighted: Vec<String> = Self::highlighted_indices(&self.explanation, self.highlight_threshold)
            .into_iter()
            .map(|i| {
                let sign = if self.explanation.weights[i] > 0.0 { '+' } else { '-' };
                format!("{sign}{}", self.explanation.tokens[i])
            })
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "post: {}", self.text);
        let _ = writeln!(out, "label: {}", self.gold_label.map(label).unwrap_or_else(|| "-".into()));
        let _ = writeln!(
            out,
            "bad words: {}",
            if self.bad_words.is_empty() { "-".into() } else { self.bad_words.join(", ") }
        );
        let _ = writeln!(out, "prediction: {} (p_toxic {:.4})", label(self.predicted_label), self.p_toxic);
        let _ = writeln!(
            out,
            "highlighted: {}",
            if highlighted.is_empty() { "-".into() } else { highlighted.join(" ") }
        );
        let width = self.explanation.tokens.iter().map(|t| t.chars().count()).max().unwrap_or(0);
        let _ = writeln!(out, "weights (intercept {:+.6}):", self.explanation.intercept);
        for (token, weight) in self.explanation.tokens.iter().zip(&self.explanation.weights) {
            let _ = writeln!(out, "  {token:<width$}  {weight:+.6}");
        }
        let _ = writeln!(out, "config fingerprint: {}", self.config_fingerprint);
        out
    }

    /// Minimal standalone page: red for toxic-leaning tokens, blue for the
    /// rest, opacity proportional to |weight|.
    pub fn to_html(&self) -> String {
        let max = self
            .explanation
            .weights
            .iter()
            .fold(0.0f64, |m, w| m.max(w.abs()));
        let mut spans = Vec::new();
        for (token, weight) in self.explanation.tokens.iter().zip(&self.explanation.weights) {
            let alpha = if max > 0.0 { weight.abs() / max } else { 0.0 };
            let rgb = if *weight > 0.0 { "255,0,0" } else { "0,0,255" };
            spans.push(format!(
                "<span title=\"{weight:+.6}\" style=\"background:rgba({rgb},{alpha:.3})\">{}</span>",
                escape_html(token)
            ));
        }
        format!(
            "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{id}</title></head>\n<body>\n<p>{}</p>\n<p>prediction {} (p_toxic {:.4}); config {}</p>\n</body></html>\n",
            spans.join(" "),
            self.predicted_label as u8,
            self.p_toxic,
            escape_html(&self.config_fingerprint),
            id = escape_html(&self.id),
        )
    }
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use toxprompt_core::evaluation::ConfusionCounts;

    fn report(method: MethodKind, macro_f1: f64) -> EvalReport {
        EvalReport {
            dataset_name: "d".into(),
            method,
            backend_name: "b".into(),
            prompt_id: None,
            neg_f1: macro_f1,
            pos_f1: macro_f1,
            macro_f1,
            counts: ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1,
                skipped: 0,
            },
            config_fingerprint: "abc".into(),
        }
    }

    #[test]
    fn table_has_one_row_per_report() {
        let reports = [report(MethodKind::Lexicon, 0.5), report(MethodKind::Random, 1.0 / 3.0)];
        let table = render_table(&reports, "abc");
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].contains("neg-F1 | pos-F1 | macro-F1"));
        assert!(lines[4].contains("0.3333"));
    }

    #[test]
    fn csv_and_json_carry_fingerprint() {
        let reports = [report(MethodKind::Lexicon, 0.5)];
        let csv = render_csv(&reports);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().ends_with(",abc"));
        assert!(render_json(&reports).contains("\"config_fingerprint\": \"abc\""));
        assert!(render_json(&reports).contains("\"fn\": 1"));
    }

    #[test]
    fn explanation_text_marks_signs() {
        let record = ExplanationRecord {
            id: "x".into(),
            text: "a <slur>".into(),
            gold_label: Some(Label::Toxic),
            predicted_label: Label::Toxic,
            p_toxic: 0.9,
            method: MethodKind::Generative,
            backend: "b".into(),
            bad_words: vec![],
            highlighted: vec![],
            highlight_threshold: 0.01,
            explanation: Explanation {
                tokens: vec!["a".into(), "<slur>".into()],
                weights: vec![-0.1, 0.6],
                intercept: 0.2,
                n_samples: 4,
                seed: 0,
                kernel_width: 0.25,
                ridge: 0.01,
                exhaustive: true,
                dropped: 0,
            },
            config_fingerprint: "f".into(),
        };
        let text = record.to_text();
        assert!(text.contains("highlighted: -a +<slur>"), "{text}");
        let html = record.to_html();
        assert!(html.contains("&lt;slur&gt;"));
        assert!(html.contains("rgba(255,0,0,1.000)"));
    }
}

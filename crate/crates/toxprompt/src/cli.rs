//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use toxprompt_core::attribution::explain;
use toxprompt_core::backend::{BackendError, LanguageModel, TokenScore};
use toxprompt_core::classifiers::{classify_lexicon, MethodKind};
use toxprompt_core::corpus::{Dataset, Document};
use toxprompt_core::evaluation::{evaluate_with, sweep_with, DocumentRunner, SweepTable};
use toxprompt_core::mock::MockBackend;

use crate::config::{BackendKind, DatasetConfig, DiscriminativeConfig, GenerativeConfig, RunConfig};
use crate::error::{CliError, LoadError};
use crate::formats::{load_fixture, FormatSpec};
use crate::prompts::builtin;
use crate::report::{self, DecisionRecord, ExplanationRecord};
use crate::runner::ParallelRunner;
use crate::server::MockServer;

#[derive(Debug, Parser)]
#[command(name = "toxprompt", version, about = "Prompt-based toxicity classification and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a single text or every document of a dataset.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Classify this text instead of a dataset.
        #[arg(long)]
        text: Option<String>,
    },
    /// Evaluate the selected methods on labeled datasets.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate every backend × method × dataset combination into a CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Explain one prediction with token-removal perturbations.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Document id within the dataset.
        #[arg(long)]
        doc_id: Option<String>,
        /// Explain this text instead of a dataset document.
        #[arg(long, conflicts_with = "doc_id")]
        text: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Serve a mock fixture over the native scoring protocol.
    ServeMock {
        /// Fixture file; defaults to the first mock backend of --config.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// 0 picks a free port.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file, replacing the configured datasets.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Methods to run (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    /// Shipped prompt id; routed to the generative or discriminative section by its kind.
    #[arg(long)]
    pub prompt_id: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_inflight: Option<usize>,
}

impl Common {
    /// Loads the config (or defaults), applies environment and flag overrides, validates.
    pub fn resolve(&self) -> Result<RunConfig, LoadError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        if let Some(path) = &self.dataset {
            let format = config.datasets.first().map(|d| d.format.clone()).unwrap_or_else(FormatSpec::jsonl);
            config.datasets = vec![DatasetConfig {
                name: None,
                path: path.clone(),
                format,
            }];
        }
        if !self.method.is_empty() {
            config.run.methods = self.method.clone();
        }
        if let Some(id) = &self.prompt_id {
            let fixture = builtin(id)
                .ok_or_else(|| LoadError::Config(format!("unknown prompt id '{id}' (shipped ids are 1-9)")))?;
            if fixture.is_generative() {
                config.generative = Some(GenerativeConfig {
                    prompt_id: Some(id.clone()),
                    ..Default::default()
                });
            } else {
                let verbalizers = config.discriminative.take().and_then(|d| d.verbalizers);
                config.discriminative = Some(DiscriminativeConfig {
                    prompt_id: Some(id.clone()),
                    verbalizers,
                    ..Default::default()
                });
            }
        }
        if let Some(k) = self.k {
            config.run.k = k;
        }
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(dir) = &self.cache_dir {
            config.run.cache_dir = Some(dir.clone());
        }
        if let Some(n) = self.max_inflight {
            config.run.max_inflight = n;
        }
        if let Some(dir) = &self.out {
            config.output.dir = Some(dir.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

/// Stands in when the selected methods never touch a backend.
struct NoBackend;

impl LanguageModel for NoBackend {
    fn name(&self) -> &str {
        "none"
    }
    fn score_tokens(&self, _: &str, _: &str) -> Result<Vec<TokenScore>, BackendError> {
        Err(BackendError::Precondition("no backend configured".into()))
    }
    fn embed_raw(&self, _: &str) -> Result<Vec<f64>, BackendError> {
        Err(BackendError::Precondition("no backend configured".into()))
    }
}

fn backends_or_none(config: &RunConfig) -> Result<Vec<Box<dyn LanguageModel>>, CliError> {
    let backends = config.build_backends()?;
    Ok(if backends.is_empty() {
        vec![Box::new(NoBackend)]
    } else {
        backends
    })
}

fn output_dir(config: &RunConfig) -> PathBuf {
    config.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn datasets(config: &RunConfig) -> Result<Vec<Dataset>, CliError> {
    let datasets = config.load_datasets()?;
    if datasets.is_empty() {
        return Err(CliError::Input("no dataset given (use --dataset or a [[dataset]] section)".into()));
    }
    Ok(datasets)
}

fn stdout_line(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Classify { common, text } => cmd_classify(&common, text),
        Command::Evaluate { common } => cmd_evaluate(&common),
        Command::Sweep { common } => cmd_sweep(&common),
        Command::Explain {
            common,
            doc_id,
            text,
            samples,
        } => cmd_explain(&common, doc_id, text, samples),
        Command::ServeMock {
            fixture,
            config,
            port,
            threads,
        } => cmd_serve_mock(fixture, config, port, threads),
    }
}

fn cmd_classify(common: &Common, text: Option<String>) -> Result<(), CliError> {
    let config = common.resolve()?;
    let fingerprint = config.fingerprint()?;
    let docs: Vec<Document> = match text {
        Some(t) => vec![Document::new("text", &t, None).map_err(|e| CliError::Input(e.to_string()))?],
        None => datasets(&config)?.into_iter().flat_map(|d| d.documents().to_vec()).collect(),
    };
    let runs = config.build_methods()?;
    let backends = backends_or_none(&config)?;
    let runner = ParallelRunner::new(config.run.max_inflight);
    let mut lines = Vec::new();
    for backend in &backends {
        for run in &runs {
            let outcomes = runner.classify_all(&docs, &run.method, backend.as_ref());
            for (doc, outcome) in docs.iter().zip(outcomes) {
                let decision = outcome.map_err(|e| match CliError::from(e) {
                    CliError::Input(m) => CliError::Input(format!("{}: {m}", doc.id)),
                    other => other,
                })?;
                let line = DecisionRecord::new(doc, backend.name(), &decision, &fingerprint).to_json_line();
                stdout_line(&line);
                lines.push(line);
            }
        }
    }
    if let Some(dir) = &config.output.dir {
        let mut body = lines.join("\n");
        body.push('\n');
        report::write_file(&dir.join("decisions.jsonl"), &body)?;
    }
    Ok(())
}

fn cmd_evaluate(common: &Common) -> Result<(), CliError> {
    let config = common.resolve()?;
    let fingerprint = config.fingerprint()?;
    let datasets = datasets(&config)?;
    let runs = config.build_methods()?;
    let backends = backends_or_none(&config)?;
    let runner = ParallelRunner::new(config.run.max_inflight);
    let policy = config.skip_policy();
    let mut reports = Vec::new();
    for backend in &backends {
        for run in &runs {
            for dataset in &datasets {
                let evaluation = evaluate_with(&runner, dataset, run, backend.as_ref(), &fingerprint, policy)?;
                reports.push(evaluation.report);
            }
        }
    }
    let dir = output_dir(&config);
    report::write_reports(&dir, &reports, &fingerprint)?;
    print!("{}", report::render_table(&reports, &fingerprint));
    Ok(())
}

#[derive(Serialize)]
struct SweepFailure<'a> {
    model: &'a str,
    method: MethodKind,
    dataset: &'a str,
    note: &'a str,
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    config_fingerprint: &'a str,
    cells: usize,
    failures: Vec<SweepFailure<'a>>,
}

fn cmd_sweep(common: &Common) -> Result<(), CliError> {
    let config = common.resolve()?;
    let fingerprint = config.fingerprint()?;
    let datasets = datasets(&config)?;
    let runs = config.build_methods()?;
    let backends = backends_or_none(&config)?;
    let models: Vec<&dyn LanguageModel> = backends.iter().map(|b| b.as_ref()).collect();
    let runner = ParallelRunner::new(config.run.max_inflight);
    let total = models.len() * runs.len() * datasets.len();
    let mut done = 0;
    let table: SweepTable = sweep_with(&runner, &models, &runs, &datasets, &fingerprint, config.skip_policy(), |cell| {
        done += 1;
        match &cell.outcome {
            Ok(s) => eprintln!(
                "[{done}/{total}] {} {} {}: macro-F1 {:.4}",
                cell.model, cell.method, cell.dataset, s.macro_f1
            ),
            Err(note) => eprintln!("[{done}/{total}] {} {} {}: FAILED {note}", cell.model, cell.method, cell.dataset),
        }
    });
    let dir = output_dir(&config);
    let csv_path = dir.join("sweep.csv");
    report::write_file(&csv_path, &table.to_csv())?;
    let meta = SweepMeta {
        config_fingerprint: &fingerprint,
        cells: table.cells.len(),
        failures: table
            .failures()
            .map(|(c, note)| SweepFailure {
                model: &c.model,
                method: c.method,
                dataset: &c.dataset,
                note,
            })
            .collect(),
    };
    let mut meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    meta_json.push('\n');
    report::write_file(&dir.join("sweep.meta.json"), &meta_json)?;
    stdout_line(&csv_path.display().to_string());
    Ok(())
}

fn cmd_explain(
    common: &Common,
    doc_id: Option<String>,
    text: Option<String>,
    samples: Option<usize>,
) -> Result<(), CliError> {
    let mut config = common.resolve()?;
    if let Some(n) = samples {
        config.explain.samples = n;
    }
    let fingerprint = config.fingerprint()?;
    let doc = match (text, doc_id) {
        (Some(t), _) => Document::new("text", &t, None).map_err(|e| CliError::Input(e.to_string()))?,
        (None, Some(id)) => {
            let found = datasets(&config)?.iter().find_map(|d| d.get(&id).cloned());
            found.ok_or_else(|| CliError::Input(format!("document '{id}' not found in the dataset")))?
        }
        (None, None) => return Err(CliError::Input("explain needs --doc-id or --text".into())),
    };
    let run = config.build_methods()?.into_iter().next().expect("at least one method");
    let backend = backends_or_none(&config)?.into_iter().next().expect("at least one backend");
    let decision = run.method.classify(&doc, backend.as_ref())?;
    let explanation = explain(&doc, &run.method, backend.as_ref(), &config.explain_config())?;
    let bad_words = match config.optional_lexicon()? {
        Some(lexicon) => match classify_lexicon(&doc, &lexicon).evidence {
            toxprompt_core::classifiers::Evidence::Lexicon { matched } => matched,
            _ => Vec::new(),
        },
        None => Vec::new(),
    };
    let threshold = config.explain.highlight;
    let highlighted = ExplanationRecord::highlighted_indices(&explanation, threshold)
        .into_iter()
        .map(|i| explanation.tokens[i].clone())
        .collect();
    let record = ExplanationRecord {
        id: doc.id.clone(),
        text: doc.text.clone(),
        gold_label: doc.gold_label,
        predicted_label: decision.label,
        p_toxic: decision.p_toxic,
        method: decision.method,
        backend: backend.name().to_string(),
        bad_words,
        highlighted,
        highlight_threshold: threshold,
        explanation,
        config_fingerprint: fingerprint,
    };
    let dir = output_dir(&config);
    report::write_file(&dir.join("explanation.json"), &record.to_json())?;
    let text = record.to_text();
    report::write_file(&dir.join("explanation.txt"), &text)?;
    report::write_file(&dir.join("explanation.html"), &record.to_html())?;
    print!("{text}");
    Ok(())
}

fn fixture_from_config(path: &Path) -> Result<(String, PathBuf), LoadError> {
    let config = RunConfig::load(path)?;
    config
        .backends
        .iter()
        .find(|b| b.kind == BackendKind::Mock)
        .map(|b| (b.name.clone(), PathBuf::from(&b.endpoint)))
        .ok_or_else(|| LoadError::Config(format!("{}: no mock backend to serve", path.display())))
}

fn cmd_serve_mock(
    fixture: Option<PathBuf>,
    config: Option<PathBuf>,
    port: u16,
    threads: usize,
) -> Result<(), CliError> {
    let (name, path) = match (fixture, config) {
        (Some(f), _) => ("mock".to_string(), f),
        (None, Some(c)) => fixture_from_config(&c)?,
        (None, None) => return Err(CliError::Input("serve-mock needs --fixture or --config".into())),
    };
    let fixture = load_fixture(&path)?;
    let backend = MockBackend::new(name, fixture).map_err(|source| LoadError::Fixture { path, source })?;
    let server = MockServer::start(backend, port, threads)
        .map_err(|e| CliError::Transport(format!("cannot listen on 127.0.0.1:{port}: {e}")))?;
    stdout_line(&format!("listening on {}", server.url()));
    server.join();
    Ok(())
}

//! Declarative run configuration (TOML) and its resolution into runnable parts.
//!
//! ```toml
//! [run]
//! methods = ["generative", "discriminative", "lexicon"]
//! seed = 0
//! k = 3
//! max_inflight = 4
//! cache_dir = "cache"
//!
//! [[backend]]
//! name = "gpt2-large"
//! kind = "native"            # mock | native | completions
//! endpoint = "http://127.0.0.1:8080"
//!
//! [generative]
//! prompt_id = "5"
//!
//! [[dataset]]
//! path = "data/hx.jsonl"
//! label_map = { hatespeech = 1, offensive = 1, normal = 0 }
//! ```
//!
//! Relative paths resolve against the config file's directory. The endpoint
//! of backend `name` may be overridden by `TOXPROMPT_ENDPOINT_<NAME>`
//! (upper-cased, non-alphanumerics as `_`); remote backends also honour
//! `TOXPROMPT_ENDPOINT`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use toxprompt_core::attribution::ExplainConfig;
use toxprompt_core::backend::LanguageModel;
use toxprompt_core::classifiers::{Lexicon, Method, MethodKind};
use toxprompt_core::corpus::{sample_demonstrations, Dataset};
use toxprompt_core::evaluation::{MethodRun, SkipPolicy};
use toxprompt_core::mock::MockBackend;
use toxprompt_core::prompting::{ClozeTemplate, PromptPair};

use crate::cache::CachedBackend;
use crate::error::LoadError;
use crate::formats::{load_dataset, load_fixture, load_lexicon, load_pool, FormatSpec};
use crate::http::{HttpBackend, HttpOptions, Protocol};
use crate::prompts::{builtin, load_prompt, PromptFixture, Verbalizers};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, rename = "backend")]
    pub backends: Vec<BackendConfig>,
    #[serde(default)]
    pub generative: Option<GenerativeConfig>,
    #[serde(default)]
    pub discriminative: Option<DiscriminativeConfig>,
    #[serde(default)]
    pub lexicon: Option<LexiconConfig>,
    #[serde(default)]
    pub embedding: Option<EmbeddingConfig>,
    #[serde(default)]
    pub demos: Option<DemosConfig>,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// Demonstrations per document for `generative_demo`.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_inflight")]
    pub max_inflight: usize,
    #[serde(default = "default_skip_rate")]
    pub max_skip_rate: f64,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn default_methods() -> Vec<String> {
    vec![MethodKind::Generative.as_str().into()]
}
fn default_k() -> usize {
    3
}
fn default_inflight() -> usize {
    4
}
fn default_skip_rate() -> f64 {
    SkipPolicy::default().max_skip_rate
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            methods: default_methods(),
            seed: 0,
            k: default_k(),
            max_inflight: default_inflight(),
            max_skip_rate: default_skip_rate(),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// In-process mock; `endpoint` is a fixture path.
    Mock,
    Native,
    Completions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub name: String,
    pub kind: BackendKind,
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// Environment variable holding a bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

fn default_timeout() -> u64 {
    30
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    100
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerativeConfig {
    #[serde(default)]
    pub prompt_id: Option<String>,
    #[serde(default)]
    pub prompt_file: Option<PathBuf>,
    #[serde(default)]
    pub positive: Option<String>,
    #[serde(default)]
    pub negative: Option<String>,
    #[serde(default)]
    pub delimiter: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminativeConfig {
    #[serde(default)]
    pub prompt_id: Option<String>,
    #[serde(default)]
    pub prompt_file: Option<PathBuf>,
    #[serde(default)]
    pub question: Option<String>,
    #[serde(default)]
    pub answer_prefix: Option<String>,
    /// Replaces the prompt's verbalizer lists.
    #[serde(default)]
    pub verbalizers: Option<Verbalizers>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    pub paths: Vec<PathBuf>,
}

/// Label descriptions for the embedding baseline. Missing sides fall back
/// to the generative instructions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    #[serde(default)]
    pub positive: Option<String>,
    #[serde(default)]
    pub negative: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemosConfig {
    pub pool: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub path: PathBuf,
    #[serde(flatten)]
    pub format: FormatSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_kernel")]
    pub kernel_width: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_drop_rate")]
    pub max_drop_rate: f64,
    /// Tokens with |weight| above this are highlighted.
    #[serde(default = "default_highlight")]
    pub highlight: f64,
}

fn default_samples() -> usize {
    ExplainConfig::default().n_samples
}
fn default_kernel() -> f64 {
    ExplainConfig::default().kernel_width
}
fn default_ridge() -> f64 {
    ExplainConfig::default().ridge
}
fn default_drop_rate() -> f64 {
    ExplainConfig::default().max_drop_rate
}
fn default_highlight() -> f64 {
    0.01
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            samples: default_samples(),
            kernel_width: default_kernel(),
            ridge: default_ridge(),
            max_drop_rate: default_drop_rate(),
            highlight: default_highlight(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn require_file(path: &Path) -> Result<(), LoadError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(LoadError::Config(format!("{}: no such file", path.display())))
    }
}

fn file_digest(path: &Path) -> Result<String, LoadError> {
    let bytes = fs::read(path).map_err(|e| LoadError::io(path, e))?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(bytes))))
}

fn env_key(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect()
}

impl RunConfig {
    pub fn parse(source: &str, origin: &Path) -> Result<Self, LoadError> {
        toml::from_str(source).map_err(|e| LoadError::invalid(origin, format!("malformed config: {e}")))
    }

    /// Loads a config file and resolves every relative path against its directory.
    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let source = fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
        let mut config = Self::parse(&source, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(dir) = &mut self.run.cache_dir {
            *dir = resolve(base, dir);
        }
        for backend in &mut self.backends {
            if backend.kind == BackendKind::Mock {
                backend.endpoint = resolve(base, Path::new(&backend.endpoint)).display().to_string();
            }
        }
        if let Some(g) = &mut self.generative {
            if let Some(p) = &mut g.prompt_file {
                *p = resolve(base, p);
            }
        }
        if let Some(d) = &mut self.discriminative {
            if let Some(p) = &mut d.prompt_file {
                *p = resolve(base, p);
            }
        }
        if let Some(l) = &mut self.lexicon {
            for p in &mut l.paths {
                *p = resolve(base, p);
            }
        }
        if let Some(d) = &mut self.demos {
            d.pool = resolve(base, &d.pool);
        }
        for d in &mut self.datasets {
            d.path = resolve(base, &d.path);
        }
        if let Some(dir) = &mut self.output.dir {
            *dir = resolve(base, dir);
        }
    }

    /// Applies endpoint environment overrides.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let global = lookup("TOXPROMPT_ENDPOINT");
        for backend in &mut self.backends {
            if let Some(e) = lookup(&format!("TOXPROMPT_ENDPOINT_{}", env_key(&backend.name))) {
                backend.endpoint = e;
            } else if let (Some(e), false) = (&global, backend.kind == BackendKind::Mock) {
                backend.endpoint = e.clone();
            }
        }
    }

    pub fn method_kinds(&self) -> Result<Vec<MethodKind>, LoadError> {
        if self.run.methods.is_empty() {
            return Err(LoadError::Config("run.methods is empty".into()));
        }
        let mut kinds = Vec::new();
        for name in &self.run.methods {
            let kind = MethodKind::parse(name).ok_or_else(|| {
                let known: Vec<&str> = MethodKind::ALL.iter().map(|k| k.as_str()).collect();
                LoadError::Config(format!("unknown method '{name}' (expected one of {})", known.join(", ")))
            })?;
            if kinds.contains(&kind) {
                return Err(LoadError::Config(format!("method '{name}' listed twice")));
            }
            kinds.push(kind);
        }
        Ok(kinds)
    }

    pub fn skip_policy(&self) -> SkipPolicy {
        SkipPolicy {
            max_skip_rate: self.run.max_skip_rate,
        }
    }

    pub fn explain_config(&self) -> ExplainConfig {
        ExplainConfig {
            n_samples: self.explain.samples,
            seed: self.run.seed,
            kernel_width: self.explain.kernel_width,
            ridge: self.explain.ridge,
            max_drop_rate: self.explain.max_drop_rate,
            allow_enumeration: true,
        }
    }

    /// Checks names, methods and that every referenced file exists.
    pub fn validate(&self) -> Result<(), LoadError> {
        let kinds = self.method_kinds()?;
        let mut names = std::collections::BTreeSet::new();
        for backend in &self.backends {
            if backend.name.is_empty() {
                return Err(LoadError::Config("backend name is empty".into()));
            }
            if !names.insert(backend.name.as_str()) {
                return Err(LoadError::Config(format!("backend name '{}' is not unique", backend.name)));
            }
            if backend.kind == BackendKind::Mock {
                require_file(Path::new(&backend.endpoint))?;
            }
        }
        if kinds.iter().any(|k| needs_backend(*k)) && self.backends.is_empty() {
            return Err(LoadError::Config("the selected methods need at least one [[backend]]".into()));
        }
        if let Some(p) = self.generative.as_ref().and_then(|g| g.prompt_file.as_ref()) {
            require_file(p)?;
        }
        if let Some(p) = self.discriminative.as_ref().and_then(|d| d.prompt_file.as_ref()) {
            require_file(p)?;
        }
        for p in self.lexicon.iter().flat_map(|l| &l.paths) {
            require_file(p)?;
        }
        if let Some(d) = &self.demos {
            require_file(&d.pool)?;
        }
        for d in &self.datasets {
            require_file(&d.path)?;
        }
        if !(0.0..=1.0).contains(&self.run.max_skip_rate) {
            return Err(LoadError::Config("run.max_skip_rate must lie in [0, 1]".into()));
        }
        if self.run.max_inflight == 0 {
            return Err(LoadError::Config("run.max_inflight must be at least 1".into()));
        }
        Ok(())
    }

    /// Stable hash of the canonicalized config.
    ///
    /// Locator fields (endpoints, cache and output directories, the
    /// in-flight bound) are left out and referenced files enter by content
    /// digest, so the same experiment fingerprints identically wherever its
    /// files and servers live.
    pub fn fingerprint(&self) -> Result<String, LoadError> {
        let canonical = self.canonical()?;
        let text = serde_json::to_string(&canonical).expect("canonical config serializes");
        Ok(hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string())
    }

    /// The value hashed by [`RunConfig::fingerprint`]. Object keys are sorted.
    pub fn canonical(&self) -> Result<Value, LoadError> {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let digest_at = |v: &mut Value| -> Result<(), LoadError> {
            if let Some(s) = v.as_str() {
                *v = Value::String(file_digest(Path::new(s))?);
            }
            Ok(())
        };
        let root = value.as_object_mut().expect("config is an object");
        root.remove("output");
        if let Some(run) = root.get_mut("run").and_then(Value::as_object_mut) {
            run.remove("cache_dir");
            run.remove("max_inflight");
        }
        for backend in root.get_mut("backend").and_then(Value::as_array_mut).into_iter().flatten() {
            let b = backend.as_object_mut().expect("backend is an object");
            let endpoint = b.remove("endpoint");
            if b.get("kind").and_then(Value::as_str) == Some("mock") {
                let mut e = endpoint.unwrap_or(Value::Null);
                digest_at(&mut e)?;
                b.insert("fixture".into(), e);
            }
        }
        for section in ["generative", "discriminative"] {
            if let Some(p) = root.get_mut(section).and_then(|s| s.get_mut("prompt_file")) {
                digest_at(p)?;
            }
        }
        for p in root
            .get_mut("lexicon")
            .and_then(|l| l.get_mut("paths"))
            .and_then(Value::as_array_mut)
            .into_iter()
            .flatten()
        {
            digest_at(p)?;
        }
        if let Some(p) = root.get_mut("demos").and_then(|d| d.get_mut("pool")) {
            digest_at(p)?;
        }
        for dataset in root.get_mut("dataset").and_then(Value::as_array_mut).into_iter().flatten() {
            if let Some(p) = dataset.get_mut("path") {
                digest_at(p)?;
            }
        }
        strip_nulls(&mut value);
        Ok(value)
    }

    pub fn build_backends(&self) -> Result<Vec<Box<dyn LanguageModel>>, LoadError> {
        let mut out: Vec<Box<dyn LanguageModel>> = Vec::new();
        for b in &self.backends {
            let inner: Box<dyn LanguageModel> = match b.kind {
                BackendKind::Mock => {
                    let path = Path::new(&b.endpoint);
                    let fixture = load_fixture(path)?;
                    let mock = MockBackend::new(b.name.clone(), fixture).map_err(|source| LoadError::Fixture {
                        path: path.to_path_buf(),
                        source,
                    })?;
                    Box::new(mock)
                }
                BackendKind::Native | BackendKind::Completions => {
                    let bearer_token = match &b.token_env {
                        Some(var) => Some(std::env::var(var).map_err(|_| {
                            LoadError::Config(format!("backend '{}': environment variable {var} is not set", b.name))
                        })?),
                        None => None,
                    };
                    let options = HttpOptions {
                        timeout: Duration::from_secs(b.timeout_secs),
                        retries: b.retries,
                        backoff: Duration::from_millis(b.backoff_ms),
                        bearer_token,
                        params: b.params.clone(),
                    };
                    let protocol = if b.kind == BackendKind::Native {
                        Protocol::Native
                    } else {
                        Protocol::Completions
                    };
                    Box::new(HttpBackend::new(b.name.clone(), &b.endpoint, protocol, options))
                }
            };
            out.push(match &self.run.cache_dir {
                Some(dir) => Box::new(CachedBackend::new(inner, dir)),
                None => inner,
            });
        }
        Ok(out)
    }

    pub fn load_datasets(&self) -> Result<Vec<Dataset>, LoadError> {
        self.datasets
            .iter()
            .map(|d| load_dataset(&d.path, &d.format, d.name.as_deref()))
            .collect()
    }

    fn generative_prompt(&self) -> Result<(PromptPair, String), LoadError> {
        let g = self.generative.clone().unwrap_or_default();
        let origin = Path::new("[generative]");
        let (fixture, id) = match (&g.prompt_id, &g.prompt_file, &g.positive, &g.negative) {
            (Some(id), None, None, None) => (builtin_or_err(id)?, id.clone()),
            (None, Some(path), None, None) => (load_prompt(path)?, stem(path)),
            (None, None, Some(pos), Some(neg)) => (
                PromptFixture::Generative {
                    name: "inline".into(),
                    positive: pos.clone(),
                    negative: neg.clone(),
                    delimiter: g.delimiter.clone().unwrap_or_else(|| PromptPair::DEFAULT_DELIMITER.into()),
                },
                "inline".into(),
            ),
            (None, None, None, None) => (builtin_or_err("1")?, "1".into()),
            _ => {
                return Err(LoadError::Config(
                    "[generative] takes exactly one of prompt_id, prompt_file or positive+negative".into(),
                ))
            }
        };
        Ok((fixture.prompt_pair(origin)?, id))
    }

    fn cloze_template(&self) -> Result<(ClozeTemplate, String), LoadError> {
        let d = self.discriminative.clone().unwrap_or_default();
        let origin = Path::new("[discriminative]");
        let (fixture, id) = match (&d.prompt_id, &d.prompt_file, &d.question) {
            (Some(id), None, None) => (builtin_or_err(id)?, id.clone()),
            (None, Some(path), None) => (load_prompt(path)?, stem(path)),
            (None, None, Some(q)) => (
                PromptFixture::Discriminative {
                    name: "inline".into(),
                    question: q.clone(),
                    answer_prefix: d
                        .answer_prefix
                        .clone()
                        .unwrap_or_else(|| ClozeTemplate::DEFAULT_ANSWER_PREFIX.into()),
                    verbalizers: Verbalizers::default(),
                },
                "inline".into(),
            ),
            (None, None, None) => (builtin_or_err("8")?, "8".into()),
            _ => {
                return Err(LoadError::Config(
                    "[discriminative] takes exactly one of prompt_id, prompt_file or question".into(),
                ))
            }
        };
        Ok((fixture.cloze_template(origin, d.verbalizers.as_ref())?, id))
    }

    fn lexicon(&self) -> Result<Lexicon, LoadError> {
        match &self.lexicon {
            Some(l) if !l.paths.is_empty() => load_lexicon(&l.paths),
            _ => Err(LoadError::Config("method 'lexicon' needs [lexicon] paths".into())),
        }
    }

    /// Builds one [`MethodRun`] per selected method, in selection order.
    pub fn build_methods(&self) -> Result<Vec<MethodRun>, LoadError> {
        let mut runs = Vec::new();
        for kind in self.method_kinds()? {
            let run = match kind {
                MethodKind::Generative => {
                    let (pair, id) = self.generative_prompt()?;
                    MethodRun::new(Method::Generative(pair), Some(id))
                }
                MethodKind::GenerativeDemo => {
                    let (pair, id) = self.generative_prompt()?;
                    let demos = if self.run.k == 0 {
                        Vec::new()
                    } else {
                        let pool = match &self.demos {
                            Some(d) => load_pool(&d.pool)?,
                            None => {
                                return Err(LoadError::Config(
                                    "method 'generative_demo' with k > 0 needs [demos] pool".into(),
                                ))
                            }
                        };
                        sample_demonstrations(&pool, self.run.k, self.run.seed)
                            .map_err(|e| LoadError::Config(format!("demonstrations: {e}")))?
                    };
                    MethodRun::new(Method::GenerativeDemo { pair, demos }, Some(id))
                }
                MethodKind::Discriminative => {
                    let (template, id) = self.cloze_template()?;
                    MethodRun::new(Method::Discriminative(template), Some(id))
                }
                MethodKind::Lexicon => MethodRun::new(Method::Lexicon(self.lexicon()?), None),
                MethodKind::Embedding => {
                    let e = self.embedding.clone().unwrap_or_default();
                    let (positive, negative) = match (e.positive, e.negative) {
                        (Some(p), Some(n)) => (p, n),
                        (p, n) => {
                            let (pair, _) = self.generative_prompt()?;
                            (
                                p.unwrap_or_else(|| pair.positive().into()),
                                n.unwrap_or_else(|| pair.negative().into()),
                            )
                        }
                    };
                    MethodRun::new(Method::Embedding { positive, negative }, None)
                }
                MethodKind::Random => MethodRun::new(Method::Random { seed: self.run.seed }, None),
            };
            runs.push(run);
        }
        Ok(runs)
    }

    /// Loaded lexicon, when one is configured. Used for the explanation's bad-words column.
    pub fn optional_lexicon(&self) -> Result<Option<Lexicon>, LoadError> {
        match &self.lexicon {
            Some(l) if !l.paths.is_empty() => load_lexicon(&l.paths).map(Some),
            _ => Ok(None),
        }
    }
}

fn needs_backend(kind: MethodKind) -> bool {
    !matches!(kind, MethodKind::Lexicon | MethodKind::Random)
}

fn builtin_or_err(id: &str) -> Result<PromptFixture, LoadError> {
    builtin(id).ok_or_else(|| LoadError::Config(format!("unknown prompt id '{id}' (shipped ids are 1-9)")))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn strip_nulls(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.retain(|_, v| !v.is_null());
            map.values_mut().for_each(strip_nulls);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_nulls),
        _ => {}
    }
}

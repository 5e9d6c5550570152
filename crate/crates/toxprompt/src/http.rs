//! Remote providers over HTTP.
//!
//! [`Protocol::Native`] speaks the protocol in [`crate::wire`].
//! [`Protocol::Completions`] speaks the completions-with-echoed-logprobs
//! convention (`max_tokens: 0`, `echo: true`) and converts its
//! `tokens` / `token_logprobs` / `text_offset` arrays to native token scores.
//! Its `text_offset` values are taken as character offsets into the prompt.
//! Neither adapter applies temperature scaling or truncation.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};
use toxprompt_core::backend::{BackendError, LanguageModel, TokenScore};

use crate::wire::{EmbedRequest, EmbedResponse, ErrorResponse, ScoreRequest, ScoreResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Native,
    Completions,
}

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub timeout: Duration,
    /// Extra attempts after the first transport failure.
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff: Duration,
    pub bearer_token: Option<String>,
    /// Merged into every request body. Values that parse as JSON scalars are sent as such.
    pub params: BTreeMap<String, String>,
}

impl Default for HttpOptions {
    fn default() -> Self {
        HttpOptions {
            timeout: Duration::from_secs(30),
            retries: 3,
            backoff: Duration::from_millis(100),
            bearer_token: None,
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    name: String,
    endpoint: String,
    protocol: Protocol,
    options: HttpOptions,
    agent: ureq::Agent,
    /// Embedding dimension seen so far, 0 until the first embedding.
    dim: AtomicUsize,
}

enum Failure {
    Retryable(String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(name: impl Into<String>, endpoint: &str, protocol: Protocol, options: HttpOptions) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            name: name.into(),
            endpoint: endpoint.trim_end_matches('/').to_string(),
            protocol,
            options,
            agent,
            dim: AtomicUsize::new(0),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn body(&self, payload: impl serde::Serialize) -> Value {
        let mut body = match serde_json::to_value(payload).expect("request serializes") {
            Value::Object(map) => map,
            _ => Map::new(),
        };
        for (key, raw) in &self.options.params {
            let value = match serde_json::from_str::<Value>(raw) {
                Ok(v @ (Value::Number(_) | Value::Bool(_) | Value::Null)) => v,
                _ => Value::String(raw.clone()),
            };
            body.entry(key.clone()).or_insert(value);
        }
        Value::Object(body)
    }

    fn attempt<T: DeserializeOwned>(&self, url: &str, body: &Value) -> Result<T, Failure> {
        let mut request = self.agent.post(url);
        if let Some(token) = &self.options.bearer_token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| Failure::Retryable(format!("{url}: {e}")))?;
        let status = response.status().as_u16();
        if status >= 400 {
            let detail = response
                .body_mut()
                .read_json::<ErrorResponse>()
                .map(|e| e.error)
                .unwrap_or_default();
            let message = format!("{url}: HTTP {status} {detail}");
            return Err(if status >= 500 || status == 429 {
                Failure::Retryable(message)
            } else {
                Failure::Fatal(BackendError::Protocol(message))
            });
        }
        response
            .body_mut()
            .read_json::<T>()
            .map_err(|e| Failure::Fatal(BackendError::Protocol(format!("{url}: {e}"))))
    }

    fn post<T: DeserializeOwned>(&self, path: &str, body: Value) -> Result<T, BackendError> {
        let url = format!("{}{}", self.endpoint, path);
        let mut delay = self.options.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(&url, &body) {
                Ok(value) => return Ok(value),
                Err(Failure::Fatal(err)) => return Err(err),
                Err(Failure::Retryable(message)) => {
                    if attempt >= self.options.retries {
                        return Err(BackendError::Transport(format!(
                            "{message} (after {} attempts)",
                            attempt + 1
                        )));
                    }
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }

    fn check_dim(&self, found: usize) -> Result<(), BackendError> {
        match self.dim.compare_exchange(0, found, Ordering::SeqCst, Ordering::SeqCst) {
            Ok(_) => Ok(()),
            Err(expected) if expected == found => Ok(()),
            Err(expected) => Err(BackendError::DimensionDrift { expected, found }),
        }
    }
}

#[derive(Deserialize)]
struct CompletionsResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    logprobs: Option<EchoedLogprobs>,
}

#[derive(Deserialize)]
struct EchoedLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    text_offset: Vec<usize>,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

/// Converts echoed completions logprobs into native token scores.
fn echoed_to_tokens(prompt: &str, context_len: usize, echoed: EchoedLogprobs) -> Result<Vec<TokenScore>, BackendError> {
    if echoed.tokens.len() != echoed.token_logprobs.len() || echoed.tokens.len() != echoed.text_offset.len() {
        return Err(BackendError::Protocol("echoed logprob arrays differ in length".into()));
    }
    let char_to_byte: Vec<usize> = prompt
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(prompt.len()))
        .collect();
    let mut tokens = Vec::with_capacity(echoed.tokens.len());
    for ((text, logprob), char_offset) in echoed.tokens.into_iter().zip(echoed.token_logprobs).zip(echoed.text_offset) {
        let byte_offset = *char_to_byte
            .get(char_offset)
            .ok_or_else(|| BackendError::Protocol(format!("text_offset {char_offset} beyond prompt")))?;
        let logprob = match logprob {
            Some(lp) => lp,
            // the first prompt token is unconditioned; only acceptable inside the context
            None if byte_offset < context_len => 0.0,
            None => {
                return Err(BackendError::Protocol(format!(
                    "no logprob for continuation token {text:?}"
                )))
            }
        };
        tokens.push(TokenScore {
            token_text: text,
            logprob,
            byte_offset,
        });
    }
    Ok(tokens)
}

impl LanguageModel for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_tokens(&self, context: &str, continuation: &str) -> Result<Vec<TokenScore>, BackendError> {
        match self.protocol {
            Protocol::Native => {
                let body = self.body(ScoreRequest {
                    context: context.into(),
                    continuation: continuation.into(),
                });
                let response: ScoreResponse = self.post("/score", body)?;
                Ok(response.tokens.into_iter().map(TokenScore::from).collect())
            }
            Protocol::Completions => {
                let prompt = format!("{context}{continuation}");
                let body = self.body(serde_json::json!({
                    "prompt": prompt,
                    "max_tokens": 0,
                    "echo": true,
                    "logprobs": 0,
                }));
                let response: CompletionsResponse = self.post("/v1/completions", body)?;
                let echoed = response
                    .choices
                    .into_iter()
                    .next()
                    .and_then(|c| c.logprobs)
                    .ok_or_else(|| BackendError::Protocol("response carries no echoed logprobs".into()))?;
                echoed_to_tokens(&prompt, context.len(), echoed)
            }
        }
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let vector = match self.protocol {
            Protocol::Native => {
                let response: EmbedResponse = self.post("/embed", self.body(EmbedRequest { text: text.into() }))?;
                response.vector
            }
            Protocol::Completions => {
                let response: EmbeddingsResponse =
                    self.post("/v1/embeddings", self.body(serde_json::json!({ "input": text })))?;
                response
                    .data
                    .into_iter()
                    .next()
                    .map(|d| d.embedding)
                    .ok_or_else(|| BackendError::Protocol("embeddings response is empty".into()))?
            }
        };
        self.check_dim(vector.len())?;
        Ok(vector)
    }
}

//! Token-probability and embedding providers.
//!
//! Providers implement [`LanguageModel`], which returns raw answers. The free
//! functions [`score_continuation`], [`candidate_next_probs`] and [`embed`]
//! check preconditions and validate what the provider returned, so every
//! classifier sees scores that satisfy the reconstruction, summation and
//! tokenization-boundary rules regardless of where they came from.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    /// Network or server failure. Retryable by the transport layer.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("token {token:?} at byte {offset} straddles the context/continuation boundary")]
    Boundary { token: String, offset: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("candidate {0:?} has no resolvable first token")]
    UnresolvedCandidate(String),
    #[error("embedding dimension changed from {expected} to {found}")]
    DimensionDrift { expected: usize, found: usize },
    #[error("no embedding available for text {0:?}")]
    MissingEmbedding(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
}

impl BackendError {
    pub fn is_transport(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// Log-probability of one token. `byte_offset` indexes into `context + continuation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token_text: String,
    pub logprob: f64,
    pub byte_offset: usize,
}

/// Scores for exactly the continuation region of a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationScore {
    pub tokens: Vec<TokenScore>,
    pub total_logprob: f64,
}

impl ContinuationScore {
    /// Validates raw provider tokens for `context + continuation`.
    ///
    /// Tokens lying wholly inside the context are discarded. A token that
    /// begins in the context and ends in the continuation is a boundary
    /// error. The remaining tokens must tile the continuation exactly.
    pub fn from_tokens(
        context: &str,
        continuation: &str,
        raw: Vec<TokenScore>,
    ) -> Result<Self, BackendError> {
        let boundary = context.len();
        let mut tokens = Vec::with_capacity(raw.len());
        let mut last_offset: Option<usize> = None;
        for token in raw {
            if let Some(prev) = last_offset {
                if token.byte_offset <= prev {
                    return Err(BackendError::Protocol(format!(
                        "token offsets not strictly increasing at byte {}",
                        token.byte_offset
                    )));
                }
            }
            last_offset = Some(token.byte_offset);
            if !token.logprob.is_finite() && token.logprob != f64::NEG_INFINITY {
                return Err(BackendError::Protocol(format!(
                    "non-finite logprob for token {:?}",
                    token.token_text
                )));
            }
            if token.byte_offset < boundary {
                if token.byte_offset + token.token_text.len() > boundary {
                    return Err(BackendError::Boundary {
                        token: token.token_text,
                        offset: token.byte_offset,
                    });
                }
                continue;
            }
            tokens.push(token);
        }

        let mut cursor = boundary;
        for token in &tokens {
            let end = token.byte_offset + token.token_text.len();
            if token.byte_offset != cursor
                || continuation.get(cursor - boundary..end - boundary) != Some(&token.token_text)
            {
                return Err(BackendError::Protocol(format!(
                    "tokens do not reconstruct the continuation at byte {}",
                    token.byte_offset
                )));
            }
            cursor = end;
        }
        if cursor != boundary + continuation.len() {
            return Err(BackendError::Protocol(format!(
                "tokens cover {} of {} continuation bytes",
                cursor - boundary,
                continuation.len()
            )));
        }

        let total_logprob = tokens.iter().fold(0.0, |acc, t| acc + t.logprob);
        Ok(ContinuationScore {
            tokens,
            total_logprob,
        })
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// Raw next-token probabilities per candidate. Not renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDistribution {
    pub entries: BTreeMap<String, f64>,
}

impl CandidateDistribution {
    pub fn get(&self, candidate: &str) -> Option<f64> {
        self.entries.get(candidate).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }
}

/// Identity and location of a provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    /// Unique within a run; keys the cache and sweep output.
    pub name: String,
    /// URL for remote providers, fixture path for the mock.
    pub endpoint: String,
    #[serde(default)]
    pub request_params: BTreeMap<String, String>,
}

pub trait LanguageModel: Send + Sync {
    fn name(&self) -> &str;

    /// Token log-probabilities for `context + continuation`. Offsets index
    /// into the concatenation; tokens of the context may be included.
    fn score_tokens(&self, context: &str, continuation: &str)
        -> Result<Vec<TokenScore>, BackendError>;

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, BackendError>;

    /// Probability of the first token of `candidate` right after `context`.
    fn next_token_prob(&self, context: &str, candidate: &str) -> Result<f64, BackendError> {
        let raw = self.score_tokens(context, candidate)?;
        let score = ContinuationScore::from_tokens(context, candidate, raw)?;
        score
            .tokens
            .first()
            .map(|t| libm::exp(t.logprob))
            .ok_or_else(|| BackendError::UnresolvedCandidate(candidate.into()))
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for &T {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn score_tokens(&self, context: &str, continuation: &str) -> Result<Vec<TokenScore>, BackendError> {
        (**self).score_tokens(context, continuation)
    }
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        (**self).embed_raw(text)
    }
    fn next_token_prob(&self, context: &str, candidate: &str) -> Result<f64, BackendError> {
        (**self).next_token_prob(context, candidate)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for alloc::boxed::Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn score_tokens(&self, context: &str, continuation: &str) -> Result<Vec<TokenScore>, BackendError> {
        (**self).score_tokens(context, continuation)
    }
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        (**self).embed_raw(text)
    }
    fn next_token_prob(&self, context: &str, candidate: &str) -> Result<f64, BackendError> {
        (**self).next_token_prob(context, candidate)
    }
}

/// Per-token log-probabilities of `continuation` given `context`.
pub fn score_continuation(
    model: &dyn LanguageModel,
    context: &str,
    continuation: &str,
) -> Result<ContinuationScore, BackendError> {
    if continuation.is_empty() {
        return Err(BackendError::Precondition("continuation must be non-empty".into()));
    }
    let raw = model.score_tokens(context, continuation)?;
    ContinuationScore::from_tokens(context, continuation, raw)
}

/// First-token probabilities for each candidate after `context`.
pub fn candidate_next_probs(
    model: &dyn LanguageModel,
    context: &str,
    candidates: &[String],
) -> Result<CandidateDistribution, BackendError> {
    if candidates.is_empty() {
        return Err(BackendError::Precondition("candidate list must be non-empty".into()));
    }
    let distinct: BTreeSet<&str> = candidates.iter().map(String::as_str).collect();
    if distinct.len() != candidates.len() {
        return Err(BackendError::Precondition("candidates must be pairwise distinct".into()));
    }
    let mut entries = BTreeMap::new();
    for candidate in candidates {
        if candidate.is_empty() {
            return Err(BackendError::UnresolvedCandidate(candidate.clone()));
        }
        let p = model.next_token_prob(context, candidate)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(BackendError::Protocol(format!(
                "probability {p} for candidate {candidate:?} outside [0, 1]"
            )));
        }
        entries.insert(candidate.clone(), p);
    }
    Ok(CandidateDistribution { entries })
}

pub fn embed(model: &dyn LanguageModel, text: &str) -> Result<EmbeddingVector, BackendError> {
    if text.is_empty() {
        return Err(BackendError::Precondition("text to embed must be non-empty".into()));
    }
    let values = model.embed_raw(text)?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(BackendError::Protocol("embedding must be a non-empty finite vector".into()));
    }
    Ok(EmbeddingVector { values })
}

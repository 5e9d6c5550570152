//! Table-driven provider with closed-form answers.
//!
//! A fixture entry `(context_suffix, token, prob)` applies to every
//! occurrence of `token` in a continuation whose request context ends with
//! `context_suffix`; the longest matching suffix wins, then the earliest
//! entry. Anything unmatched gets the uniform fallback `1 / vocab_size`.
//!
//! The mock tokenizer splits a continuation on its own (never across the
//! context boundary): a newline is a token by itself, and otherwise a token
//! is a run of blanks followed by a run of non-whitespace, so `"you stink"`
//! becomes `["you", " stink"]`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, LanguageModel, TokenScore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FixtureError {
    #[error("vocab_size must be at least 1")]
    EmptyVocabulary,
    #[error("probability {prob} for token {token:?} outside (0, 1]")]
    ProbabilityOutOfRange { token: String, prob: f64 },
    #[error("embedding for {text:?} has dimension {found}, expected {expected}")]
    EmbeddingDimension {
        text: String,
        expected: usize,
        found: usize,
    },
    #[error("embedding for {0:?} is empty or non-finite")]
    BadEmbedding(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub context_suffix: String,
    pub token: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFixture {
    pub vocab_size: u64,
    pub entries: Vec<MockEntry>,
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<f64>>,
}

impl MockFixture {
    pub fn validate(&self) -> Result<(), FixtureError> {
        if self.vocab_size == 0 {
            return Err(FixtureError::EmptyVocabulary);
        }
        for entry in &self.entries {
            if !(entry.prob > 0.0 && entry.prob <= 1.0) {
                return Err(FixtureError::ProbabilityOutOfRange {
                    token: entry.token.clone(),
                    prob: entry.prob,
                });
            }
        }
        let mut dim = None;
        for (text, values) in &self.embeddings {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(FixtureError::BadEmbedding(text.clone()));
            }
            match dim {
                None => dim = Some(values.len()),
                Some(expected) if expected != values.len() => {
                    return Err(FixtureError::EmbeddingDimension {
                        text: text.clone(),
                        expected,
                        found: values.len(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Probability the table assigns to `token` after `context`.
    pub fn token_prob(&self, context: &str, token: &str) -> f64 {
        let mut best: Option<&MockEntry> = None;
        for entry in &self.entries {
            if entry.token == token && context.ends_with(entry.context_suffix.as_str()) {
                let longer = best.is_none_or(|b| entry.context_suffix.len() > b.context_suffix.len());
                if longer {
                    best = Some(entry);
                }
            }
        }
        match best {
            Some(entry) => entry.prob,
            None => 1.0 / self.vocab_size as f64,
        }
    }
}

/// Splits text into mock tokens as `(byte_offset, token)` pairs.
pub fn mock_tokenize(text: &str) -> Vec<(usize, &str)> {
    let mut tokens = Vec::new();
    let mut start = 0;
    let mut prev: Option<char> = None;
    for (i, c) in text.char_indices() {
        let boundary = match prev {
            None => false,
            Some(p) => {
                c == '\n' || p == '\n' || (c.is_whitespace() && !p.is_whitespace())
            }
        };
        if boundary {
            tokens.push((start, &text[start..i]));
            start = i;
        }
        prev = Some(c);
    }
    if start < text.len() {
        tokens.push((start, &text[start..]));
    }
    tokens
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    name: String,
    fixture: MockFixture,
}

impl MockBackend {
    pub fn new(name: impl Into<String>, fixture: MockFixture) -> Result<Self, FixtureError> {
        fixture.validate()?;
        Ok(MockBackend {
            name: name.into(),
            fixture,
        })
    }

    pub fn fixture(&self) -> &MockFixture {
        &self.fixture
    }
}

impl LanguageModel for MockBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_tokens(&self, context: &str, continuation: &str) -> Result<Vec<TokenScore>, BackendError> {
        let base = context.len();
        Ok(mock_tokenize(continuation)
            .into_iter()
            .map(|(offset, token)| TokenScore {
                token_text: token.into(),
                logprob: libm::log(self.fixture.token_prob(context, token)),
                byte_offset: base + offset,
            })
            .collect())
    }

    /// Table probability of the candidate's first mock token, without a log/exp round trip.
    fn next_token_prob(&self, context: &str, candidate: &str) -> Result<f64, BackendError> {
        let (_, first) = mock_tokenize(candidate)
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::UnresolvedCandidate(candidate.into()))?;
        Ok(self.fixture.token_prob(context, first))
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        self.fixture
            .embeddings
            .get(text)
            .cloned()
            .ok_or_else(|| BackendError::MissingEmbedding(text.into()))
    }
}

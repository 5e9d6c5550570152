//! JSON bodies of the native scoring protocol.
//!
//! - `POST /score` with [`ScoreRequest`] answers [`ScoreResponse`]; offsets
//!   index into `context + continuation`.
//! - `POST /embed` with [`EmbedRequest`] answers [`EmbedResponse`].
//! - Errors come back as [`ErrorResponse`] with a 4xx/5xx status.

use serde::{Deserialize, Serialize};
use toxprompt_core::backend::TokenScore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub context: String,
    pub continuation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireToken {
    pub text: String,
    pub logprob: f64,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub tokens: Vec<WireToken>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

impl From<WireToken> for TokenScore {
    fn from(t: WireToken) -> Self {
        TokenScore {
            token_text: t.text,
            logprob: t.logprob,
            byte_offset: t.offset,
        }
    }
}

impl From<TokenScore> for WireToken {
    fn from(t: TokenScore) -> Self {
        WireToken {
            text: t.token_text,
            logprob: t.logprob,
            offset: t.byte_offset,
        }
    }
}

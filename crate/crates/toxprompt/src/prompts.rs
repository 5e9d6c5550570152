//! Prompt fixture files, including the nine shipped prompts (ids `1`-`9`).
//!
//! Generative fixtures carry `positive`, `negative` and an optional
//! `delimiter`; discriminative fixtures carry `question`, an optional
//! `answer_prefix` and optional `verbalizers.yes` / `verbalizers.no` lists.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toxprompt_core::prompting::{ClozeTemplate, PromptPair};

use crate::error::LoadError;

const BUILTIN: [(&str, &str); 9] = [
    ("1", include_str!("../prompts/1.toml")),
    ("2", include_str!("../prompts/2.toml")),
    ("3", include_str!("../prompts/3.toml")),
    ("4", include_str!("../prompts/4.toml")),
    ("5", include_str!("../prompts/5.toml")),
    ("6", include_str!("../prompts/6.toml")),
    ("7", include_str!("../prompts/7.toml")),
    ("8", include_str!("../prompts/8.toml")),
    ("9", include_str!("../prompts/9.toml")),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verbalizers {
    #[serde(default = "default_yes")]
    pub yes: Vec<String>,
    #[serde(default = "default_no")]
    pub no: Vec<String>,
}

impl Default for Verbalizers {
    fn default() -> Self {
        Verbalizers {
            yes: default_yes(),
            no: default_no(),
        }
    }
}

fn default_yes() -> Vec<String> {
    vec![" Yes".into()]
}

fn default_no() -> Vec<String> {
    vec![" No".into()]
}

fn default_delimiter() -> String {
    PromptPair::DEFAULT_DELIMITER.into()
}

fn default_answer_prefix() -> String {
    ClozeTemplate::DEFAULT_ANSWER_PREFIX.into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PromptFixture {
    Generative {
        name: String,
        positive: String,
        negative: String,
        #[serde(default = "default_delimiter")]
        delimiter: String,
    },
    Discriminative {
        name: String,
        question: String,
        #[serde(default = "default_answer_prefix")]
        answer_prefix: String,
        #[serde(default)]
        verbalizers: Verbalizers,
    },
}

impl PromptFixture {
    pub fn name(&self) -> &str {
        match self {
            PromptFixture::Generative { name, .. } | PromptFixture::Discriminative { name, .. } => name,
        }
    }

    pub fn is_generative(&self) -> bool {
        matches!(self, PromptFixture::Generative { .. })
    }

    pub fn prompt_pair(&self, origin: &Path) -> Result<PromptPair, LoadError> {
        match self {
            PromptFixture::Generative {
                positive,
                negative,
                delimiter,
                ..
            } => PromptPair::new(positive.as_str(), negative.as_str(), delimiter.as_str()).map_err(|source| {
                LoadError::Prompt {
                    path: origin.to_path_buf(),
                    source,
                }
            }),
            PromptFixture::Discriminative { name, .. } => Err(LoadError::invalid(
                origin,
                format!("prompt '{name}' is a cloze question, not an instruction pair"),
            )),
        }
    }

    /// Cloze template; `override_verbalizers` replaces the fixture's lists.
    pub fn cloze_template(
        &self,
        origin: &Path,
        override_verbalizers: Option<&Verbalizers>,
    ) -> Result<ClozeTemplate, LoadError> {
        match self {
            PromptFixture::Discriminative {
                question,
                answer_prefix,
                verbalizers,
                ..
            } => {
                let v = override_verbalizers.unwrap_or(verbalizers);
                ClozeTemplate::new(question.as_str(), answer_prefix.as_str(), v.yes.clone(), v.no.clone())
                    .map_err(|source| LoadError::Prompt {
                        path: origin.to_path_buf(),
                        source,
                    })
            }
            PromptFixture::Generative { name, .. } => Err(LoadError::invalid(
                origin,
                format!("prompt '{name}' is an instruction pair, not a cloze question"),
            )),
        }
    }
}

pub fn parse_prompt(source: &str, origin: &Path) -> Result<PromptFixture, LoadError> {
    toml::from_str(source).map_err(|e| LoadError::invalid(origin, format!("malformed prompt fixture: {e}")))
}

pub fn load_prompt(path: &Path) -> Result<PromptFixture, LoadError> {
    let source = fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    parse_prompt(&source, path)
}

/// One of the shipped prompts by id.
pub fn builtin(id: &str) -> Option<PromptFixture> {
    BUILTIN
        .iter()
        .find(|(key, _)| *key == id)
        .map(|(key, src)| parse_prompt(src, Path::new(key)).expect("shipped prompt fixtures parse"))
}

pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(id, _)| *id)
}

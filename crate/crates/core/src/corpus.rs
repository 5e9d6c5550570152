//! Labeled documents, datasets and unlabeled demonstration pools.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("document '{id}' has empty text after normalization")]
    EmptyText { id: String },
    #[error("duplicate document id '{0}'")]
    DuplicateId(String),
    #[error("cannot sample {k} demonstrations from a pool of {available}")]
    SampleTooLarge { k: usize, available: usize },
}

/// Binary gold or predicted label. Serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    NonToxic,
    Toxic,
}

impl Label {
    pub fn from_bool(toxic: bool) -> Self {
        if toxic {
            Label::Toxic
        } else {
            Label::NonToxic
        }
    }

    pub fn is_toxic(self) -> bool {
        self == Label::Toxic
    }

    pub fn flipped(self) -> Self {
        Label::from_bool(!self.is_toxic())
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        label.is_toxic() as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = InvalidLabel;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Label::NonToxic),
            1 => Ok(Label::Toxic),
            other => Err(InvalidLabel(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidLabel(pub u8);

impl fmt::Display for InvalidLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "label must be 0 or 1, got {}", self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_toxic() { "1" } else { "0" })
    }
}

/// One text instance with an optional gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub gold_label: Option<Label>,
}

impl Document {
    /// Builds a document from raw text, applying [`normalize_text`].
    pub fn new(
        id: impl Into<String>,
        raw_text: &str,
        gold_label: Option<Label>,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let text = normalize_text(raw_text);
        if text.is_empty() {
            return Err(CorpusError::EmptyText { id });
        }
        Ok(Document {
            id,
            text,
            gold_label,
        })
    }
}

/// Records how source fields were mapped onto documents at load time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelFieldMap {
    pub id_field: Option<String>,
    pub text_field: String,
    pub label_field: Option<String>,
    /// Source label value to binary label. Empty when labels are read as 0/1 directly.
    pub label_values: BTreeMap<String, Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    documents: Vec<Document>,
    pub label_field_map: LabelFieldMap,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        documents: Vec<Document>,
        label_field_map: LabelFieldMap,
    ) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Dataset {
            name: name.into(),
            documents,
            label_field_map,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// First document lacking a gold label, if any.
    pub fn first_unlabeled(&self) -> Option<&Document> {
        self.documents.iter().find(|d| d.gold_label.is_none())
    }
}

/// Unlabeled texts that demonstrations are drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemonstrationPool {
    pub texts: Vec<String>,
    pub source_path: String,
}

impl DemonstrationPool {
    pub fn new(texts: Vec<String>, source_path: impl Into<String>) -> Self {
        DemonstrationPool {
            texts,
            source_path: source_path.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

/// NFC composition, CR/CRLF to LF, outer whitespace trimmed. Interior
/// whitespace is kept as is because likelihood scoring is whitespace-sensitive.
pub fn normalize_text(raw: &str) -> String {
    let unified = raw.replace("\r\n", "\n").replace('\r', "\n");
    let composed: String = unified.nfc().collect();
    composed.trim().to_string()
}

/// Draws `k` distinct pool entries without replacement. The output sequence
/// is a pure function of `(pool.texts, k, seed)`.
pub fn sample_demonstrations(
    pool: &DemonstrationPool,
    k: usize,
    seed: u64,
) -> Result<Vec<String>, CorpusError> {
    if k > pool.len() {
        return Err(CorpusError::SampleTooLarge {
            k,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool.texts[i].clone())
        .collect())
}

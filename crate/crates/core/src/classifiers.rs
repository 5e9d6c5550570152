//! Zero-supervision classifiers and the shared two-way posterior.
//!
//! Every classifier returns a [`Decision`]. The label rule is the same for
//! all of them: toxic iff `p_toxic > 0.5`, so an exact tie is non-toxic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{self, BackendError, ContinuationScore, LanguageModel};
use crate::corpus::{Document, Label};
use crate::prompting::{self, ClozeTemplate, PromptError, PromptPair, Side};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("scores must be finite (got {s_pos}, {s_neg})")]
    NonFinite { s_pos: f64, s_neg: f64 },
    #[error("positive context scored {positive} tokens of the text, negative scored {negative}")]
    TokenCountMismatch { positive: usize, negative: usize },
    #[error("verbalizer probabilities sum to zero")]
    DegenerateDistribution,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("lexicon has no terms")]
    EmptyLexicon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Generative,
    GenerativeDemo,
    Discriminative,
    Lexicon,
    Embedding,
    Random,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Generative,
        MethodKind::GenerativeDemo,
        MethodKind::Discriminative,
        MethodKind::Lexicon,
        MethodKind::Embedding,
        MethodKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Generative => "generative",
            MethodKind::GenerativeDemo => "generative_demo",
            MethodKind::Discriminative => "discriminative",
            MethodKind::Lexicon => "lexicon",
            MethodKind::Embedding => "embedding",
            MethodKind::Random => "random",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        MethodKind::ALL.into_iter().find(|m| m.as_str() == name)
    }
}

impl core::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoScore {
    pub s_pos: f64,
    pub s_neg: f64,
}

/// Method-specific detail behind a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Generative {
        tokens: usize,
    },
    Demonstrations {
        tokens: usize,
        per_demo: Vec<DemoScore>,
    },
    Verbalizers {
        yes: BTreeMap<String, f64>,
        no: BTreeMap<String, f64>,
        p_yes: f64,
        p_no: f64,
    },
    Lexicon {
        matched: Vec<String>,
    },
    /// `p_toxic` is the logistic of the similarity gap, a monotone surrogate
    /// rather than a calibrated probability.
    Embedding {
        score_pos: f64,
        score_neg: f64,
    },
    Random {
        draw: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub s_pos: f64,
    pub s_neg: f64,
    pub p_toxic: f64,
    pub label: Label,
    pub method: MethodKind,
    pub evidence: Evidence,
}

/// `e^s_pos / (e^s_pos + e^s_neg)`, evaluated as a logistic of the score gap
/// so large magnitudes cannot overflow.
pub fn two_way_posterior(s_pos: f64, s_neg: f64) -> Result<f64, ClassifyError> {
    if !s_pos.is_finite() || !s_neg.is_finite() {
        return Err(ClassifyError::NonFinite { s_pos, s_neg });
    }
    let gap = s_neg - s_pos;
    if gap.is_nan() || gap.is_infinite() {
        // both finite but the difference overflowed
        return Ok(if gap > 0.0 { 0.0 } else { 1.0 });
    }
    Ok(if gap >= 0.0 {
        let e = libm::exp(-gap);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(gap))
    })
}

pub fn label_for(p_toxic: f64) -> Label {
    Label::from_bool(p_toxic > 0.5)
}

fn likelihood_decision(
    s_pos: f64,
    s_neg: f64,
    method: MethodKind,
    evidence: Evidence,
) -> Result<Decision, ClassifyError> {
    let p_toxic = two_way_posterior(s_pos, s_neg)?;
    Ok(Decision {
        s_pos,
        s_neg,
        p_toxic,
        label: label_for(p_toxic),
        method,
        evidence,
    })
}

fn score_sides(
    doc: &Document,
    pair: &PromptPair,
    demo: Option<&str>,
    model: &dyn LanguageModel,
) -> Result<(ContinuationScore, ContinuationScore), ClassifyError> {
    let score = |side| -> Result<ContinuationScore, ClassifyError> {
        let rendered = prompting::render_generative(pair, side, demo, doc)?;
        Ok(backend::score_continuation(model, &rendered.context, &rendered.continuation)?)
    };
    let pos = score(Side::Positive)?;
    let neg = score(Side::Negative)?;
    if pos.token_count() != neg.token_count() {
        return Err(ClassifyError::TokenCountMismatch {
            positive: pos.token_count(),
            negative: neg.token_count(),
        });
    }
    Ok((pos, neg))
}

/// Log-likelihood of the text under the positive versus the negative instruction.
pub fn classify_generative(
    doc: &Document,
    pair: &PromptPair,
    model: &dyn LanguageModel,
) -> Result<Decision, ClassifyError> {
    let (pos, neg) = score_sides(doc, pair, None, model)?;
    likelihood_decision(
        pos.total_logprob,
        neg.total_logprob,
        MethodKind::Generative,
        Evidence::Generative {
            tokens: pos.token_count(),
        },
    )
}

/// Sums each side's log-likelihood over one context per demonstration. With
/// no demonstrations this is [`classify_generative`] under a different tag.
pub fn classify_generative_with_demos(
    doc: &Document,
    pair: &PromptPair,
    demos: &[String],
    model: &dyn LanguageModel,
) -> Result<Decision, ClassifyError> {
    if demos.is_empty() {
        let mut decision = classify_generative(doc, pair, model)?;
        decision.method = MethodKind::GenerativeDemo;
        return Ok(decision);
    }
    let mut per_demo = Vec::with_capacity(demos.len());
    let mut tokens = 0;
    for demo in demos {
        let (pos, neg) = score_sides(doc, pair, Some(demo), model)?;
        tokens = pos.token_count();
        per_demo.push(DemoScore {
            s_pos: pos.total_logprob,
            s_neg: neg.total_logprob,
        });
    }
    let s_pos = per_demo.iter().fold(0.0, |acc, d| acc + d.s_pos);
    let s_neg = per_demo.iter().fold(0.0, |acc, d| acc + d.s_neg);
    likelihood_decision(
        s_pos,
        s_neg,
        MethodKind::GenerativeDemo,
        Evidence::Demonstrations { tokens, per_demo },
    )
}

/// Renormalized yes/no verbalizer probabilities after a cloze question.
pub fn classify_discriminative(
    doc: &Document,
    template: &ClozeTemplate,
    model: &dyn LanguageModel,
) -> Result<Decision, ClassifyError> {
    let rendered = prompting::render_cloze(template, doc)?;
    let query = |verbalizers: &[String]| -> Result<(BTreeMap<String, f64>, f64), ClassifyError> {
        let dist = backend::candidate_next_probs(model, &rendered.context, verbalizers)?;
        let total = verbalizers
            .iter()
            .fold(0.0, |acc, v| acc + dist.get(v).unwrap_or(0.0));
        Ok((dist.entries, total))
    };
    let (yes, p_yes) = query(template.yes_verbalizers())?;
    let (no, p_no) = query(template.no_verbalizers())?;
    let total = p_yes + p_no;
    if !(total > 0.0) {
        return Err(ClassifyError::DegenerateDistribution);
    }
    let p_toxic = p_yes / total;
    Ok(Decision {
        s_pos: libm::log(p_yes),
        s_neg: libm::log(p_no),
        p_toxic,
        label: label_for(p_toxic),
        method: MethodKind::Discriminative,
        evidence: Evidence::Verbalizers { yes, no, p_yes, p_no },
    })
}

/// Maximal runs of letters, digits and apostrophes.
pub fn word_tokens(text: &str) -> Vec<&str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '\u{2019}'))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Lowercased keyword list. Multi-word terms match contiguous word tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    terms: BTreeSet<String>,
    pub sources: Vec<String>,
    by_first_word: BTreeMap<String, Vec<(String, Vec<String>)>>,
}

impl Lexicon {
    pub fn new<I, S>(terms: I, sources: Vec<String>) -> Result<Self, ClassifyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms: BTreeSet<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if terms.is_empty() {
            return Err(ClassifyError::EmptyLexicon);
        }
        let mut by_first_word: BTreeMap<String, Vec<(String, Vec<String>)>> = BTreeMap::new();
        for term in &terms {
            let words: Vec<String> = word_tokens(term).into_iter().map(str::to_string).collect();
            if let Some(first) = words.first() {
                by_first_word
                    .entry(first.clone())
                    .or_default()
                    .push((term.clone(), words.clone()));
            }
        }
        Ok(Lexicon {
            terms,
            sources,
            by_first_word,
        })
    }

    pub fn terms(&self) -> &BTreeSet<String> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sorted, deduplicated lexicon terms present in `text`.
    pub fn matches(&self, text: &str) -> Vec<String> {
        let lowered = text.to_lowercase();
        let words = word_tokens(&lowered);
        let mut found = BTreeSet::new();
        for (i, word) in words.iter().enumerate() {
            let Some(candidates) = self.by_first_word.get(*word) else {
                continue;
            };
            for (term, phrase) in candidates {
                let end = i + phrase.len();
                if end <= words.len() && words[i..end].iter().zip(phrase).all(|(w, p)| *w == p) {
                    found.insert(term.clone());
                }
            }
        }
        found.into_iter().collect()
    }
}

/// Toxic iff any lexicon term occurs in the text.
pub fn classify_lexicon(doc: &Document, lexicon: &Lexicon) -> Decision {
    let matched = lexicon.matches(&doc.text);
    let toxic = !matched.is_empty();
    Decision {
        s_pos: matched.len() as f64,
        s_neg: 0.0,
        p_toxic: if toxic { 1.0 } else { 0.0 },
        label: Label::from_bool(toxic),
        method: MethodKind::Lexicon,
        evidence: Evidence::Lexicon { matched },
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, ClassifyError> {
    if a.len() != b.len() {
        return Err(ClassifyError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        return Err(ClassifyError::ZeroNorm);
    }
    Ok(dot / (na * nb))
}

/// Cosine similarity of the text to a toxic versus a benign description.
pub fn classify_embedding(
    doc: &Document,
    pos_desc: &str,
    neg_desc: &str,
    model: &dyn LanguageModel,
) -> Result<Decision, ClassifyError> {
    let x = backend::embed(model, &doc.text)?;
    let pos = backend::embed(model, pos_desc)?;
    let neg = backend::embed(model, neg_desc)?;
    let score_pos = cosine_similarity(&x.values, &pos.values)?;
    let score_neg = cosine_similarity(&x.values, &neg.values)?;
    likelihood_decision(
        score_pos,
        score_neg,
        MethodKind::Embedding,
        Evidence::Embedding {
            score_pos,
            score_neg,
        },
    )
}

/// Fair coin keyed by `(seed, doc.id)`.
pub fn classify_random(doc: &Document, seed: u64) -> Decision {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(doc.id.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
    let draw: f64 = rng.random();
    Decision {
        s_pos: draw,
        s_neg: 1.0 - draw,
        p_toxic: draw,
        label: label_for(draw),
        method: MethodKind::Random,
        evidence: Evidence::Random { draw },
    }
}

/// A fully parameterized classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Generative(PromptPair),
    GenerativeDemo { pair: PromptPair, demos: Vec<String> },
    Discriminative(ClozeTemplate),
    Lexicon(Lexicon),
    Embedding { positive: String, negative: String },
    Random { seed: u64 },
}

impl Method {
    pub fn kind(&self) -> MethodKind {
        match self {
            Method::Generative(_) => MethodKind::Generative,
            Method::GenerativeDemo { .. } => MethodKind::GenerativeDemo,
            Method::Discriminative(_) => MethodKind::Discriminative,
            Method::Lexicon(_) => MethodKind::Lexicon,
            Method::Embedding { .. } => MethodKind::Embedding,
            Method::Random { .. } => MethodKind::Random,
        }
    }

    /// Whether classification touches the backend at all.
    pub fn uses_backend(&self) -> bool {
        !matches!(self, Method::Lexicon(_) | Method::Random { .. })
    }

    pub fn classify(&self, doc: &Document, model: &dyn LanguageModel) -> Result<Decision, ClassifyError> {
        match self {
            Method::Generative(pair) => classify_generative(doc, pair, model),
            Method::GenerativeDemo { pair, demos } => {
                classify_generative_with_demos(doc, pair, demos, model)
            }
            Method::Discriminative(template) => classify_discriminative(doc, template, model),
            Method::Lexicon(lexicon) => Ok(classify_lexicon(doc, lexicon)),
            Method::Embedding { positive, negative } => {
                classify_embedding(doc, positive, negative, model)
            }
            Method::Random { seed } => Ok(classify_random(doc, *seed)),
        }
    }
}

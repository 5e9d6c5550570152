//! Generative instruction contexts and discriminative cloze prompts.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("instruction text must be non-empty")]
    EmptyInstruction,
    #[error("positive and negative instructions must differ")]
    IdenticalInstructions,
    #[error("delimiter {0:?} must end with a newline")]
    SoftDelimiter(String),
    #[error("cloze question must be non-empty")]
    EmptyQuestion,
    #[error("verbalizer lists must be non-empty")]
    EmptyVerbalizers,
    #[error("verbalizer {0:?} appears under both yes and no")]
    OverlappingVerbalizers(String),
    #[error("document '{0}' has empty text")]
    EmptyDocument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Positive,
    Negative,
}

/// Contrasting instructions steering generation toward or away from toxicity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    positive_instruction: String,
    negative_instruction: String,
    delimiter: String,
}

impl PromptPair {
    pub const DEFAULT_DELIMITER: &'static str = "\n";

    /// Validates the pair. The delimiter must end in a newline so that the
    /// scored text starts on a hard token boundary under both contexts.
    pub fn new(
        positive: impl Into<String>,
        negative: impl Into<String>,
        delimiter: impl Into<String>,
    ) -> Result<Self, PromptError> {
        let (positive_instruction, negative_instruction, delimiter) =
            (positive.into(), negative.into(), delimiter.into());
        if positive_instruction.is_empty() || negative_instruction.is_empty() {
            return Err(PromptError::EmptyInstruction);
        }
        if positive_instruction == negative_instruction {
            return Err(PromptError::IdenticalInstructions);
        }
        if !delimiter.ends_with('\n') {
            return Err(PromptError::SoftDelimiter(delimiter));
        }
        Ok(PromptPair {
            positive_instruction,
            negative_instruction,
            delimiter,
        })
    }

    pub fn instruction(&self, side: Side) -> &str {
        match side {
            Side::Positive => &self.positive_instruction,
            Side::Negative => &self.negative_instruction,
        }
    }

    pub fn positive(&self) -> &str {
        &self.positive_instruction
    }

    pub fn negative(&self) -> &str {
        &self.negative_instruction
    }

    pub fn delimiter(&self) -> &str {
        &self.delimiter
    }
}

/// Question appended after the text; the answer is read off verbalizer probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeTemplate {
    question: String,
    answer_prefix: String,
    yes_verbalizers: Vec<String>,
    no_verbalizers: Vec<String>,
}

impl ClozeTemplate {
    pub const DEFAULT_ANSWER_PREFIX: &'static str = "Answer:";

    pub fn new(
        question: impl Into<String>,
        answer_prefix: impl Into<String>,
        yes_verbalizers: Vec<String>,
        no_verbalizers: Vec<String>,
    ) -> Result<Self, PromptError> {
        let question = question.into();
        if question.is_empty() {
            return Err(PromptError::EmptyQuestion);
        }
        if yes_verbalizers.is_empty() || no_verbalizers.is_empty() {
            return Err(PromptError::EmptyVerbalizers);
        }
        let yes: BTreeSet<&String> = yes_verbalizers.iter().collect();
        if let Some(shared) = no_verbalizers.iter().find(|v| yes.contains(v)) {
            return Err(PromptError::OverlappingVerbalizers(shared.clone()));
        }
        Ok(ClozeTemplate {
            question,
            answer_prefix: answer_prefix.into(),
            yes_verbalizers,
            no_verbalizers,
        })
    }

    /// Default answer prefix and single-variant `" Yes"` / `" No"` verbalizers.
    pub fn with_defaults(question: impl Into<String>) -> Result<Self, PromptError> {
        ClozeTemplate::new(
            question,
            Self::DEFAULT_ANSWER_PREFIX,
            vec![" Yes".into()],
            vec![" No".into()],
        )
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn answer_prefix(&self) -> &str {
        &self.answer_prefix
    }

    pub fn yes_verbalizers(&self) -> &[String] {
        &self.yes_verbalizers
    }

    pub fn no_verbalizers(&self) -> &[String] {
        &self.no_verbalizers
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedContext {
    pub context: String,
    pub continuation: String,
}

/// `instruction + delim [+ demo + delim]`, with the document text as continuation.
pub fn render_generative(
    pair: &PromptPair,
    side: Side,
    demo: Option<&str>,
    doc: &Document,
) -> Result<RenderedContext, PromptError> {
    if doc.text.is_empty() {
        return Err(PromptError::EmptyDocument(doc.id.clone()));
    }
    let mut context = String::from(pair.instruction(side));
    context.push_str(&pair.delimiter);
    if let Some(demo) = demo {
        context.push_str(demo);
        context.push_str(&pair.delimiter);
    }
    Ok(RenderedContext {
        context,
        continuation: doc.text.clone(),
    })
}

/// `text \n question \n answer_prefix`. The continuation is left empty; the
/// classifier queries verbalizer probabilities after the context.
pub fn render_cloze(template: &ClozeTemplate, doc: &Document) -> Result<RenderedContext, PromptError> {
    if doc.text.is_empty() {
        return Err(PromptError::EmptyDocument(doc.id.clone()));
    }
    let mut context = String::with_capacity(
        doc.text.len() + template.question.len() + template.answer_prefix.len() + 2,
    );
    context.push_str(&doc.text);
    context.push('\n');
    context.push_str(&template.question);
    context.push('\n');
    context.push_str(&template.answer_prefix);
    Ok(RenderedContext {
        context,
        continuation: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn doc(text: &str) -> Document {
        Document {
            id: "d".into(),
            text: text.into(),
            gold_label: None,
        }
    }

    fn hatespeech() -> PromptPair {
        PromptPair::new(
            "Write a text that contains hatespeech",
            "Write a text that doesn't contain hatespeech",
            "\n",
        )
        .unwrap()
    }

    #[test]
    fn generative_without_demo() {
        let r = render_generative(&hatespeech(), Side::Positive, None, &doc("you stink")).unwrap();
        assert_eq!(r.context, "Write a text that contains hatespeech\n");
        assert_eq!(r.continuation, "you stink");
    }

    #[test]
    fn generative_with_demo() {
        let r = render_generative(&hatespeech(), Side::Positive, Some("some post"), &doc("you stink"))
            .unwrap();
        assert_eq!(r.context, "Write a text that contains hatespeech\nsome post\n");
    }

    #[test]
    fn negative_side_uses_negative_instruction() {
        let r = render_generative(&hatespeech(), Side::Negative, None, &doc("x")).unwrap();
        assert_eq!(r.context, "Write a text that doesn't contain hatespeech\n");
    }

    #[test]
    fn sides_differ_only_in_instruction() {
        let pair = hatespeech();
        let d = doc("  keep  this  ");
        let pos = render_generative(&pair, Side::Positive, Some("u"), &d).unwrap();
        let neg = render_generative(&pair, Side::Negative, Some("u"), &d).unwrap();
        assert_eq!(
            pos.context.strip_prefix(pair.positive()),
            neg.context.strip_prefix(pair.negative())
        );
        assert_eq!(pos.continuation, "  keep  this  ");
        assert_eq!(pos.continuation, neg.continuation);
    }

    #[test]
    fn pair_validation() {
        assert_eq!(PromptPair::new("", "b", "\n"), Err(PromptError::EmptyInstruction));
        assert_eq!(PromptPair::new("a", "a", "\n"), Err(PromptError::IdenticalInstructions));
        assert_eq!(
            PromptPair::new("a", "b", " "),
            Err(PromptError::SoftDelimiter(" ".to_string()))
        );
        assert!(PromptPair::new("a", "b", "\n\n").is_ok());
    }

    #[test]
    fn cloze_intentional_offensiveness() {
        let t = ClozeTemplate::with_defaults(
            "Does the above text exhibit intentional offensiveness or toxicity?",
        )
        .unwrap();
        let r = render_cloze(&t, &doc("hi")).unwrap();
        assert_eq!(
            r.context,
            "hi\nDoes the above text exhibit intentional offensiveness or toxicity?\nAnswer:"
        );
    }

    #[test]
    fn cloze_question_rendered_verbatim() {
        let q = "Question: Does the above text contain very hateful, aggressive, disrespectful language?";
        let t = ClozeTemplate::with_defaults(q).unwrap();
        let r = render_cloze(&t, &doc("post")).unwrap();
        assert_eq!(r.context, alloc::format!("post\n{q}\nAnswer:"));
    }

    #[test]
    fn cloze_empty_doc_rejected() {
        let t = ClozeTemplate::with_defaults("q?").unwrap();
        assert_eq!(render_cloze(&t, &doc("")), Err(PromptError::EmptyDocument("d".into())));
    }

    #[test]
    fn verbalizers_must_be_disjoint() {
        let err = ClozeTemplate::new(
            "q",
            "Answer:",
            vec![" Yes".into(), " yes".into()],
            vec![" No".into(), " yes".into()],
        )
        .unwrap_err();
        assert_eq!(err, PromptError::OverlappingVerbalizers(" yes".into()));
    }
}

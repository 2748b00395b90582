//! Structural validation of question sets and answers.

use std::collections::HashSet;

use thiserror::Error;

use crate::anchor::{resolve_anchor_with, AnchorMode};
use crate::config::EngineConfig;
use crate::domain::{AnswerSet, EmailMessage, QuestionFlag, QuestionSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("{count} questions exceed the cap of {cap}")]
    TooManyQuestions { count: usize, cap: usize },
    #[error("duplicate question id {0:?}")]
    DuplicateId(String),
    #[error("question at position {0} has a blank id")]
    EmptyId(usize),
    #[error("question {0:?} has empty text")]
    EmptyQuestionText(String),
}

/// Checks structure and resolves every question's anchor against the body.
///
/// Anchors and flags already present on `raw` are recomputed. Questions whose
/// quote cannot be located get the `Unanchored` flag; that is not an error.
pub fn validate_question_set(
    mut raw: QuestionSet,
    email: &EmailMessage,
    config: &EngineConfig,
) -> Result<QuestionSet, Vec<ValidationError>> {
    let mut errors = Vec::new();
    if raw.questions.len() > config.question_cap {
        errors.push(ValidationError::TooManyQuestions {
            count: raw.questions.len(),
            cap: config.question_cap,
        });
    }
    let mut seen = HashSet::new();
    for (i, q) in raw.questions.iter().enumerate() {
        if q.id.trim().is_empty() {
            errors.push(ValidationError::EmptyId(i));
        } else if !seen.insert(q.id.as_str()) {
            errors.push(ValidationError::DuplicateId(q.id.clone()));
        }
        if q.question.trim().is_empty() {
            errors.push(ValidationError::EmptyQuestionText(q.id.clone()));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let patterns: Vec<String> = config.other_patterns.iter().map(|p| p.to_lowercase()).collect();
    for q in &mut raw.questions {
        q.flags.clear();
        q.anchor = None;
        let resolution = resolve_anchor_with(&q.corresponding_part, &email.body, config.fuzzy_threshold);
        match resolution.mode {
            AnchorMode::Exact => q.anchor = resolution.span,
            AnchorMode::Normalized | AnchorMode::Fuzzy => {
                q.anchor = resolution.span;
                q.flags.insert(QuestionFlag::FuzzyAnchor);
            }
            AnchorMode::Failed => {
                q.flags.insert(QuestionFlag::Unanchored);
            }
        }
        if resolution.is_ambiguous() {
            q.flags.insert(QuestionFlag::AmbiguousAnchor);
        }
        if q.choices.iter().any(|c| is_other_like(c, &patterns)) {
            q.flags.insert(QuestionFlag::OtherLikeChoice);
        }
    }
    Ok(raw)
}

/// `patterns` must already be lowercase.
fn is_other_like(choice: &str, patterns: &[String]) -> bool {
    let choice = choice.trim().to_lowercase();
    patterns.iter().any(|p| {
        let Some(rest) = choice.strip_prefix(p.as_str()) else {
            return false;
        };
        rest.is_empty() || rest == "s" || rest.chars().next().is_some_and(|c| !c.is_alphanumeric())
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerError {
    #[error("unknown question id {0:?}")]
    UnknownQuestionId(String),
    #[error("choice index {index} out of range for question {question_id:?} with {choices} choices")]
    IndexOutOfRange {
        question_id: String,
        index: usize,
        choices: usize,
    },
    #[error("question {0:?} is answered more than once")]
    DuplicateAnswer(String),
    #[error("skipped answer for question {0:?} carries selections")]
    SkippedWithContent(String),
    #[error("empty custom option for question {0:?}")]
    EmptyCustomOption(String),
}

impl AnswerError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownQuestionId(_) => "unknown_question_id",
            Self::IndexOutOfRange { .. } => "index_out_of_range",
            Self::DuplicateAnswer(_) => "duplicate_answer",
            Self::SkippedWithContent(_) => "skipped_with_content",
            Self::EmptyCustomOption(_) => "empty_custom_option",
        }
    }
}

/// Referential integrity of `answers` against `questions`.
pub fn validate_answers(questions: &QuestionSet, answers: &AnswerSet) -> Result<(), AnswerError> {
    let mut seen = HashSet::new();
    for answer in answers.iter() {
        let id = &answer.question_id;
        let question = questions
            .get(id)
            .ok_or_else(|| AnswerError::UnknownQuestionId(id.clone()))?;
        if !seen.insert(id.as_str()) {
            return Err(AnswerError::DuplicateAnswer(id.clone()));
        }
        if answer.skipped && (!answer.selected.is_empty() || !answer.custom_options.is_empty()) {
            return Err(AnswerError::SkippedWithContent(id.clone()));
        }
        if let Some(&index) = answer.selected.iter().find(|&&i| i >= question.choices.len()) {
            return Err(AnswerError::IndexOutOfRange {
                question_id: id.clone(),
                index,
                choices: question.choices.len(),
            });
        }
        if answer.custom_options.iter().any(|o| o.trim().is_empty()) {
            return Err(AnswerError::EmptyCustomOption(id.clone()));
        }
    }
    Ok(())
}
